//! Running every verification suite over the default scale bundle, then
//! again with a corrupted gauge to show the checks catch it.
use tsl::leitmann::GaugeFault;
use tsl::verify::{default_bundle, verify_all, VerifyOptions};

fn main() {
    let bundle = default_bundle();
    let opts = VerifyOptions { trials: 20, ..VerifyOptions::default() };
    for faulty in [None, Some(GaugeFault::DropQuadraticTerm)] {
        let outcome = verify_all(&bundle, &VerifyOptions { fault: faulty, ..opts });
        println!("fault {faulty:?}: overall pass = {}", outcome.pass);
        for sv in &outcome.scales {
            let failed: Vec<&str> = sv.suites.iter().filter(|s| !s.pass).map(|s| s.suite.as_str()).collect();
            println!(
                "  {:<20} lemma residual {:.1e} {:?}  failing suites {:?}",
                sv.name, sv.lemma.max_abs_residual, sv.lemma.verdict, failed
            );
        }
    }
}
