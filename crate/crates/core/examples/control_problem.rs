//! The two-state control problem solved through its shift family.
use tsl::control::{self, ControlProblem, SParamFamily};
use tsl::timescale::ScaleGenerator;

fn main() -> tsl::Result<()> {
    let ts = ScaleGenerator::HStep { a: 0.0, b: 1.0, h: 0.1 }.generate()?;
    let p = ControlProblem::shipped(&ts)?;

    let sol = control::solve_by_invariance(&p)?;
    println!("s* = {}, minimum cost = {:.15}", sol.s_star, sol.min_cost);

    let x = control::simulate(&p, &sol.minimizer)?;
    for t in [0.0, 0.5, 1.0] {
        println!("  t = {t}: x1 = {:.12}, x2 = {:.12}", x.x1.eval(t), x.x2.eval(t));
    }

    let family = SParamFamily::new(&p, 0.5);
    println!("s = 0.5 member endpoints: {:?}", family.problem(&p).endpoints());

    let mut checked = 0;
    for seed in 0..50 {
        if let Some(u) = control::random_feasible(&p, seed, 0.5, 0.0)? {
            let r = control::check_invariance(&p, 0.5, &u, 1e-12);
            assert!(r.pass, "{r:?}");
            assert!(control::cost(&p, &u)? >= sol.min_cost - 1e-12);
            checked += 1;
        }
    }
    println!("{checked} random feasible controls: invariance holds, none beats the minimizer");

    let mut out = Vec::new();
    control::write_csv_default(&p, &sol.minimizer, &x, &mut out)?;
    print!("{}", String::from_utf8_lossy(&out).lines().take(4).collect::<Vec<_>>().join("\n"));
    println!();
    Ok(())
}
