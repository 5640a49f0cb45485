//! Solving `min ∫ (x^Δ)² + x^σ + t·x^Δ Δt` with the linear shift transformation.
//!
//! Run with `cargo run --example illustrative_problem -- 0 2` to set α and β.
use tsl::leitmann::{
    illustrative_problem, linear_shift_case, transport_minimizer, verify_lemma, zero_minimizer,
    Tolerances,
};
use tsl::timescale::ScaleGenerator;
use tsl::variational::{check_admissible, evaluate_functional, random_admissible};

fn main() -> tsl::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let (alpha, beta) = (args.first().copied().unwrap_or(0.0), args.get(1).copied().unwrap_or(2.0));

    let ts = ScaleGenerator::HStep { a: 0.0, b: 2.0, h: 0.25 }.generate()?;
    let p = illustrative_problem(&ts, 0.0, 2.0, alpha, beta)?;
    let pair = linear_shift_case(&p)?;

    let tol = Tolerances::for_scale(&ts);
    let report = verify_lemma(&pair, 50, 7, tol.tol_res, tol.tol_gap);
    println!(
        "identity residual {:.2e}, gap spread {:.2e}, verdict {:?}",
        report.max_abs_residual, report.gap_constant_spread, report.verdict
    );

    let x = transport_minimizer(&pair, &zero_minimizer(&pair))?;
    let best = evaluate_functional(&p, &x)?;
    println!("minimizer admissible: {}", check_admissible(&p, &x, 1e-12).admissible);
    println!("minimum value {best:.12}");
    for t in ts.enumerate_scattered() {
        println!("  x({t}) = {}", x.eval(t));
    }

    let worst = (0..200)
        .map(|k| evaluate_functional(&p, &random_admissible(&p, k, 1.0)))
        .collect::<tsl::Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    println!("best of 200 random competitors {worst:.12}");
    Ok(())
}
