//! Cross-checking the transported minimizer against direct numerical solvers.
use tsl::leitmann::{illustrative_problem, linear_shift_case, transport_minimizer, zero_minimizer};
use tsl::oracle::{discretize, from_grid, solve_generic, solve_quadratic};
use tsl::timescale::ScaleGenerator;
use tsl::variational::{evaluate_functional, Lagrangian};

fn main() -> tsl::Result<()> {
    let ts = ScaleGenerator::QScale { q: 1.5, k_min: 0, k_max: 8 }.generate()?;
    let (a, b) = (ts.min(), ts.max());
    let p = illustrative_problem(&ts, a, b, 1.0, -1.0)?;
    let pair = linear_shift_case(&p)?;
    let x = transport_minimizer(&pair, &zero_minimizer(&pair))?;
    let exact = evaluate_functional(&p, &x)?;

    let dp = discretize(&p, 0);
    let quad = solve_quadratic(&dp)?;
    let generic = solve_generic(&dp, 4, 1);
    println!("transported  {exact:.15}");
    println!("quadratic    {:.15}", quad.value);
    println!("generic      {:.15} (converged {})", generic.value, generic.converged);

    // A non-quadratic Lagrangian goes straight to the generic solver.
    let quartic = Lagrangian::new(|_, y, v| v * v + 0.1 * y.powi(4));
    let grid: Vec<f64> = (0..=10).map(|k| k as f64 * 0.1).collect();
    let dq = from_grid(grid, 0.0, 1.0, quartic)?;
    match solve_quadratic(&dq) {
        Ok(_) => println!("quartic: unexpectedly quadratic"),
        Err(e) => println!("quartic rejected by the quadratic solver: {e}"),
    }
    let r = solve_generic(&dq, 4, 1);
    println!("quartic generic minimum {:.12}", r.value);
    Ok(())
}
