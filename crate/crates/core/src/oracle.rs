//! Direct minimization of the discretized functional.
//!
//! On a purely scattered scale the discretized objective is the functional
//! itself. Dense segments are replaced by uniform grids. Quadratic
//! Lagrangians are solved exactly through the tridiagonal stationarity
//! system; anything else goes through coordinate descent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timescale::{Component, TimeScale};
use crate::variational::{Lagrangian, Trajectory, VariationalProblem};

/// Steps per dense segment at refinement level 0.
pub const BASE_STEPS: usize = 64;
/// Relative agreement required of second differences in the quadraticity probe.
pub const TOL_QUADRATIC: f64 = 1e-10;
/// Relative sweep improvement below which coordinate descent stops.
pub const TOL_SWEEP: f64 = 1e-10;
const MAX_SWEEPS: usize = 20_000;

#[derive(Clone, Debug)]
pub struct DiscretizedProblem {
    grid: Vec<f64>,
    alpha: f64,
    beta: f64,
    lagrangian: Lagrangian,
}

/// Replaces every dense segment of the problem's scale by `2^refine · 64`
/// uniform steps. Scattered points pass through unchanged.
pub fn discretize(p: &VariationalProblem, refine: u32) -> DiscretizedProblem {
    let steps = BASE_STEPS << refine;
    let mut grid = Vec::new();
    for c in p.scale().components() {
        match *c {
            Component::Point(t) => grid.push(t),
            Component::Interval(lo, hi) => {
                grid.extend((0..steps).map(|k| lo + (hi - lo) * k as f64 / steps as f64));
                grid.push(hi);
            }
        }
    }
    DiscretizedProblem {
        grid,
        alpha: p.alpha(),
        beta: p.beta(),
        lagrangian: p.lagrangian().clone(),
    }
}

impl DiscretizedProblem {
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn free_count(&self) -> usize {
        self.grid.len().saturating_sub(2)
    }

    pub fn boundary(&self) -> (f64, f64) {
        (self.alpha, self.beta)
    }

    /// The grid as a purely scattered time scale.
    pub fn scale(&self) -> Result<TimeScale> {
        TimeScale::from_points(&self.grid)
    }

    /// `μ_k L(t_k, w, (w - u)/μ_k)`.
    fn term(&self, k: usize, u: f64, w: f64) -> f64 {
        let mu = self.grid[k + 1] - self.grid[k];
        mu * self.lagrangian.eval(self.grid[k], w, (w - u) / mu)
    }

    /// Objective at full grid values (endpoints included).
    pub fn objective(&self, x: &[f64]) -> f64 {
        (0..self.grid.len() - 1).map(|k| self.term(k, x[k], x[k + 1])).sum()
    }

    fn with_free(&self, free: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.grid.len());
        x.push(self.alpha);
        x.extend_from_slice(free);
        x.push(self.beta);
        x
    }

    /// Grid values as a trajectory on [`Self::scale`].
    pub fn trajectory(&self, x: &[f64]) -> Result<Trajectory> {
        let ts = self.scale()?;
        Trajectory::from_parts(&ts, x.to_vec(), Vec::new())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Quadratic,
    Generic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub method: Method,
    pub value: f64,
    /// Values on the whole grid, endpoints included.
    pub argmin: Vec<f64>,
    pub converged: bool,
}

/// `½(A u² + 2B uw + C w²) + D u + E w + F` fitted to one term by unit-step
/// probing.
#[derive(Clone, Copy, Debug)]
struct QuadTerm {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    e: f64,
}

fn probe_term(dp: &DiscretizedProblem, k: usize, rng: &mut ChaCha8Rng) -> Result<QuadTerm> {
    let f = |u: f64, w: f64| dp.term(k, u, w);
    let f0 = f(0.0, 0.0);
    let (fu, fu_, fw, fw_, fuw) = (f(1.0, 0.0), f(-1.0, 0.0), f(0.0, 1.0), f(0.0, -1.0), f(1.0, 1.0));
    let q = QuadTerm {
        a: fu + fu_ - 2.0 * f0,
        c: fw + fw_ - 2.0 * f0,
        b: fuw - fu - fw + f0,
        d: 0.5 * (fu - fu_),
        e: 0.5 * (fw - fw_),
    };
    let all = [f0, fu, fu_, fw, fw_, fuw];
    if all.iter().any(|v| !v.is_finite()) {
        return Err(Error::WrongOracle(format!("objective term {k} is not finite near 0")));
    }
    // Along random directions from random bases the second difference must
    // equal the fitted Hessian form.
    for _ in 0..2 {
        let (pu, pw) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let (du, dw) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let (fp, fplus, fminus) = (f(pu, pw), f(pu + du, pw + dw), f(pu - du, pw - dw));
        let second = fplus + fminus - 2.0 * fp;
        let form = q.a * du * du + 2.0 * q.b * du * dw + q.c * dw * dw;
        let scale = [second.abs(), form.abs(), fp.abs(), fplus.abs(), fminus.abs(), f0.abs()]
            .into_iter()
            .chain(all.iter().map(|v| v.abs()))
            .fold(0.0, f64::max);
        if !((second - form).abs() <= TOL_QUADRATIC * scale) {
            return Err(Error::WrongOracle(format!(
                "objective term {k} is not quadratic (second difference {second} vs {form})"
            )));
        }
    }
    Ok(q)
}

/// Exact minimization for objectives that are convex quadratics in the free
/// values.
pub fn solve_quadratic(dp: &DiscretizedProblem) -> Result<OracleReport> {
    let n = dp.free_count();
    let terms = dp.grid.len() - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let q: Vec<QuadTerm> = (0..terms)
        .map(|k| probe_term(dp, k, &mut rng))
        .collect::<Result<_>>()?;
    if n == 0 {
        let x = dp.with_free(&[]);
        return Ok(OracleReport {
            method: Method::Quadratic,
            value: dp.objective(&x),
            argmin: x,
            converged: true,
        });
    }
    // Free value i (0-based) is grid index i + 1: term i has it as w, term
    // i + 1 as u.
    let diag: Vec<f64> = (0..n).map(|i| q[i].c + q[i + 1].a).collect();
    let off: Vec<f64> = (0..n - 1).map(|i| q[i + 1].b).collect();
    let mut rhs: Vec<f64> = (0..n).map(|i| -(q[i].e + q[i + 1].d)).collect();
    rhs[0] -= q[0].b * dp.alpha;
    rhs[n - 1] -= q[n].b * dp.beta;
    let free = solve_tridiagonal(&diag, &off, &rhs)?;
    let x = dp.with_free(&free);
    Ok(OracleReport {
        method: Method::Quadratic,
        value: dp.objective(&x),
        argmin: x,
        converged: true,
    })
}

/// `LDLᵀ` elimination for a symmetric tridiagonal system. Rejects systems
/// that are not positive definite.
fn solve_tridiagonal(diag: &[f64], off: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let scale = diag.iter().chain(off).fold(0.0f64, |m, v| m.max(v.abs()));
    let mut d = vec![0.0; n];
    let mut l = vec![0.0; n];
    let mut y = vec![0.0; n];
    for i in 0..n {
        d[i] = diag[i];
        y[i] = rhs[i];
        if i > 0 {
            l[i] = off[i - 1] / d[i - 1];
            d[i] -= l[i] * off[i - 1];
            y[i] -= l[i] * y[i - 1];
        }
        if d[i].abs() <= 1e-13 * scale || scale == 0.0 {
            return Err(Error::Degenerate(format!("stationarity system is singular at row {i}")));
        }
        if d[i] < 0.0 {
            return Err(Error::WrongOracle("objective is not convex".into()));
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        x[i] = y[i] / d[i];
        if i + 1 < n {
            x[i] -= off[i] / d[i] * x[i + 1];
        }
    }
    Ok(x)
}

/// Coordinate descent with a golden-section search per value, restarted from
/// `restarts` seeded points (the first is the linear interpolant). Restarts
/// run on separate threads; the best result is returned.
pub fn solve_generic(dp: &DiscretizedProblem, restarts: usize, seed: u64) -> OracleReport {
    let restarts = restarts.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<Vec<f64>> = (0..restarts).map(|r| start_point(dp, r, rng.random())).collect();
    let results: Vec<(Vec<f64>, f64, bool)> = std::thread::scope(|s| {
        let handles: Vec<_> = starts
            .into_iter()
            .map(|x0| s.spawn(move || descend(dp, x0)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("descent thread panicked")).collect()
    });
    let (argmin, value, converged) = results
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one restart");
    OracleReport {
        method: Method::Generic,
        value,
        argmin,
        converged,
    }
}

fn start_point(dp: &DiscretizedProblem, restart: usize, seed: u64) -> Vec<f64> {
    let (t0, t1) = (dp.grid[0], dp.grid[dp.grid.len() - 1]);
    let span = (t1 - t0).max(f64::MIN_POSITIVE);
    let lin = |t: f64| dp.alpha + (dp.beta - dp.alpha) * (t - t0) / span;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amp = if restart == 0 { 0.0 } else { 1.0 + dp.alpha.abs().max(dp.beta.abs()) };
    let n = dp.grid.len();
    (0..n)
        .map(|k| match k {
            0 => dp.alpha,
            k if k == n - 1 => dp.beta,
            k => lin(dp.grid[k]) + amp * rng.random_range(-1.0..1.0),
        })
        .collect()
}

fn descend(dp: &DiscretizedProblem, mut x: Vec<f64>) -> (Vec<f64>, f64, bool) {
    let n = x.len();
    let mut value = dp.objective(&x);
    if n <= 2 {
        return (x, value, true);
    }
    for _ in 0..MAX_SWEEPS {
        for i in 1..n - 1 {
            let (u, w) = (x[i - 1], x[i + 1]);
            let local = |v: f64| dp.term(i - 1, u, v) + dp.term(i, v, w);
            x[i] = line_minimum(local, x[i]);
        }
        let next = dp.objective(&x);
        let improvement = value - next;
        value = next;
        if improvement <= TOL_SWEEP * value.abs().max(1.0) {
            return (x, value, true);
        }
    }
    (x, value, false)
}

const GOLD: f64 = 0.618_033_988_749_894_9;

/// Brackets a minimum of `f` starting at `x0`, narrows it by golden section
/// and polishes with two parabolic steps.
fn line_minimum(f: impl Fn(f64) -> f64, x0: f64) -> f64 {
    let mut step = 0.1 * x0.abs().max(1.0);
    let (f0, f1) = (f(x0), f(x0 + step));
    let (mut a, mut b, mut fb) = if f1 > f0 {
        step = -step;
        (x0 - step, x0, f0)
    } else {
        (x0, x0 + step, f1)
    };
    let (mut c, mut fc) = (b + step, f(b + step));
    let mut grow = 0;
    while fc < fb && grow < 200 {
        step *= 2.0;
        a = b;
        (b, fb) = (c, fc);
        c = b + step;
        fc = f(c);
        grow += 1;
    }
    if !(fc >= fb) {
        return if fc < fb { c } else { b };
    }
    let (mut lo, mut hi) = if a < c { (a, c) } else { (c, a) };
    let mut p1 = hi - GOLD * (hi - lo);
    let mut p2 = lo + GOLD * (hi - lo);
    let (mut f1, mut f2) = (f(p1), f(p2));
    while hi - lo > 1e-4 * (1.0 + p1.abs()) {
        if f1 < f2 {
            hi = p2;
            (p2, f2) = (p1, f1);
            p1 = hi - GOLD * (hi - lo);
            f1 = f(p1);
        } else {
            lo = p1;
            (p1, f1) = (p2, f2);
            p2 = lo + GOLD * (hi - lo);
            f2 = f(p2);
        }
    }
    let (mut best, mut fbest) = if f1 < f2 { (p1, f1) } else { (p2, f2) };
    for _ in 0..2 {
        let h = 1e-3 * (1.0 + best.abs());
        let (fl, fr) = (f(best - h), f(best + h));
        let curv = fl + fr - 2.0 * fbest;
        if !(curv > 0.0) {
            break;
        }
        let cand = best - 0.5 * h * (fr - fl) / curv;
        let fcand = f(cand);
        if fcand <= fbest {
            (best, fbest) = (cand, fcand);
        }
    }
    best
}

/// A Lagrangian-only view of the problem, for callers that build a
/// discretized problem directly from a grid.
pub fn from_grid(grid: Vec<f64>, alpha: f64, beta: f64, lagrangian: Lagrangian) -> Result<DiscretizedProblem> {
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidProblem("grid needs at least two increasing points".into()));
    }
    Ok(DiscretizedProblem {
        grid,
        alpha,
        beta,
        lagrangian,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::leitmann::{illustrative_problem, linear_shift_case, transport_minimizer, zero_minimizer};
    use crate::timescale::ScaleGenerator;
    use crate::variational::{evaluate_functional, random_admissible};

    fn integers(n: i64) -> TimeScale {
        ScaleGenerator::Integers { a: 0, b: n }.generate().unwrap()
    }

    #[test]
    fn discretize_examples() {
        let p = illustrative_problem(&integers(2), 0.0, 2.0, 0.0, 2.0).unwrap();
        let dp = discretize(&p, 3);
        assert_eq!(dp.grid(), &[0.0, 1.0, 2.0]);
        assert_eq!(dp.free_count(), 1);

        let unit = TimeScale::interval(0.0, 1.0).unwrap();
        let p = illustrative_problem(&unit, 0.0, 1.0, 0.0, 1.0).unwrap();
        assert_eq!(discretize(&p, 0).grid().len(), 65);
        assert_eq!(discretize(&p, 2).grid().len(), 257);

        let mixed = TimeScale::new([Component::Point(0.0), Component::Interval(1.0, 2.0)]).unwrap();
        let p = illustrative_problem(&mixed, 0.0, 2.0, 0.0, 1.0).unwrap();
        let g = discretize(&p, 0).grid().to_vec();
        assert_eq!(g.len(), 66);
        assert_eq!((g[0], g[1], g[65]), (0.0, 1.0, 2.0));
    }

    #[test]
    fn quadratic_on_three_points() {
        let p = illustrative_problem(&integers(2), 0.0, 2.0, 0.0, 2.0).unwrap();
        let r = solve_quadratic(&discretize(&p, 0)).unwrap();
        assert_eq!(r.method, Method::Quadratic);
        assert!((r.argmin[1] - 1.0).abs() < 1e-12);
        assert!((r.value - 6.0).abs() < 1e-12);
        // 2y² - 4y + 8 by hand.
        let dp = discretize(&p, 0);
        for y in [-1.0, 0.0, 0.5, 3.0] {
            assert!((dp.objective(&[0.0, y, 2.0]) - (2.0 * y * y - 4.0 * y + 8.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn quadratic_recovers_linear_minimizer() {
        for n in [2i64, 10, 50, 100] {
            let p = illustrative_problem(&integers(n), 0.0, n as f64, 0.0, n as f64).unwrap();
            let r = solve_quadratic(&discretize(&p, 0)).unwrap();
            for (k, v) in r.argmin.iter().enumerate() {
                assert!((v - k as f64).abs() < 1e-9, "n={n} k={k} v={v}");
            }
        }
    }

    #[test]
    fn quadratic_agrees_with_transport() {
        let scales = [
            ScaleGenerator::HStep { a: 0.0, b: 2.0, h: 0.25 }.generate().unwrap(),
            ScaleGenerator::QScale { q: 2.0, k_min: 0, k_max: 6 }.generate().unwrap(),
        ];
        for ts in scales {
            let (a, b) = (ts.min(), ts.max());
            let p = illustrative_problem(&ts, a, b, 0.0, 1.0).unwrap();
            let pair = linear_shift_case(&p).unwrap();
            let x = transport_minimizer(&pair, &zero_minimizer(&pair)).unwrap();
            let r = solve_quadratic(&discretize(&p, 0)).unwrap();
            for (t, v) in discretize(&p, 0).grid().iter().zip(&r.argmin) {
                assert!((x.eval(*t) - v).abs() < 1e-9);
            }
            assert!((evaluate_functional(&p, &x).unwrap() - r.value).abs() < 1e-9);
        }
    }

    #[test]
    fn trivial_problem_has_zero_solution() {
        let ts = ScaleGenerator::HStep { a: 0.0, b: 1.0, h: 0.1 }.generate().unwrap();
        let p = illustrative_problem(&ts, 0.0, 1.0, 0.0, 1.0)
            .unwrap()
            .with_lagrangian(Lagrangian::new(|_, _, v| v * v))
            .with_boundary(0.0, 0.0);
        let r = solve_quadratic(&discretize(&p, 0)).unwrap();
        assert!(r.argmin.iter().all(|v| v.abs() < 1e-12));
        assert!(r.value.abs() < 1e-12);
    }

    #[test]
    fn quadratic_rejects_other_objectives() {
        let ts = integers(4);
        let p = illustrative_problem(&ts, 0.0, 4.0, 0.0, 1.0).unwrap();
        let quartic = p.with_lagrangian(Lagrangian::new(|_, y, v| v.powi(4) + y * y));
        assert!(matches!(solve_quadratic(&discretize(&quartic, 0)), Err(Error::WrongOracle(_))));
        let concave = p.with_lagrangian(Lagrangian::new(|_, _, v| -v * v));
        assert!(matches!(solve_quadratic(&discretize(&concave, 0)), Err(Error::WrongOracle(_))));
        let flat = p.with_lagrangian(Lagrangian::zero());
        assert!(matches!(solve_quadratic(&discretize(&flat, 0)), Err(Error::Degenerate(_))));
    }

    #[test]
    fn generic_examples() {
        let p = illustrative_problem(&integers(2), 0.0, 2.0, 0.0, 2.0).unwrap();
        let dp = discretize(&p, 0);
        let g = solve_generic(&dp, 4, 7);
        let q = solve_quadratic(&dp).unwrap();
        assert!(g.converged);
        assert!((g.value - q.value).abs() < 1e-8);
        assert!((g.argmin[1] - q.argmin[1]).abs() < 1e-8);

        let ts = TimeScale::from_points(&[0.0, 0.5, 1.0]).unwrap();
        let p = illustrative_problem(&ts, 0.0, 1.0, 0.0, 1.0).unwrap();
        let g = solve_generic(&discretize(&p, 0), 3, 1);
        for (v, e) in g.argmin.iter().zip([0.0, 0.5, 1.0]) {
            assert!((v - e).abs() < 1e-8, "{v}");
        }

        let flat = p.with_lagrangian(Lagrangian::zero());
        let g = solve_generic(&discretize(&flat, 0), 2, 3);
        assert_eq!(g.value, 0.0);
        assert!(g.converged);
    }

    #[test]
    fn generic_handles_non_quadratic() {
        let ts = integers(4);
        let p = illustrative_problem(&ts, 0.0, 4.0, 0.0, 4.0)
            .unwrap()
            .with_lagrangian(Lagrangian::new(|_, _, v| (v - 1.0).powi(4)));
        let g = solve_generic(&discretize(&p, 0), 3, 0);
        assert!(g.value < 1e-12, "{}", g.value);
    }

    #[test]
    fn objective_matches_functional_on_scattered_scales() {
        let scales = [
            integers(10),
            ScaleGenerator::HStep { a: 0.0, b: 2.0, h: 0.25 }.generate().unwrap(),
            ScaleGenerator::QScale { q: 2.0, k_min: 0, k_max: 6 }.generate().unwrap(),
        ];
        for ts in scales {
            let p = illustrative_problem(&ts, ts.min(), ts.max(), 0.5, -1.0).unwrap();
            let dp = discretize(&p, 0);
            for seed in 0..100 {
                let x = random_admissible(&p, seed, 1.0);
                let vals: Vec<f64> = dp.grid().iter().map(|&t| x.eval(t)).collect();
                let lhs = dp.objective(&vals);
                let rhs = evaluate_functional(&p, &x).unwrap();
                assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0), "{lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn refinement_values_track_continuum() {
        // The continuum value comes from the transported linear minimizer;
        // every refinement reproduces it up to rounding.
        let unit = TimeScale::interval(0.0, 1.0).unwrap();
        let p = illustrative_problem(&unit, 0.0, 1.0, 0.0, 1.0).unwrap();
        let pair = linear_shift_case(&p).unwrap();
        let x = transport_minimizer(&pair, &zero_minimizer(&pair)).unwrap();
        let continuum = evaluate_functional(&p, &x).unwrap();
        let errs: Vec<f64> = (0..3)
            .map(|r| (solve_quadratic(&discretize(&p, r)).unwrap().value - continuum).abs())
            .collect();
        assert!(errs.iter().all(|e| *e < 1e-9), "{errs:?}");
    }

    #[test]
    fn report_json_shape() {
        let r = OracleReport {
            method: Method::Generic,
            value: 1.5,
            argmin: vec![0.0, 1.0],
            converged: false,
        };
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["method"], "generic");
        assert_eq!(v["argmin"][1], 1.0);
        assert_eq!(v["converged"], false);
        let back: OracleReport = serde_json::from_value(v).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn trajectory_round_trip() {
        let p = illustrative_problem(&integers(3), 0.0, 3.0, 0.0, 3.0).unwrap();
        let dp = discretize(&p, 0);
        let r = solve_quadratic(&dp).unwrap();
        let x = dp.trajectory(&r.argmin).unwrap();
        assert!((evaluate_functional(&p, &x).unwrap() - r.value).abs() < 1e-12);
    }
}
