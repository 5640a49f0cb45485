//! Invariant suites run by `tsl verify` and by the acceptance target.

use serde::Serialize;

use crate::control::{self, ControlProblem};
use crate::delta::{delta_derivative, delta_derivative_left, delta_integral, ScaleFn};
use crate::error::Result;
use crate::leitmann::{
    illustrative_problem, linear_shift_case_with_fault, transport_minimizer, verify_lemma, zero_minimizer,
    GaugeFault, Tolerances, Verdict, VerificationReport,
};
use crate::timescale::{Component, ScaleGenerator, TimeScale};
use crate::variational::{evaluate_functional, random_admissible};

pub const TOL_FT_DENSE: f64 = 1e-6;
pub const TOL_FT_SCATTERED: f64 = 1e-12;
pub const TOL_ADDITIVITY: f64 = 1e-9;
pub const TOL_LINEARITY: f64 = 1e-9;
/// Cost-gap tolerance for the control invariance suite on scales with dense
/// segments.
pub const TOL_CONTROL_DENSE: f64 = 1e-8;
pub const TOL_CONTROL_SCATTERED: f64 = 1e-12;
/// Perturbation sizes cycled through by the dominance suites.
pub const DOMINANCE_MAGNITUDES: [f64; 3] = [0.1, 1.0, 10.0];
pub const CONTROL_MAGNITUDES: [f64; 3] = [0.1, 0.5, 1.0];
pub const SHIFTS: [f64; 4] = [-1.0, -0.5, 0.5, 1.0];
const DENSE_SAMPLES: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteResult {
    pub suite: String,
    pub pass: bool,
    pub max_error: f64,
    pub tol: f64,
    pub checks: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SuiteResult {
    fn from_errors(suite: &str, tol: f64, errors: Result<Vec<f64>>) -> Self {
        match errors {
            Ok(errs) => {
                let max_error = if errs.iter().any(|e| e.is_nan()) {
                    f64::NAN
                } else {
                    errs.iter().copied().fold(0.0, f64::max)
                };
                Self {
                    suite: suite.into(),
                    pass: max_error <= tol,
                    max_error,
                    tol,
                    checks: errs.len(),
                    error: None,
                }
            }
            Err(e) => Self {
                suite: suite.into(),
                pass: false,
                max_error: f64::NAN,
                tol,
                checks: 0,
                error: Some(e.to_string()),
            },
        }
    }
}

/// The five scales checked by default.
pub fn default_bundle() -> Vec<(String, TimeScale)> {
    let gens = [
        ("integers:0..10", ScaleGenerator::Integers { a: 0, b: 10 }),
        ("hstep:0..2:0.25", ScaleGenerator::HStep { a: 0.0, b: 2.0, h: 0.25 }),
        ("interval:0..1", ScaleGenerator::Union(vec![Component::Interval(0.0, 1.0)])),
        (
            "mixed:{0}+[1,2]",
            ScaleGenerator::Union(vec![Component::Point(0.0), Component::Interval(1.0, 2.0)]),
        ),
        ("qscale:2:0..6", ScaleGenerator::QScale { q: 2.0, k_min: 0, k_max: 6 }),
    ];
    gens.into_iter()
        .map(|(name, g)| (name.to_string(), g.generate().expect("bundled scale")))
        .collect()
}

/// Right-scattered points together with each dense segment's ends and
/// [`DENSE_SAMPLES`] interior samples.
pub fn sample_points(ts: &TimeScale) -> Vec<f64> {
    let mut pts = ts.enumerate_scattered();
    for (lo, hi) in ts.dense_segments() {
        let n = DENSE_SAMPLES + 1;
        pts.extend((0..=n).map(|k| if k == n { hi } else { lo + (hi - lo) * k as f64 / n as f64 }));
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// σ/ρ/μ monotonicity and inverse relations, classification consistency.
/// Every check contributes 0 (holds) or 1 (violated).
pub fn operator_axioms(ts: &TimeScale) -> SuiteResult {
    let run = || -> Result<Vec<f64>> {
        let pts = sample_points(ts);
        let mut out = Vec::new();
        let flag = |ok: bool| if ok { 0.0 } else { 1.0 };
        let mut prev: Option<(f64, f64)> = None;
        for &t in &pts {
            let (s, r, mu) = (ts.sigma(t)?, ts.rho(t)?, ts.graininess(t)?);
            let class = ts.classify(t)?;
            out.push(flag(s >= t && r <= t && mu >= 0.0));
            out.push(flag(class.right_scattered == (mu > 0.0)));
            if s > t {
                out.push(flag(ts.rho(s)? == t));
            }
            if let Some((ps, pr)) = prev {
                out.push(flag(s >= ps && r >= pr));
            }
            prev = Some((s, r));
        }
        out.push(flag(ts.sigma(ts.max())? == ts.max()));
        out.push(flag(ts.rho(ts.min())? == ts.min()));
        Ok(out)
    };
    SuiteResult::from_errors("operator_axioms", 0.0, run())
}

/// Maps `t` to `[0, 1]` over the scale's span so that test functions stay
/// of order one on every scale.
fn unit(ts: &TimeScale) -> impl Fn(f64) -> f64 + Send + Sync + Clone + 'static {
    let (a, b) = (ts.min(), ts.max());
    move |t| (t - a) / (b - a)
}

fn test_polynomials(ts: &TimeScale) -> Vec<ScaleFn> {
    let u = unit(ts);
    let (u1, u2, u3) = (u.clone(), u.clone(), u);
    vec![
        ScaleFn::new(move |t| 2.0 * u1(t) - 1.0),
        ScaleFn::new(move |t| {
            let x = u2(t);
            x * x * x - 2.0 * x + 0.5
        }),
        ScaleFn::new(move |t| {
            let x = u3(t);
            x.powi(4) - x * x
        }),
    ]
}

fn test_functions(ts: &TimeScale) -> Vec<ScaleFn> {
    let u = unit(ts);
    let (u1, u2, u3) = (u.clone(), u.clone(), u);
    vec![
        ScaleFn::new(move |t| {
            let x = u1(t);
            (3.0 * x).sin() + x * x
        }),
        ScaleFn::new(move |t| {
            let x = u2(t);
            (-x).exp() * (2.0 * x).cos()
        }),
        ScaleFn::new(move |t| 1.0 / (1.0 + u3(t).powi(2))),
    ]
}

/// Range ends for the integral checks: every scattered point plus the ends
/// and midpoint of each dense segment.
fn range_points(ts: &TimeScale) -> Vec<f64> {
    let mut pts = ts.enumerate_scattered();
    for (lo, hi) in ts.dense_segments() {
        pts.extend([lo, 0.5 * (lo + hi), hi]);
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

fn derivative_fn(ts: &TimeScale, f: &ScaleFn) -> ScaleFn {
    let (ts1, ts2, f1, f2) = (ts.clone(), ts.clone(), f.clone(), f.clone());
    ScaleFn::new(move |t| delta_derivative(&ts1, &f1, t).unwrap_or(f64::NAN))
        .with_left_limit(move |t| delta_derivative_left(&ts2, &f2, t).unwrap_or(f64::NAN))
}

/// `∫_a^c F^Δ Δt = F(c) - F(a)` for polynomial `F` and every range end `c`.
pub fn fundamental_theorem(ts: &TimeScale) -> SuiteResult {
    let tol = if ts.is_purely_scattered() {
        TOL_FT_SCATTERED
    } else {
        TOL_FT_DENSE
    };
    let run = || -> Result<Vec<f64>> {
        let a = ts.min();
        let mut out = Vec::new();
        for f in test_polynomials(ts) {
            let d = derivative_fn(ts, &f);
            for &c in range_points(ts).iter().skip(1) {
                let lhs = delta_integral(ts, &d, a, c)?;
                out.push((lhs - (f.eval(c) - f.eval(a))).abs());
            }
        }
        Ok(out)
    };
    SuiteResult::from_errors("fundamental_theorem", tol, run())
}

/// `∫_a^c = ∫_a^b + ∫_b^c` for ordered range points `a < b < c`.
pub fn additivity(ts: &TimeScale) -> SuiteResult {
    let run = || -> Result<Vec<f64>> {
        let pts = range_points(ts);
        let n = pts.len();
        let triples = [(0, n / 2, n - 1), (0, 1, n - 1), (0, n - 2, n - 1), (n / 4, n / 2, 3 * n / 4)];
        let mut out = Vec::new();
        for f in test_functions(ts) {
            for &(i, j, k) in &triples {
                if !(i < j && j < k && k < n) {
                    continue;
                }
                let (a, b, c) = (pts[i], pts[j], pts[k]);
                let whole = delta_integral(ts, &f, a, c)?;
                let split = delta_integral(ts, &f, a, b)? + delta_integral(ts, &f, b, c)?;
                out.push((whole - split).abs());
            }
        }
        Ok(out)
    };
    SuiteResult::from_errors("additivity", TOL_ADDITIVITY, run())
}

/// `∫(αf + βg) = α∫f + β∫g`.
pub fn linearity(ts: &TimeScale) -> SuiteResult {
    let run = || -> Result<Vec<f64>> {
        let fs = test_functions(ts);
        let (a, b) = (ts.min(), ts.max());
        let mut out = Vec::new();
        for (i, f) in fs.iter().enumerate() {
            let g = &fs[(i + 1) % fs.len()];
            for (al, be) in [(2.5, -1.25), (-3.0, 0.5)] {
                let (f2, g2) = (f.clone(), g.clone());
                let combo = ScaleFn::new(move |t| al * f2.eval(t) + be * g2.eval(t));
                let lhs = delta_integral(ts, &combo, a, b)?;
                let rhs = al * delta_integral(ts, f, a, b)? + be * delta_integral(ts, g, a, b)?;
                out.push((lhs - rhs).abs());
            }
        }
        Ok(out)
    };
    SuiteResult::from_errors("linearity", TOL_LINEARITY, run())
}

/// On a uniform grid `{a, a + h, …, b}`: the derivative is the forward
/// quotient `(f(t + h) - f(t)) / h` and the integral the sum `Σ h f(t)`,
/// both bit for bit. `None` for scales that are not uniform grids.
pub fn uniform_grid_formulas(ts: &TimeScale) -> Option<SuiteResult> {
    if !ts.is_purely_scattered() {
        return None;
    }
    let pts = ts.enumerate_scattered();
    let h = pts.get(1)? - pts[0];
    if pts.windows(2).any(|w| w[1] - w[0] != h) {
        return None;
    }
    let run = || -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for f in test_functions(ts) {
            let mut sum = 0.0;
            for &t in &pts[..pts.len() - 1] {
                let want = (f.eval(t + h) - f.eval(t)) / h;
                let got = delta_derivative(ts, &f, t)?;
                out.push(if got.to_bits() == want.to_bits() { 0.0 } else { 1.0 });
                sum += h * f.eval(t);
            }
            let got = delta_integral(ts, &f, ts.min(), ts.max())?;
            out.push(if got.to_bits() == sum.to_bits() { 0.0 } else { 1.0 });
        }
        Ok(out)
    };
    Some(SuiteResult::from_errors("uniform_grid_formulas", 0.0, run()))
}

/// The shift pair for `(x^Δ)² + x^σ + t·x^Δ` over the whole scale with
/// `x(min) = 0`, `x(max) = 1`.
pub fn lemma_check(ts: &TimeScale, opts: &VerifyOptions) -> VerificationReport {
    let tol = opts.tolerances(ts);
    let built = illustrative_problem(ts, ts.min(), ts.max(), 0.0, 1.0)
        .and_then(|p| linear_shift_case_with_fault(&p, opts.fault));
    match built {
        Ok(pair) => verify_lemma(&pair, opts.trials, opts.seed, tol.tol_res, tol.tol_gap),
        Err(e) => VerificationReport {
            max_abs_residual: f64::NAN,
            points_checked: 0,
            functional_gap: f64::NAN,
            gap_constant_spread: f64::NAN,
            boundary_gap: f64::NAN,
            boundary_mismatch: f64::NAN,
            trials: 0,
            verdict: Verdict::Fail,
            tolerances: tol,
            error: Some(e.to_string()),
        },
    }
}

/// The transported minimizer is never beaten by random admissible
/// trajectories. Errors are by how much a trajectory undercuts it.
pub fn functional_dominance(ts: &TimeScale, trials: usize, seed: u64) -> SuiteResult {
    let tol = Tolerances::for_scale(ts).tol_res;
    let run = || -> Result<Vec<f64>> {
        let p = illustrative_problem(ts, ts.min(), ts.max(), 0.0, 1.0)?;
        let pair = linear_shift_case_with_fault(&p, None)?;
        let best = evaluate_functional(&p, &transport_minimizer(&pair, &zero_minimizer(&pair))?)?;
        (0..trials as u64)
            .map(|k| {
                let m = DOMINANCE_MAGNITUDES[k as usize % DOMINANCE_MAGNITUDES.len()];
                let x = random_admissible(&p, seed.wrapping_add(k), m);
                Ok((best - evaluate_functional(&p, &x)?).max(0.0))
            })
            .collect()
    };
    SuiteResult::from_errors("functional_dominance", tol, run())
}

/// Up to `count` random feasible controls for `p`, drawing seeds from
/// `seed` onwards. `u₂` is left unperturbed: the box and `x₂(1) = 1` force
/// `u₂ ≡ 1`.
pub fn feasible_controls(p: &ControlProblem, count: usize, seed: u64) -> Result<Vec<control::ControlPair>> {
    let mut out = Vec::with_capacity(count);
    let mut k = 0u64;
    while out.len() < count && k < 4 * count as u64 + 16 {
        let m = CONTROL_MAGNITUDES[k as usize % CONTROL_MAGNITUDES.len()];
        if let Some(u) = control::random_feasible(p, seed.wrapping_add(k), m, 0.0)? {
            out.push(u);
        }
        k += 1;
    }
    Ok(out)
}

fn control_tol(ts: &TimeScale) -> f64 {
    if ts.is_purely_scattered() {
        TOL_CONTROL_SCATTERED
    } else {
        TOL_CONTROL_DENSE
    }
}

/// `cost(u^s) - cost(u) = s² + 2s` for feasible `u` and every `s` in
/// [`SHIFTS`]; also requires the transformed states to solve the dynamics.
pub fn control_invariance(p: &ControlProblem, trials: usize, seed: u64) -> SuiteResult {
    let tol = control_tol(p.scale());
    let run = || -> Result<Vec<f64>> {
        let us = feasible_controls(p, trials, seed)?;
        let mut out = Vec::new();
        for u in &us {
            for r in control::check_invariance_many(p, &SHIFTS, u, tol) {
                if let Some(e) = r.error {
                    return Err(crate::Error::InvalidProblem(e));
                }
                out.push(r.cost_gap_error.max(r.endpoint_residual));
                if !r.pass {
                    out.push(f64::INFINITY);
                }
            }
        }
        if us.len() < trials {
            out.push(f64::INFINITY);
        }
        Ok(out)
    };
    SuiteResult::from_errors("control_invariance", tol, run())
}

/// Random feasible controls never cost less than the invariance solution.
pub fn control_dominance(p: &ControlProblem, trials: usize, seed: u64) -> SuiteResult {
    let tol = control_tol(p.scale());
    let run = || -> Result<Vec<f64>> {
        let sol = control::solve_by_invariance(p)?;
        let us = feasible_controls(p, trials, seed)?;
        let mut out: Vec<f64> = us
            .iter()
            .map(|u| Ok((sol.min_cost - control::cost(p, u)?).max(0.0)))
            .collect::<Result<_>>()?;
        if us.len() < trials {
            out.push(f64::INFINITY);
        }
        Ok(out)
    };
    SuiteResult::from_errors("control_dominance", tol, run())
}

#[derive(Clone, Copy, Debug)]
pub struct VerifyOptions {
    pub trials: usize,
    pub seed: u64,
    pub tol_res: Option<f64>,
    pub tol_gap: Option<f64>,
    pub fault: Option<GaugeFault>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            trials: 100,
            seed: 0,
            tol_res: None,
            tol_gap: None,
            fault: None,
        }
    }
}

impl VerifyOptions {
    pub fn tolerances(&self, ts: &TimeScale) -> Tolerances {
        let d = Tolerances::for_scale(ts);
        Tolerances {
            tol_res: self.tol_res.unwrap_or(d.tol_res),
            tol_gap: self.tol_gap.unwrap_or(d.tol_gap),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScaleVerification {
    pub name: String,
    pub pass: bool,
    pub suites: Vec<SuiteResult>,
    pub lemma: VerificationReport,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyOutcome {
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fault: Option<GaugeFault>,
    pub scales: Vec<ScaleVerification>,
}

/// Every suite on one scale. Control suites run when the scale contains 0
/// and 1.
pub fn verify_scale(name: &str, ts: &TimeScale, opts: &VerifyOptions) -> ScaleVerification {
    let mut suites = vec![operator_axioms(ts), fundamental_theorem(ts), additivity(ts), linearity(ts)];
    suites.extend(uniform_grid_formulas(ts));
    suites.push(functional_dominance(ts, opts.trials, opts.seed));
    if let Ok(p) = ControlProblem::shipped(ts) {
        suites.push(control_invariance(&p, opts.trials, opts.seed));
        suites.push(control_dominance(&p, opts.trials, opts.seed));
    }
    let lemma = lemma_check(ts, opts);
    let pass = suites.iter().all(|s| s.pass) && lemma.verdict == Verdict::Pass;
    ScaleVerification {
        name: name.into(),
        pass,
        suites,
        lemma,
    }
}

pub fn verify_all(scales: &[(String, TimeScale)], opts: &VerifyOptions) -> VerifyOutcome {
    let scales: Vec<ScaleVerification> = scales.iter().map(|(n, ts)| verify_scale(n, ts, opts)).collect();
    VerifyOutcome {
        pass: scales.iter().all(|s| s.pass),
        fault: opts.fault,
        scales,
    }
}
