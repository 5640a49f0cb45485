//! Leitmann's direct method on time scales.
//!
//! A [`LeitmannPair`] ties an original problem to a transformed one through
//! `x = z(t, x̃)`. When the Lagrangians differ by the delta derivative of a
//! gauge `g(t) = G(t, x̃(t))`, the two functionals differ by the boundary
//! constant `G(b, x̃(b)) - G(a, x̃(a))`, so a minimizer of the transformed
//! problem maps to a minimizer of the original one. [`verify_lemma`] checks
//! the pointwise identity and the constant gap numerically on random
//! admissible trajectories.

use std::fmt;
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::delta::derivative_by;
use crate::error::{Error, Result};
use crate::quadrature::Side;
use crate::timescale::TimeScale;
use crate::variational::{
    check_admissible, evaluate_functional, random_admissible, Lagrangian, Trajectory,
    VariationalProblem, TOL_ADMISSIBLE,
};

/// Residual tolerance on scales with dense segments.
pub const TOL_RES_DENSE: f64 = 1e-8;
/// Residual tolerance on purely scattered scales.
pub const TOL_RES_SCATTERED: f64 = 1e-12;
pub const TOL_GAP: f64 = 1e-8;
/// Interior samples per dense segment when checking the identity.
pub const DENSE_SAMPLES: usize = 64;
/// Perturbation size of the random admissible trajectories used by
/// [`verify_lemma`].
pub const TRIAL_MAGNITUDE: f64 = 1.0;

pub type Rule2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// `x = z(t, x̃)`, its inverse, and the gauge `G(t, x̃)`.
#[derive(Clone)]
pub struct Transformation {
    z: Rule2,
    z_inv: Rule2,
    gauge: Rule2,
}

impl fmt::Debug for Transformation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Transformation")
    }
}

impl Transformation {
    pub fn new(
        z: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        z_inv: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        gauge: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            z: Arc::new(z),
            z_inv: Arc::new(z_inv),
            gauge: Arc::new(gauge),
        }
    }

    pub fn identity() -> Self {
        Self::new(|_, x| x, |_, x| x, |_, _| 0.0)
    }

    pub fn z(&self, t: f64, xt: f64) -> f64 {
        (self.z)(t, xt)
    }

    pub fn z_inv(&self, t: f64, x: f64) -> f64 {
        (self.z_inv)(t, x)
    }

    pub fn gauge(&self, t: f64, xt: f64) -> f64 {
        (self.gauge)(t, xt)
    }

    /// Largest round-trip error of `z ∘ z_inv` and `z_inv ∘ z` over the samples.
    pub fn inverse_error(&self, samples: &[(f64, f64)]) -> f64 {
        samples
            .iter()
            .map(|&(t, v)| {
                let e1 = (self.z(t, self.z_inv(t, v)) - v).abs();
                let e2 = (self.z_inv(t, self.z(t, v)) - v).abs();
                e1.max(e2)
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct LeitmannPair {
    original: VariationalProblem,
    transformed: VariationalProblem,
    transform: Transformation,
}

impl LeitmannPair {
    pub fn new(
        original: VariationalProblem,
        transformed: VariationalProblem,
        transform: Transformation,
    ) -> Result<Self> {
        if original.scale() != transformed.scale()
            || original.a() != transformed.a()
            || original.b() != transformed.b()
        {
            return Err(Error::InconsistentTransformation(
                "original and transformed problems must share [a, b] and the time scale".into(),
            ));
        }
        let (a, b) = (original.a(), original.b());
        let ta = transform.z_inv(a, original.alpha());
        let tb = transform.z_inv(b, original.beta());
        if !((ta - transformed.alpha()).abs() <= TOL_ADMISSIBLE
            && (tb - transformed.beta()).abs() <= TOL_ADMISSIBLE)
        {
            return Err(Error::InconsistentTransformation(format!(
                "transformed boundary values ({}, {}) differ from z_inv images ({ta}, {tb})",
                transformed.alpha(),
                transformed.beta()
            )));
        }
        let mut samples = Vec::new();
        for t in [a, 0.5 * (a + b), b] {
            let t = original.scale().canonical(t).unwrap_or(a);
            for v in [original.alpha(), original.beta(), 0.0, 1.0, -1.0, 10.0, -10.0] {
                samples.push((t, v));
            }
        }
        let err = transform.inverse_error(&samples);
        if !(err <= TOL_ADMISSIBLE) {
            return Err(Error::InconsistentTransformation(format!(
                "z and z_inv are not mutually inverse (error {err})"
            )));
        }
        Ok(Self {
            original,
            transformed,
            transform,
        })
    }

    pub fn original(&self) -> &VariationalProblem {
        &self.original
    }

    pub fn transformed(&self) -> &VariationalProblem {
        &self.transformed
    }

    pub fn transform(&self) -> &Transformation {
        &self.transform
    }

    fn scale(&self) -> &TimeScale {
        self.original.scale()
    }

    /// `G(b, x̃(b)) - G(a, x̃(a))` with `x̃(a) = z_inv(a, α)`, `x̃(b) = z_inv(b, β)`.
    pub fn boundary_gap(&self) -> f64 {
        let (a, b) = (self.original.a(), self.original.b());
        let xa = self.transform.z_inv(a, self.original.alpha());
        let xb = self.transform.z_inv(b, self.original.beta());
        self.transform.gauge(b, xb) - self.transform.gauge(a, xa)
    }

    fn push_forward(&self, xt: &Trajectory) -> Trajectory {
        let z = self.transform.z.clone();
        xt.map(move |t, v| z(t, v))
    }

    /// Points where the identity is checked: the right-scattered points of
    /// `[a, b]^κ` and evenly spaced interior samples on each dense segment.
    pub fn check_points(&self) -> Vec<f64> {
        let ts = self.scale();
        let mut pts: Vec<f64> = ts
            .enumerate_scattered()
            .into_iter()
            .filter(|&t| ts.sigma(t).is_ok_and(|s| s > t))
            .collect();
        for (lo, hi) in ts.dense_segments() {
            let n = DENSE_SAMPLES + 1;
            pts.extend((1..n).map(|k| lo + (hi - lo) * k as f64 / n as f64));
        }
        pts.sort_by(f64::total_cmp);
        pts
    }
}

fn residual_at(pair: &LeitmannPair, xt: &Trajectory, x: &Trajectory, t: f64) -> Result<f64> {
    let ts = pair.scale();
    let corners = xt.corners();
    let s = ts.sigma(t)?;
    let lhs = pair.original.lagrangian().eval(t, x.eval(s), x.delta(t)?);
    let rhs = pair
        .transformed
        .lagrangian()
        .eval(t, xt.eval(s), xt.delta(t)?);
    let g = &pair.transform.gauge;
    let g_delta = derivative_by(ts, |u| Ok(g(u, xt.eval(u))), &corners, t, Side::At)?;
    Ok(lhs - rhs - g_delta)
}

/// `L(t, x^σ, x^Δ) - L̃(t, x̃^σ, x̃^Δ) - g^Δ(t)` with `x = z(·, x̃)` and
/// `g(t) = G(t, x̃(t))` differentiated as a single function.
pub fn identity_residual(pair: &LeitmannPair, xt: &Trajectory, t: f64) -> Result<f64> {
    let x = pair.push_forward(xt);
    residual_at(pair, xt, &x, t)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    pub tol_res: f64,
    pub tol_gap: f64,
}

impl Tolerances {
    /// Defaults for the given scale: tighter on purely scattered scales.
    pub fn for_scale(ts: &TimeScale) -> Self {
        Self {
            tol_res: if ts.is_purely_scattered() {
                TOL_RES_SCATTERED
            } else {
                TOL_RES_DENSE
            },
            tol_gap: TOL_GAP,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationReport {
    pub max_abs_residual: f64,
    pub points_checked: usize,
    /// Mean of `𝓛[x] - 𝓛̃[x̃]` over the trials.
    pub functional_gap: f64,
    /// Max minus min of `𝓛[x] - 𝓛̃[x̃]` over the trials.
    pub gap_constant_spread: f64,
    pub boundary_gap: f64,
    /// Largest `|𝓛[x] - 𝓛̃[x̃] - boundary_gap|` over the trials.
    pub boundary_mismatch: f64,
    pub trials: usize,
    pub verdict: Verdict,
    pub tolerances: Tolerances,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

struct Trial {
    max_res: f64,
    points: usize,
    gap: f64,
}

fn run_trial(pair: &LeitmannPair, pts: &[f64], seed: u64) -> Result<Trial> {
    let xt = random_admissible(&pair.transformed, seed, TRIAL_MAGNITUDE);
    let x = pair.push_forward(&xt);
    let mut max_res: f64 = 0.0;
    for &t in pts {
        max_res = max_res.max(residual_at(pair, &xt, &x, t)?.abs());
    }
    let gap = evaluate_functional(&pair.original, &x)? - evaluate_functional(&pair.transformed, &xt)?;
    Ok(Trial {
        max_res,
        points: pts.len(),
        gap,
    })
}

/// Samples `trials` random admissible `x̃` and checks the pointwise identity
/// and the constant functional gap. Never fails: evaluation errors end up in
/// the report with a failing verdict.
pub fn verify_lemma(
    pair: &LeitmannPair,
    trials: usize,
    seed: u64,
    tol_res: f64,
    tol_gap: f64,
) -> VerificationReport {
    let tolerances = Tolerances { tol_res, tol_gap };
    let pts = pair.check_points();
    let boundary_gap = pair.boundary_gap();
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    let results: Result<Vec<Trial>> = (0..trials.max(1))
        .map(|_| run_trial(pair, &pts, seeds.next_u64()))
        .collect();

    match results {
        Ok(rs) => {
            let max_abs_residual = rs.iter().map(|r| r.max_res).fold(0.0, f64::max);
            let points_checked = rs.iter().map(|r| r.points).sum();
            let gaps: Vec<f64> = rs.iter().map(|r| r.gap).collect();
            let lo = gaps.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let functional_gap = gaps.iter().sum::<f64>() / gaps.len() as f64;
            let boundary_mismatch = gaps
                .iter()
                .map(|g| (g - boundary_gap).abs())
                .fold(0.0, f64::max);
            let gap_constant_spread = hi - lo;
            let ok = max_abs_residual <= tol_res
                && gap_constant_spread <= tol_gap
                && boundary_mismatch <= tol_gap;
            VerificationReport {
                max_abs_residual,
                points_checked,
                functional_gap,
                gap_constant_spread,
                boundary_gap,
                boundary_mismatch,
                trials: rs.len(),
                verdict: if ok { Verdict::Pass } else { Verdict::Fail },
                tolerances,
                error: None,
            }
        }
        Err(e) => VerificationReport {
            max_abs_residual: f64::NAN,
            points_checked: 0,
            functional_gap: f64::NAN,
            gap_constant_spread: f64::NAN,
            boundary_gap,
            boundary_mismatch: f64::NAN,
            trials: 0,
            verdict: Verdict::Fail,
            tolerances,
            error: Some(e.to_string()),
        },
    }
}

/// `x* = z(t, x̃*)`, checked for admissibility in the original problem.
pub fn transport_minimizer(pair: &LeitmannPair, xt_star: &Trajectory) -> Result<Trajectory> {
    let pre = check_admissible(&pair.transformed, xt_star, TOL_ADMISSIBLE);
    if !pre.admissible {
        return Err(Error::InvalidProblem(format!(
            "x̃* is not admissible for the transformed problem: {:?}",
            pre.violations
        )));
    }
    let x = pair.push_forward(xt_star);
    let post = check_admissible(&pair.original, &x, TOL_ADMISSIBLE);
    if !post.admissible {
        return Err(Error::InconsistentTransformation(format!(
            "image of x̃* violates the original boundary conditions: {:?}",
            post.violations
        )));
    }
    Ok(x)
}

/// Minimize `∫ ((x^Δ)² + x^σ + t·x^Δ) Δt`, `x(a) = α`, `x(b) = β`.
pub fn illustrative_problem(
    ts: &TimeScale,
    a: f64,
    b: f64,
    alpha: f64,
    beta: f64,
) -> Result<VariationalProblem> {
    VariationalProblem::new(ts, a, b, alpha, beta, illustrative_lagrangian())
}

pub fn illustrative_lagrangian() -> Lagrangian {
    Lagrangian::new(|t, y, v| v * v + y + t * v).with_partials(|_, _, _| 1.0, |t, _, v| 2.0 * v + t)
}

/// The shift `x = x̃ + c·t + d` that carries zero boundary values to `(α, β)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinearShift {
    pub c: f64,
    pub d: f64,
}

impl LinearShift {
    pub fn solve(a: f64, b: f64, alpha: f64, beta: f64) -> Result<Self> {
        if a == b {
            return Err(Error::DegenerateInterval(a));
        }
        Ok(Self {
            c: (alpha - beta) / (a - b),
            d: (beta * a - b * alpha) / (a - b),
        })
    }

    /// `G(t, x̃) = 2c·x̃ + t·x̃ + c·t² + (c² + d)·t`.
    pub fn gauge(&self, t: f64, xt: f64) -> f64 {
        let LinearShift { c, d } = *self;
        2.0 * c * xt + t * xt + c * t * t + (c * c + d) * t
    }
}

/// Deliberate gauge corruptions used to show the verifier is not vacuous.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GaugeFault {
    /// Drops the `c·t²` term.
    #[serde(rename = "drop-gauge-term")]
    DropQuadraticTerm,
}

/// Builds the pair for the `(x^Δ)² + x^σ + t·x^Δ` family: the transformed
/// problem is `∫ (x̃^Δ)² Δt` with zero boundary values.
pub fn linear_shift_case(p: &VariationalProblem) -> Result<LeitmannPair> {
    linear_shift_case_with_fault(p, None)
}

pub fn linear_shift_case_with_fault(
    p: &VariationalProblem,
    fault: Option<GaugeFault>,
) -> Result<LeitmannPair> {
    let probe = [
        (p.a(), 0.0, 0.0),
        (p.b(), 1.0, -2.0),
        (0.5, -3.0, 4.0),
        (2.0, 7.5, 0.25),
    ];
    let reference = illustrative_lagrangian();
    for (t, y, v) in probe {
        let want = reference.eval(t, y, v);
        let got = p.lagrangian().eval(t, y, v);
        if !((got - want).abs() <= 1e-12 * want.abs().max(1.0)) {
            return Err(Error::NotLinearShiftFamily);
        }
    }
    let shift = LinearShift::solve(p.a(), p.b(), p.alpha(), p.beta())?;
    let LinearShift { c, d } = shift;
    let transform = match fault {
        None => Transformation::new(
            move |t, xt| xt + c * t + d,
            move |t, x| x - c * t - d,
            move |t, xt| shift.gauge(t, xt),
        ),
        Some(GaugeFault::DropQuadraticTerm) => Transformation::new(
            move |t, xt| xt + c * t + d,
            move |t, x| x - c * t - d,
            move |t, xt| shift.gauge(t, xt) - c * t * t,
        ),
    };
    let transformed = p
        .with_lagrangian(Lagrangian::new(|_, _, v| v * v))
        .with_boundary(0.0, 0.0);
    LeitmannPair::new(p.clone(), transformed, transform)
}

/// `x̃* ≡ 0`, the minimizer of `∫ (x̃^Δ)² Δt` with zero boundary values.
pub fn zero_minimizer(pair: &LeitmannPair) -> Trajectory {
    Trajectory::from_fn(pair.transformed().scale(), |_| 0.0)
}
