//! Optimal control on a time scale, solved through a variational symmetry.
//!
//! The shipped problem minimizes `∫_0^1 (u₁² + u₂²) Δt` subject to
//! `x₁^Δ = exp(u₁) + u₁ + u₂`, `x₂^Δ = u₂`, `x(0) = (0, 0)`, `x(1) = (2, 1)`
//! and `u₁, u₂ ∈ [-1, 1]`. The one-parameter family
//! `x₁^s = x₁ + s·t`, `x₂^s = x₂ + s·t`, `u₂^s = u₂ + s` leaves the dynamics
//! unchanged and shifts the cost by `s² + 2s·x₂(1)`. For `s = -1` zero
//! controls become admissible, which pins down the absolute minimizer.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::delta::{delta_integral, derivative_by, Rule, ScaleFn};
use crate::error::{Error, Result};
use crate::export::write_row;
use crate::quadrature::{adaptive_simpson, Side, TOL_QUAD};
use crate::timescale::{Component, TimeScale};
use crate::variational::{Trajectory, N_DENSE};

/// Interior samples per dense segment for pointwise checks.
pub const DENSE_SAMPLES: usize = 64;
/// Tolerance on the consistency of the two endpoint equations for `s`.
pub const TOL_S: f64 = 1e-9;

pub type ControlRule = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct ControlProblem {
    scale: TimeScale,
    running_cost: ControlRule,
    dyn1: ControlRule,
    dyn2: ControlRule,
    x1_end: f64,
    x2_end: f64,
    u1_box: (f64, f64),
    u2_box: (f64, f64),
}

impl fmt::Debug for ControlProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControlProblem")
            .field("scale", &self.scale)
            .field("x1_end", &self.x1_end)
            .field("x2_end", &self.x2_end)
            .field("u1_box", &self.u1_box)
            .field("u2_box", &self.u2_box)
            .finish()
    }
}

fn shipped_cost(u1: f64, u2: f64) -> f64 {
    u1 * u1 + u2 * u2
}

fn shipped_dyn1(u1: f64, u2: f64) -> f64 {
    u1.exp() + u1 + u2
}

fn shipped_dyn2(_u1: f64, u2: f64) -> f64 {
    u2
}

impl ControlProblem {
    /// The shipped problem on `[0, 1] ∩ ts`.
    pub fn shipped(ts: &TimeScale) -> Result<Self> {
        Self::new(
            ts,
            Arc::new(shipped_cost),
            Arc::new(shipped_dyn1),
            Arc::new(shipped_dyn2),
            (2.0, 1.0),
            (-1.0, 1.0),
        )
    }

    /// General constructor: `dyn1`, `dyn2` and `running_cost` take `(u₁, u₂)`;
    /// both states start at 0 and must reach `end` at `t = 1`.
    pub fn new(
        ts: &TimeScale,
        running_cost: ControlRule,
        dyn1: ControlRule,
        dyn2: ControlRule,
        end: (f64, f64),
        control_box: (f64, f64),
    ) -> Result<Self> {
        if !(ts.contains(0.0) && ts.contains(1.0)) {
            return Err(Error::InvalidProblem("time scale must contain 0 and 1".into()));
        }
        if !(control_box.0 <= control_box.1) {
            return Err(Error::InvalidProblem(format!("control box {control_box:?} is not ordered")));
        }
        Ok(Self {
            scale: ts.restrict(0.0, 1.0)?,
            running_cost,
            dyn1,
            dyn2,
            x1_end: end.0,
            x2_end: end.1,
            u1_box: control_box,
            u2_box: control_box,
        })
    }

    pub fn with_endpoints(&self, x1_end: f64, x2_end: f64) -> Self {
        Self {
            x1_end,
            x2_end,
            ..self.clone()
        }
    }

    pub fn scale(&self) -> &TimeScale {
        &self.scale
    }

    pub fn endpoints(&self) -> (f64, f64) {
        (self.x1_end, self.x2_end)
    }

    pub fn u1_box(&self) -> (f64, f64) {
        self.u1_box
    }

    pub fn u2_box(&self) -> (f64, f64) {
        self.u2_box
    }

    fn is_shipped(&self) -> bool {
        let samples = [(0.0, 0.0), (0.3, -0.7), (-1.0, 1.0), (0.9, 0.2), (-0.4, -1.0)];
        samples.iter().all(|&(u1, u2)| {
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-14 * b.abs().max(1.0);
            close((self.running_cost)(u1, u2), shipped_cost(u1, u2))
                && close((self.dyn1)(u1, u2), shipped_dyn1(u1, u2))
                && close((self.dyn2)(u1, u2), shipped_dyn2(u1, u2))
        })
    }

    /// Right-scattered points of `[0, 1]^κ` plus each dense segment's ends
    /// and [`DENSE_SAMPLES`] interior samples.
    pub fn check_points(&self) -> Vec<f64> {
        let ts = &self.scale;
        let mut pts: Vec<f64> = ts
            .enumerate_scattered()
            .into_iter()
            .filter(|&t| ts.sigma(t).is_ok_and(|s| s > t))
            .collect();
        for (lo, hi) in ts.dense_segments() {
            let n = DENSE_SAMPLES + 1;
            pts.extend((0..=n).map(|k| if k == n { hi } else { lo + (hi - lo) * k as f64 / n as f64 }));
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }
}

#[derive(Clone, Debug)]
pub struct ControlPair {
    pub u1: ScaleFn,
    pub u2: ScaleFn,
}

impl ControlPair {
    pub fn new(u1: ScaleFn, u2: ScaleFn) -> Self {
        Self { u1, u2 }
    }

    pub fn constant(u1: f64, u2: f64) -> Self {
        Self::new(ScaleFn::constant(u1), ScaleFn::constant(u2))
    }

    fn breaks(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.u1.breaks().iter().chain(self.u2.breaks()).copied().collect();
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    fn at(&self, t: f64, side: Side) -> (f64, f64) {
        match side {
            Side::At => (self.u1.eval(t), self.u2.eval(t)),
            Side::Left => (self.u1.eval_left(t), self.u2.eval_left(t)),
        }
    }

    fn through(&self, rule: &ControlRule) -> ScaleFn {
        let (u, ul, r, rl) = (self.clone(), self.clone(), rule.clone(), rule.clone());
        ScaleFn::new(move |t| {
            let (a, b) = u.at(t, Side::At);
            r(a, b)
        })
        .with_left_limit(move |t| {
            let (a, b) = ul.at(t, Side::Left);
            rl(a, b)
        })
        .with_breaks(self.breaks())
    }
}

struct DenseState {
    cuts: Vec<f64>,
    base: Vec<[f64; 2]>,
    panels: usize,
    right_scattered: bool,
}

struct StateTable {
    points: Vec<(f64, [f64; 2])>,
    dense: Vec<DenseState>,
    u: ControlPair,
    dyn1: ControlRule,
    dyn2: ControlRule,
}

impl StateTable {
    fn flow(&self, t: f64, side: Side) -> [f64; 2] {
        let (a, b) = self.u.at(t, side);
        [(self.dyn1)(a, b), (self.dyn2)(a, b)]
    }

    fn eval(&self, t: f64) -> [f64; 2] {
        if let Ok(i) = self.points.binary_search_by(|p| p.0.total_cmp(&t)) {
            return self.points[i].1;
        }
        for d in &self.dense {
            let (lo, hi) = (d.cuts[0], d.cuts[d.cuts.len() - 1]);
            if t < lo || t > hi {
                continue;
            }
            let k = d.cuts.partition_point(|&c| c <= t).clamp(1, d.cuts.len() - 1) - 1;
            let start = d.cuts[k];
            let right = if t == hi && d.right_scattered { Side::Left } else { Side::At };
            let inc = simpson2(|s, side| self.flow(s, side), start, t, right, d.panels);
            return [d.base[k][0] + inc[0], d.base[k][1] + inc[1]];
        }
        [f64::NAN; 2]
    }
}

type Joint = Arc<dyn Fn(f64) -> [f64; 2] + Send + Sync>;

/// Composite Simpson for both state components at once.
fn simpson2(f: impl Fn(f64, Side) -> [f64; 2], lo: f64, hi: f64, right: Side, panels: usize) -> [f64; 2] {
    if hi == lo {
        return [0.0; 2];
    }
    let n = panels + panels % 2;
    let h = (hi - lo) / n as f64;
    let (a, b) = (f(lo, Side::At), f(hi, right));
    let mut acc = [a[0] + b[0], a[1] + b[1]];
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        let v = f(lo + k as f64 * h, Side::At);
        acc[0] += w * v[0];
        acc[1] += w * v[1];
    }
    [h / 3.0 * acc[0], h / 3.0 * acc[1]]
}

/// State trajectories produced by [`simulate`] (or transformed by
/// [`s_transform`]).
#[derive(Clone)]
pub struct States {
    pub x1: ScaleFn,
    pub x2: ScaleFn,
    joint: Joint,
}

impl fmt::Debug for States {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("States").field("x1", &self.x1).field("x2", &self.x2).finish()
    }
}

impl States {
    fn from_joint(joint: Joint) -> Self {
        let (j1, j2) = (joint.clone(), joint.clone());
        Self {
            x1: ScaleFn::new(move |t| j1(t)[0]),
            x2: ScaleFn::new(move |t| j2(t)[1]),
            joint,
        }
    }

    /// Both states at `t`, computed together.
    pub fn eval(&self, t: f64) -> [f64; 2] {
        (self.joint)(t)
    }

    /// Caches every evaluation; for repeated derivative checks.
    pub fn memoized(&self) -> Self {
        let inner = self.joint.clone();
        let cache: Mutex<HashMap<u64, [f64; 2]>> = Mutex::new(HashMap::new());
        Self::from_joint(Arc::new(move |t: f64| {
            if let Some(v) = cache.lock().expect("state cache").get(&t.to_bits()) {
                return *v;
            }
            let v = inner(t);
            cache.lock().expect("state cache").insert(t.to_bits(), v);
            v
        }))
    }
}

/// Propagates the state from `x(0) = (0, 0)`: exact recurrence
/// `x(σ(t)) = x(t) + μ(t)·f(u(t))` on right-scattered points, and on dense
/// segments `x(t) = x(lo) + ∫_lo^t f(u)` by composite Simpson with a panel
/// count fixed per segment, so that `x` is smooth in `t`.
pub fn simulate(p: &ControlProblem, u: &ControlPair) -> Result<States> {
    let ts = p.scale();
    let breaks = u.breaks();
    let mut state = [0.0f64, 0.0f64];
    let mut points = Vec::new();
    let mut dense = Vec::new();
    let flow = |t: f64, side: Side| {
        let (a, b) = u.at(t, side);
        [(p.dyn1)(a, b), (p.dyn2)(a, b)]
    };
    for c in ts.components() {
        let right_end = match *c {
            Component::Point(t) => {
                points.push((t, state));
                t
            }
            Component::Interval(lo, hi) => {
                let right_scattered = ts.sigma(hi)? > hi;
                let mut cuts = vec![lo];
                cuts.extend(breaks.iter().copied().filter(|&b| b > lo && b < hi));
                cuts.push(hi);
                let mut panels = 2;
                for w in cuts.windows(2) {
                    let side = if w[1] < hi || right_scattered { Side::Left } else { Side::At };
                    for j in 0..2 {
                        let (_, n) = adaptive_simpson(|s, sd| Ok(flow(s, sd)[j]), w[0], w[1], side, TOL_QUAD)?;
                        panels = panels.max(n);
                    }
                }
                let mut base = Vec::with_capacity(cuts.len() - 1);
                for w in cuts.windows(2) {
                    base.push(state);
                    let side = if w[1] < hi || right_scattered { Side::Left } else { Side::At };
                    let inc = simpson2(flow, w[0], w[1], side, panels);
                    state = [state[0] + inc[0], state[1] + inc[1]];
                }
                if right_scattered {
                    points.push((hi, state));
                }
                dense.push(DenseState {
                    cuts,
                    base,
                    panels,
                    right_scattered,
                });
                hi
            }
        };
        let mu = ts.sigma(right_end)? - right_end;
        if mu > 0.0 {
            let f = flow(right_end, Side::At);
            state = [state[0] + mu * f[0], state[1] + mu * f[1]];
        }
    }
    let table = Arc::new(StateTable {
        points,
        dense,
        u: u.clone(),
        dyn1: p.dyn1.clone(),
        dyn2: p.dyn2.clone(),
    });
    Ok(States::from_joint(Arc::new(move |t| table.eval(t))))
}

/// `∫_0^1 cost(u₁, u₂) Δt`.
pub fn cost(p: &ControlProblem, u: &ControlPair) -> Result<f64> {
    delta_integral(p.scale(), &u.through(&p.running_cost), 0.0, 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControlViolation {
    Box { t: f64, control: u8, value: f64 },
    Endpoint { state: u8, expected: f64, got: f64 },
    Evaluation { message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub endpoint: [f64; 2],
    pub violations: Vec<ControlViolation>,
}

/// Box constraints on every check point and terminal conditions within `tol`.
pub fn feasible(p: &ControlProblem, u: &ControlPair, tol: f64) -> FeasibilityReport {
    let mut violations = Vec::new();
    for t in p.check_points() {
        for (k, v, (lo, hi)) in [(1u8, u.u1.eval(t), p.u1_box), (2u8, u.u2.eval(t), p.u2_box)] {
            if !(v >= lo - tol && v <= hi + tol) {
                violations.push(ControlViolation::Box { t, control: k, value: v });
            }
        }
    }
    let endpoint = match simulate(p, u) {
        Ok(x) => [x.x1.eval(1.0), x.x2.eval(1.0)],
        Err(e) => {
            violations.push(ControlViolation::Evaluation {
                message: e.to_string(),
            });
            [f64::NAN; 2]
        }
    };
    for (k, got, expected) in [(1u8, endpoint[0], p.x1_end), (2u8, endpoint[1], p.x2_end)] {
        if !((got - expected).abs() <= tol) {
            violations.push(ControlViolation::Endpoint {
                state: k,
                expected,
                got,
            });
        }
    }
    FeasibilityReport {
        feasible: violations.is_empty(),
        endpoint,
        violations,
    }
}

/// One member of the invariance family: the transformed endpoint data and
/// control boxes for parameter `s`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SParamFamily {
    pub s: f64,
    pub x1_end: f64,
    pub x2_end: f64,
    pub u1_box: (f64, f64),
    pub u2_box: (f64, f64),
}

impl SParamFamily {
    pub fn new(p: &ControlProblem, s: f64) -> Self {
        Self {
            s,
            x1_end: p.x1_end + s,
            x2_end: p.x2_end + s,
            u1_box: p.u1_box,
            u2_box: (p.u2_box.0 + s, p.u2_box.1 + s),
        }
    }

    /// The transformed problem. Dynamics and cost are unchanged.
    pub fn problem(&self, p: &ControlProblem) -> ControlProblem {
        ControlProblem {
            x1_end: self.x1_end,
            x2_end: self.x2_end,
            u1_box: self.u1_box,
            u2_box: self.u2_box,
            ..p.clone()
        }
    }
}

/// `u₁^s = u₁`, `u₂^s = u₂ + s`, `x₁^s = x₁ + s·t`, `x₂^s = x₂ + s·t`.
pub fn s_transform(s: f64, u: &ControlPair, x: &States) -> (ControlPair, States) {
    let (g, gl) = (u.u2.clone(), u.u2.clone());
    let u2 = ScaleFn::new(move |t| g.eval(t) + s)
        .with_left_limit(move |t| gl.eval_left(t) + s)
        .with_breaks(u.u2.breaks().to_vec());
    let inner = x.joint.clone();
    let states = States::from_joint(Arc::new(move |t| {
        let v = inner(t);
        [v[0] + s * t, v[1] + s * t]
    }));
    (ControlPair::new(u.u1.clone(), u2), states)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub s: f64,
    pub cost: f64,
    pub cost_transformed: f64,
    pub cost_gap: f64,
    /// `s² + 2s·x₂(1)`, i.e. `s² + 2s` for the shipped endpoint data.
    pub expected_gap: f64,
    pub cost_gap_error: f64,
    /// Largest `|(x_i^s)^Δ - f_i(u^s)|` over the check points.
    pub dynamics_residual: f64,
    /// Largest mismatch of `x^s(1)` against the transformed endpoint data.
    pub endpoint_residual: f64,
    pub points_checked: usize,
    pub precondition_met: bool,
    pub pass: bool,
    pub tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Checks that the `s`-transformation shifts the cost by `s² + 2s·x₂(1)` and
/// maps trajectories of the control system to trajectories of the same
/// system. `u` should be feasible for the original problem; the report
/// records whether it is.
pub fn check_invariance(p: &ControlProblem, s: f64, u: &ControlPair, tol: f64) -> InvarianceReport {
    check_invariance_many(p, &[s], u, tol).remove(0)
}

/// [`check_invariance`] for several `s` at once, simulating `u` only once.
pub fn check_invariance_many(p: &ControlProblem, shifts: &[f64], u: &ControlPair, tol: f64) -> Vec<InvarianceReport> {
    let pre = feasible(p, u, tol.max(1e-9)).feasible;
    let blank = |s: f64| InvarianceReport {
        s,
        cost: f64::NAN,
        cost_transformed: f64::NAN,
        cost_gap: f64::NAN,
        expected_gap: s * s + 2.0 * s * p.x2_end,
        cost_gap_error: f64::NAN,
        dynamics_residual: f64::NAN,
        endpoint_residual: f64::NAN,
        points_checked: 0,
        precondition_met: pre,
        pass: false,
        tol,
        error: None,
    };
    let shared = simulate(p, u).and_then(|x| Ok((x.memoized(), cost(p, u)?)));
    let (x, base_cost) = match shared {
        Ok(v) => v,
        Err(e) => {
            return shifts
                .iter()
                .map(|&s| InvarianceReport {
                    error: Some(e.to_string()),
                    ..blank(s)
                })
                .collect()
        }
    };
    let ts = p.scale();
    let pts: Vec<f64> = p
        .check_points()
        .into_iter()
        .filter(|&t| ts.in_kappa(t).unwrap_or(false))
        .collect();

    let one = |s: f64| -> Result<InvarianceReport> {
        let mut r = blank(s);
        let fam = SParamFamily::new(p, s);
        let ps = fam.problem(p);
        let (us, xs) = s_transform(s, u, &x);
        r.cost = base_cost;
        r.cost_transformed = cost(&ps, &us)?;
        r.cost_gap = r.cost_transformed - r.cost;
        r.cost_gap_error = (r.cost_gap - r.expected_gap).abs();
        let mut worst: f64 = 0.0;
        for &t in &pts {
            let (a, b) = (us.u1.eval(t), us.u2.eval(t));
            let d1 = derivative_by(ts, |q| Ok(xs.eval(q)[0]), &[], t, Side::At)?;
            let d2 = derivative_by(ts, |q| Ok(xs.eval(q)[1]), &[], t, Side::At)?;
            worst = worst.max((d1 - (p.dyn1)(a, b)).abs()).max((d2 - (p.dyn2)(a, b)).abs());
        }
        r.dynamics_residual = worst;
        r.points_checked = pts.len();
        let end = xs.eval(1.0);
        r.endpoint_residual = (end[0] - fam.x1_end).abs().max((end[1] - fam.x2_end).abs());
        r.pass = r.precondition_met
            && r.cost_gap_error <= tol
            && r.dynamics_residual <= dynamics_tol(p, tol)
            && r.endpoint_residual <= tol;
        Ok(r)
    };
    shifts
        .iter()
        .map(|&s| {
            one(s).unwrap_or_else(|e| InvarianceReport {
                error: Some(e.to_string()),
                ..blank(s)
            })
        })
        .collect()
}

/// Pointwise derivative checks on dense segments inherit the difference
/// quotient's rounding, so they are held to at least 1e-8.
fn dynamics_tol(p: &ControlProblem, tol: f64) -> f64 {
    if p.scale().is_purely_scattered() {
        tol
    } else {
        tol.max(1e-8)
    }
}

#[derive(Clone, Debug)]
pub struct InvarianceSolution {
    pub s_star: f64,
    pub minimizer: ControlPair,
    pub min_cost: f64,
    /// Controls of the `s*` problem (identically zero).
    pub transformed: ControlPair,
}

/// Finds the `s` for which zero controls solve the transformed problem and
/// pulls the solution back.
pub fn solve_by_invariance(p: &ControlProblem) -> Result<InvarianceSolution> {
    if !p.is_shipped() {
        return Err(Error::NotShippedControlFamily);
    }
    let zero = ControlPair::constant(0.0, 0.0);
    let flow = simulate(p, &zero)?;
    // Zero controls in the s-problem: x^s(1) = flow(1) must equal end + s.
    let s_from_x1 = flow.x1.eval(1.0) - p.x1_end;
    let s_from_x2 = flow.x2.eval(1.0) - p.x2_end;
    if !((s_from_x1 - s_from_x2).abs() <= TOL_S) {
        return Err(Error::NoInvariantSolution {
            s_from_x1,
            s_from_x2,
        });
    }
    let s = s_from_x2;
    let fam = SParamFamily::new(p, s);
    let inside = |(lo, hi): (f64, f64)| lo <= 0.0 && 0.0 <= hi;
    if !(inside(fam.u1_box) && inside(fam.u2_box)) {
        return Err(Error::InvalidProblem(format!(
            "zero controls leave the box of the s = {s} problem"
        )));
    }
    let minimizer = ControlPair::constant(0.0, -s);
    let min_cost = 0.0 - (s * s + 2.0 * s * p.x2_end);
    Ok(InvarianceSolution {
        s_star: s,
        minimizer,
        min_cost,
        transformed: zero,
    })
}

/// A seeded random control pair feasible for `p`, or `None` when the repaired
/// pair leaves the control box.
///
/// `u₁` is a perturbation of the box centre (uniform noise on isolated
/// points, a random quadratic on dense segments, both bounded by
/// `u1_magnitude`); `u₂` is a perturbation of the box's upper end bounded by
/// `u2_magnitude`. Both are clipped to the box. `u₂` is then shifted uniformly
/// so that `x₂(1)` is met, and a uniform offset of `u₁` found by bisection
/// closes the `x₁(1)` equation.
pub fn random_feasible(
    p: &ControlProblem,
    seed: u64,
    u1_magnitude: f64,
    u2_magnitude: f64,
) -> Result<Option<ControlPair>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base1 = 0.5 * (p.u1_box.0 + p.u1_box.1);
    let base2 = p.u2_box.1;
    let pert1 = random_profile(p.scale(), &mut rng, u1_magnitude)?;
    let pert2 = random_profile(p.scale(), &mut rng, u2_magnitude)?;
    let ts = p.scale();

    let (b1, b2) = (p.u1_box, p.u2_box);
    let u1_raw = pert1.map(move |_, v| (base1 + v).clamp(b1.0, b1.1));
    let u2_raw = pert2.map(move |_, v| (base2 + v).clamp(b2.0, b2.1));
    let mean2 = delta_integral(ts, &u2_raw.to_scale_fn(), 0.0, 1.0)?;
    let shift2 = p.x2_end - mean2;
    let u2 = u2_raw.map(move |_, v| v + shift2).to_scale_fn();

    let x1_end = |theta: f64| -> Result<f64> {
        let u1 = u1_raw.map(move |_, v| v + theta).to_scale_fn();
        let pair = ControlPair::new(u1, u2.clone());
        delta_integral(ts, &pair.through(&p.dyn1), 0.0, 1.0)
    };
    let width = b1.1 - b1.0;
    let (mut lo, mut hi) = (-width, width);
    let (flo, fhi) = (x1_end(lo)? - p.x1_end, x1_end(hi)? - p.x1_end);
    if flo.signum() == fhi.signum() {
        return Ok(None);
    }
    let increasing = fhi > flo;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f = x1_end(mid)? - p.x1_end;
        if (f > 0.0) == increasing {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let theta = 0.5 * (lo + hi);
    let u1 = u1_raw.map(move |_, v| v + theta).to_scale_fn();
    let pair = ControlPair::new(u1, u2);
    let report = feasible(p, &pair, 1e-9);
    Ok(report.feasible.then_some(pair))
}

fn random_profile(ts: &TimeScale, rng: &mut ChaCha8Rng, magnitude: f64) -> Result<Trajectory> {
    let mut point_values = Vec::new();
    let mut pieces = Vec::new();
    for c in ts.components() {
        match *c {
            Component::Point(_) => point_values.push(magnitude * rng.random_range(-1.0..=1.0)),
            Component::Interval(lo, hi) => {
                let k: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..=1.0) / 3.0);
                let rule: Rule = Arc::new(move |t| {
                    let z = (2.0 * t - lo - hi) / (hi - lo);
                    magnitude * (k[0] + k[1] * z + k[2] * (2.0 * z * z - 1.0))
                });
                pieces.push(vec![(lo, rule)]);
            }
        }
    }
    Trajectory::from_parts(ts, point_values, pieces)
}

/// Writes `t,u1,u2,x1,x2` for every isolated point and `n_dense` samples per
/// dense segment. Controls are blank at a left-scattered maximum.
pub fn write_csv<W: Write>(p: &ControlProblem, u: &ControlPair, x: &States, w: &mut W, n_dense: usize) -> Result<()> {
    writeln!(w, "t,u1,u2,x1,x2")?;
    let ts = p.scale();
    for c in ts.components() {
        let samples: Vec<f64> = match *c {
            Component::Point(t) => vec![t],
            Component::Interval(lo, hi) => {
                let n = n_dense.max(2);
                (0..n)
                    .map(|k| if k == n - 1 { hi } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 })
                    .collect()
            }
        };
        for t in samples {
            let active = ts.in_kappa(t)?;
            write_row(
                w,
                &[
                    Some(t),
                    active.then(|| u.u1.eval(t)),
                    active.then(|| u.u2.eval(t)),
                    Some(x.x1.eval(t)),
                    Some(x.x2.eval(t)),
                ],
            )?;
        }
    }
    Ok(())
}

pub fn write_csv_default<W: Write>(p: &ControlProblem, u: &ControlPair, x: &States, w: &mut W) -> Result<()> {
    write_csv(p, u, x, w, N_DENSE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timescale::ScaleGenerator;

    fn hstep(h: f64) -> TimeScale {
        ScaleGenerator::HStep { a: 0.0, b: 1.0, h }.generate().unwrap()
    }

    fn unit() -> TimeScale {
        TimeScale::interval(0.0, 1.0).unwrap()
    }

    fn scales() -> Vec<TimeScale> {
        vec![
            hstep(0.5),
            hstep(0.1),
            unit(),
            TimeScale::new([Component::Point(0.0), Component::Interval(0.25, 0.75), Component::Point(1.0)])
                .unwrap(),
        ]
    }

    #[test]
    fn simulate_examples() {
        for ts in scales() {
            let p = ControlProblem::shipped(&ts).unwrap();
            let x = simulate(&p, &ControlPair::constant(0.0, 1.0)).unwrap();
            for t in p.check_points() {
                assert!((x.x1.eval(t) - 2.0 * t).abs() < 1e-12, "t={t}");
                assert!((x.x2.eval(t) - t).abs() < 1e-12);
            }
            assert!((x.x1.eval(1.0) - 2.0).abs() < 1e-12);
            assert!((x.x2.eval(1.0) - 1.0).abs() < 1e-12);
            let x = simulate(&p, &ControlPair::constant(0.0, 0.0)).unwrap();
            for t in p.check_points() {
                assert!((x.x1.eval(t) - t).abs() < 1e-12);
                assert_eq!(x.x2.eval(t), 0.0);
            }
        }
    }

    #[test]
    fn simulate_replays_recurrence_bitwise() {
        let ts = hstep(0.1);
        let p = ControlProblem::shipped(&ts).unwrap();
        let u1 = ScaleFn::new(|t: f64| (7.0 * t).sin() * 0.3);
        let u2 = ScaleFn::new(|t: f64| 0.5 - t * t);
        let x = simulate(&p, &ControlPair::new(u1.clone(), u2.clone())).unwrap();
        let pts = ts.enumerate_scattered();
        let mut s = [0.0f64, 0.0f64];
        for w in pts.windows(2) {
            assert_eq!(x.x1.eval(w[0]).to_bits(), s[0].to_bits());
            assert_eq!(x.x2.eval(w[0]).to_bits(), s[1].to_bits());
            let mu = w[1] - w[0];
            let (a, b) = (u1.eval(w[0]), u2.eval(w[0]));
            s = [s[0] + mu * (a.exp() + a + b), s[1] + mu * b];
        }
        assert_eq!(x.x1.eval(1.0).to_bits(), s[0].to_bits());
    }

    #[test]
    fn cost_examples() {
        for ts in scales() {
            let p = ControlProblem::shipped(&ts).unwrap();
            assert!((cost(&p, &ControlPair::constant(0.0, 1.0)).unwrap() - 1.0).abs() < 1e-12);
            assert_eq!(cost(&p, &ControlPair::constant(0.0, 0.0)).unwrap(), 0.0);
        }
        let p = ControlProblem::shipped(&TimeScale::from_points(&[0.0, 1.0]).unwrap()).unwrap();
        assert_eq!(cost(&p, &ControlPair::constant(1.0, 1.0)).unwrap(), 2.0);
    }

    #[test]
    fn feasibility_examples() {
        let p = ControlProblem::shipped(&hstep(0.25)).unwrap();
        assert!(feasible(&p, &ControlPair::constant(0.0, 1.0), 1e-9).feasible);
        let r = feasible(&p, &ControlPair::constant(0.0, 0.0), 1e-9);
        assert!(!r.feasible);
        assert!(r.violations.iter().any(|v| matches!(v, ControlViolation::Endpoint { state: 1, .. })));
        let r = feasible(&p, &ControlPair::constant(0.0, 1.5), 1e-9);
        assert!(r.violations.iter().any(|v| matches!(v, ControlViolation::Box { control: 2, .. })));
    }

    #[test]
    fn s_transform_examples() {
        let p = ControlProblem::shipped(&hstep(0.25)).unwrap();
        let u = ControlPair::constant(0.0, 1.0);
        let x = simulate(&p, &u).unwrap();
        let (u0, x0) = s_transform(0.0, &u, &x);
        for t in [0.0, 0.25, 0.5, 1.0] {
            assert_eq!(u0.u2.eval(t), 1.0);
            assert_eq!(x0.x1.eval(t), x.x1.eval(t));
        }
        let (um, xm) = s_transform(-1.0, &u, &x);
        for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
            assert_eq!(um.u1.eval(t), 0.0);
            assert_eq!(um.u2.eval(t), 0.0);
            assert!((xm.x1.eval(t) - t).abs() < 1e-15);
            assert!(xm.x2.eval(t).abs() < 1e-15);
        }
        let (u1, _) = s_transform(1.0, &ControlPair::constant(0.0, 0.0), &x);
        assert_eq!(u1.u2.eval(0.5), 1.0);
    }

    #[test]
    fn s_family_at_zero_is_the_original() {
        let p = ControlProblem::shipped(&unit()).unwrap();
        let f = SParamFamily::new(&p, 0.0);
        assert_eq!((f.x1_end, f.x2_end), (2.0, 1.0));
        assert_eq!(f.u2_box, p.u2_box());
    }

    #[test]
    fn invariance_examples() {
        let p = ControlProblem::shipped(&hstep(0.5)).unwrap();
        let u = ControlPair::constant(0.0, 1.0);
        let r = check_invariance(&p, 0.0, &u, 1e-12);
        assert!(r.pass && r.cost_gap == 0.0, "{r:?}");
        let r = check_invariance(&p, -1.0, &u, 1e-12);
        assert!(r.pass && r.cost_gap == -1.0, "{r:?}");
        assert_eq!(r.cost_transformed, 0.0);
        // s² + 2s at s = 0.5, against two finite sums.
        let r = check_invariance(&p, 0.5, &u, 1e-12);
        let direct = 0.5 * (1.5f64 * 1.5) * 2.0 - 0.5 * 1.0 * 2.0;
        assert_eq!(direct, 1.25);
        assert!((r.cost_gap - direct).abs() < 1e-15 && r.pass, "{r:?}");
    }

    #[test]
    fn invariance_on_dense_scale() {
        let p = ControlProblem::shipped(&unit()).unwrap();
        let r = check_invariance(&p, 0.5, &ControlPair::constant(0.0, 1.0), 1e-8);
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn solve_examples() {
        for ts in scales() {
            let p = ControlProblem::shipped(&ts).unwrap();
            let sol = solve_by_invariance(&p).unwrap();
            assert_eq!(sol.s_star, -1.0);
            assert_eq!(sol.min_cost, 1.0);
            assert_eq!(sol.minimizer.u1.eval(0.5), 0.0);
            assert_eq!(sol.minimizer.u2.eval(0.5), 1.0);
            assert!((cost(&p, &sol.minimizer).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn solve_errors() {
        let p = ControlProblem::shipped(&hstep(0.5)).unwrap().with_endpoints(3.0, 1.0);
        match solve_by_invariance(&p) {
            Err(Error::NoInvariantSolution { s_from_x1, s_from_x2 }) => {
                assert_eq!((s_from_x1, s_from_x2), (-2.0, -1.0));
            }
            other => panic!("{other:?}"),
        }
        let q = ControlProblem::new(
            &unit(),
            Arc::new(|a: f64, b: f64| a * a + b * b),
            Arc::new(|a: f64, b: f64| a + b),
            Arc::new(|_: f64, b: f64| b),
            (2.0, 1.0),
            (-1.0, 1.0),
        )
        .unwrap();
        assert!(matches!(solve_by_invariance(&q), Err(Error::NotShippedControlFamily)));
        assert!(ControlProblem::shipped(&TimeScale::interval(0.0, 0.5).unwrap()).is_err());
    }

    #[test]
    fn random_feasible_controls() {
        for ts in scales() {
            let p = ControlProblem::shipped(&ts).unwrap();
            let mut found = 0;
            for seed in 0..20 {
                if let Some(u) = random_feasible(&p, seed, 0.5, 0.0).unwrap() {
                    assert!(feasible(&p, &u, 1e-9).feasible);
                    assert!(cost(&p, &u).unwrap() >= 1.0 - 1e-12);
                    found += 1;
                }
            }
            assert!(found >= 10, "only {found} feasible draws");
        }
    }

    #[test]
    fn feasible_draws_keep_u2_at_one() {
        // x₂(1) = ∫u₂ = 1 with u₂ <= 1 forces u₂ ≡ 1, so only draws whose
        // clipped u₂ perturbation vanishes survive.
        let p = ControlProblem::shipped(&hstep(0.5)).unwrap();
        let mut kept = 0;
        for seed in 0..40 {
            if let Some(u) = random_feasible(&p, seed, 0.2, 0.3).unwrap() {
                for t in p.check_points() {
                    assert!((u.u2.eval(t) - 1.0).abs() < 1e-12);
                }
                kept += 1;
            }
        }
        assert!(kept > 0 && kept < 40, "{kept}");
    }

    #[test]
    fn csv_export() {
        let p = ControlProblem::shipped(&hstep(0.5)).unwrap();
        let u = ControlPair::constant(0.0, 1.0);
        let x = simulate(&p, &u).unwrap();
        let mut buf = Vec::new();
        write_csv_default(&p, &u, &x, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,u1,u2,x1,x2");
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[3], "1.0000000000000000e0,,,2.0000000000000000e0,1.0000000000000000e0");
    }
}
