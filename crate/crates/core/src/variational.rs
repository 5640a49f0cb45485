//! The basic problem: minimize `∫_a^b L(t, x^σ(t), x^Δ(t)) Δt` subject to
//! `x(a) = α`, `x(b) = β`.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::delta::{derivative_by, integrate_by, Rule, ScaleFn};
use crate::error::{Error, Result};
use crate::export::write_row;
use crate::quadrature::Side;
use crate::timescale::{Component, TimeScale};

/// Default absolute tolerance for boundary and continuity checks.
pub const TOL_ADMISSIBLE: f64 = 1e-9;
/// Samples per dense segment in CSV exports.
pub const N_DENSE: usize = 101;

pub type Rule3 = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// `L(t, y, v)` where `y` stands for `x^σ(t)` and `v` for `x^Δ(t)`.
#[derive(Clone)]
pub struct Lagrangian {
    rule: Rule3,
    l_y: Option<Rule3>,
    l_v: Option<Rule3>,
}

impl fmt::Debug for Lagrangian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Lagrangian")
            .field("l_y", &self.l_y.is_some())
            .field("l_v", &self.l_v.is_some())
            .finish()
    }
}

impl Lagrangian {
    pub fn new(rule: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            rule: Arc::new(rule),
            l_y: None,
            l_v: None,
        }
    }

    pub fn zero() -> Self {
        Self::new(|_, _, _| 0.0)
    }

    pub fn with_partials(
        mut self,
        l_y: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        l_v: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.l_y = Some(Arc::new(l_y));
        self.l_v = Some(Arc::new(l_v));
        self
    }

    /// `k · L`.
    pub fn scaled(&self, k: f64) -> Self {
        let r = self.rule.clone();
        Self::new(move |t, y, v| k * r(t, y, v))
    }

    pub fn eval(&self, t: f64, y: f64, v: f64) -> f64 {
        (self.rule)(t, y, v)
    }

    pub fn partial_y(&self, t: f64, y: f64, v: f64) -> f64 {
        match &self.l_y {
            Some(d) => d(t, y, v),
            None => {
                let h = 1e-6 * y.abs().max(1.0);
                (self.eval(t, y + h, v) - self.eval(t, y - h, v)) / (2.0 * h)
            }
        }
    }

    pub fn partial_v(&self, t: f64, y: f64, v: f64) -> f64 {
        match &self.l_v {
            Some(d) => d(t, y, v),
            None => {
                let h = 1e-6 * v.abs().max(1.0);
                (self.eval(t, y, v + h) - self.eval(t, y, v - h)) / (2.0 * h)
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct VariationalProblem {
    scale: TimeScale,
    a: f64,
    b: f64,
    alpha: f64,
    beta: f64,
    lagrangian: Lagrangian,
}

impl VariationalProblem {
    /// The problem lives on `[a, b] ∩ ts`; `a < b` must both be members.
    pub fn new(
        ts: &TimeScale,
        a: f64,
        b: f64,
        alpha: f64,
        beta: f64,
        lagrangian: Lagrangian,
    ) -> Result<Self> {
        let a = ts.canonical(a)?;
        let b = ts.canonical(b)?;
        if a == b {
            return Err(Error::DegenerateInterval(a));
        }
        if a > b {
            return Err(Error::InvalidProblem(format!("need a < b, got a={a} b={b}")));
        }
        if !(alpha.is_finite() && beta.is_finite()) {
            return Err(Error::InvalidProblem("boundary values must be finite".into()));
        }
        Ok(Self {
            scale: ts.restrict(a, b)?,
            a,
            b,
            alpha,
            beta,
            lagrangian,
        })
    }

    pub fn scale(&self) -> &TimeScale {
        &self.scale
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn lagrangian(&self) -> &Lagrangian {
        &self.lagrangian
    }

    pub fn with_lagrangian(&self, lagrangian: Lagrangian) -> Self {
        Self {
            lagrangian,
            ..self.clone()
        }
    }

    pub fn with_boundary(&self, alpha: f64, beta: f64) -> Self {
        Self {
            alpha,
            beta,
            ..self.clone()
        }
    }

    /// The straight line through `(a, α)` and `(b, β)`.
    pub fn linear_interpolant(&self) -> impl Fn(f64) -> f64 + Send + Sync + Clone + 'static {
        let (a, b, alpha, beta) = (self.a, self.b, self.alpha, self.beta);
        move |t| {
            if t == b {
                beta
            } else {
                alpha + (beta - alpha) * (t - a) / (b - a)
            }
        }
    }
}

#[derive(Clone)]
struct Piece {
    start: f64,
    rule: Rule,
}

#[derive(Clone)]
struct DenseRule {
    lo: f64,
    hi: f64,
    pieces: Vec<Piece>,
}

impl DenseRule {
    /// Right-limit convention: a corner belongs to the piece it starts.
    fn at(&self, t: f64) -> f64 {
        let i = self.pieces.partition_point(|p| p.start <= t).max(1) - 1;
        (self.pieces[i].rule)(t)
    }

    fn left(&self, t: f64) -> f64 {
        let i = self.pieces.partition_point(|p| p.start < t).max(1) - 1;
        (self.pieces[i].rule)(t)
    }
}

/// A trajectory: exact values on isolated points and a piecewise rule on each
/// dense segment. Pieces meet at declared corners.
#[derive(Clone)]
pub struct Trajectory {
    scale: TimeScale,
    points: Vec<(f64, f64)>,
    segments: Vec<DenseRule>,
}

impl fmt::Debug for Trajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Trajectory")
            .field("points", &self.points)
            .field("segments", &self.segments.len())
            .field("corners", &self.corners())
            .finish()
    }
}

impl Trajectory {
    /// Samples `f` on every isolated point and uses it as the single rule on
    /// every dense segment.
    pub fn from_fn(scale: &TimeScale, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        let rule: Rule = Arc::new(f);
        let mut points = Vec::new();
        let mut segments = Vec::new();
        for c in scale.components() {
            match *c {
                Component::Point(p) => points.push((p, rule(p))),
                Component::Interval(lo, hi) => segments.push(DenseRule {
                    lo,
                    hi,
                    pieces: vec![Piece {
                        start: lo,
                        rule: rule.clone(),
                    }],
                }),
            }
        }
        Self {
            scale: scale.clone(),
            points,
            segments,
        }
    }

    /// Explicit construction. `point_values` follows the isolated points in
    /// order; `pieces[i]` lists `(start, rule)` for the i-th dense segment,
    /// the first start being the segment's left end.
    pub fn from_parts(
        scale: &TimeScale,
        point_values: Vec<f64>,
        pieces: Vec<Vec<(f64, Rule)>>,
    ) -> Result<Self> {
        let pts: Vec<f64> = scale
            .components()
            .iter()
            .filter_map(|c| match *c {
                Component::Point(p) => Some(p),
                _ => None,
            })
            .collect();
        let segs = scale.dense_segments();
        if pts.len() != point_values.len() || segs.len() != pieces.len() {
            return Err(Error::InvalidProblem(format!(
                "trajectory shape mismatch: {} points/{} segments expected, got {}/{}",
                pts.len(),
                segs.len(),
                point_values.len(),
                pieces.len()
            )));
        }
        let mut segments = Vec::with_capacity(segs.len());
        for ((lo, hi), ps) in segs.into_iter().zip(pieces) {
            let ok = !ps.is_empty()
                && ps[0].0 == lo
                && ps.windows(2).all(|w| w[0].0 < w[1].0)
                && ps.last().is_some_and(|p| p.0 < hi);
            if !ok {
                return Err(Error::InvalidProblem(format!(
                    "pieces on [{lo}, {hi}] must start at {lo} and increase strictly inside"
                )));
            }
            segments.push(DenseRule {
                lo,
                hi,
                pieces: ps
                    .into_iter()
                    .map(|(start, rule)| Piece { start, rule })
                    .collect(),
            });
        }
        Ok(Self {
            scale: scale.clone(),
            points: pts.into_iter().zip(point_values).collect(),
            segments,
        })
    }

    pub fn scale(&self) -> &TimeScale {
        &self.scale
    }

    pub fn corners(&self) -> Vec<f64> {
        self.segments
            .iter()
            .flat_map(|s| s.pieces.iter().skip(1).map(|p| p.start))
            .collect()
    }

    fn segment(&self, t: f64) -> Option<&DenseRule> {
        let i = self.segments.partition_point(|s| s.lo <= t);
        let s = self.segments.get(i.checked_sub(1)?)?;
        (t <= s.hi).then_some(s)
    }

    fn lookup(&self, t: f64, side: Side) -> f64 {
        let Ok(t) = self.scale.canonical(t) else {
            return f64::NAN;
        };
        if let Ok(i) = self.points.binary_search_by(|p| p.0.total_cmp(&t)) {
            return self.points[i].1;
        }
        match self.segment(t) {
            Some(s) if side == Side::Left => s.left(t),
            Some(s) => s.at(t),
            None => f64::NAN,
        }
    }

    /// `x(t)`; NaN off the scale.
    pub fn eval(&self, t: f64) -> f64 {
        self.lookup(t, Side::At)
    }

    /// Left limit `x(t-)`, which differs from `x(t)` only for discontinuous
    /// piece rules.
    pub fn eval_left(&self, t: f64) -> f64 {
        self.lookup(t, Side::Left)
    }

    pub fn sigma_value(&self, t: f64) -> Result<f64> {
        Ok(self.eval(self.scale.sigma(t)?))
    }

    pub fn delta(&self, t: f64) -> Result<f64> {
        derivative_by(&self.scale, |s| Ok(self.eval(s)), &self.corners(), t, Side::At)
    }

    pub fn delta_left(&self, t: f64) -> Result<f64> {
        derivative_by(&self.scale, |s| Ok(self.eval(s)), &self.corners(), t, Side::Left)
    }

    pub fn to_scale_fn(&self) -> ScaleFn {
        let at = self.clone();
        let left = self.clone();
        ScaleFn::new(move |t| at.eval(t))
            .with_left_limit(move |t| left.eval_left(t))
            .with_breaks(self.corners())
    }

    /// Pointwise image `t ↦ g(t, x(t))`, keeping corners.
    pub fn map(&self, g: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Trajectory {
        let g = Arc::new(g);
        let points = self.points.iter().map(|&(t, v)| (t, g(t, v))).collect();
        let segments = self
            .segments
            .iter()
            .map(|s| DenseRule {
                lo: s.lo,
                hi: s.hi,
                pieces: s
                    .pieces
                    .iter()
                    .map(|p| {
                        let g = g.clone();
                        let r = p.rule.clone();
                        Piece {
                            start: p.start,
                            rule: Arc::new(move |t| g(t, r(t))),
                        }
                    })
                    .collect(),
            })
            .collect();
        Trajectory {
            scale: self.scale.clone(),
            points,
            segments,
        }
    }

    /// Whether every member of `ts` is a member of this trajectory's scale.
    pub fn covers(&self, ts: &TimeScale) -> bool {
        ts.components().iter().all(|c| match *c {
            Component::Point(p) => self.scale.contains(p),
            Component::Interval(lo, hi) => self
                .scale
                .segment_of(lo)
                .ok()
                .flatten()
                .is_some_and(|(l, h)| l <= lo && hi <= h),
        })
    }

    /// Jumps between adjacent pieces at each corner.
    pub fn corner_jumps(&self) -> Vec<(f64, f64)> {
        self.segments
            .iter()
            .flat_map(|s| {
                s.pieces.windows(2).map(|w| {
                    let c = w[1].start;
                    (c, (w[1].rule)(c) - (w[0].rule)(c))
                })
            })
            .collect()
    }

    /// Writes `t,x,xdelta,xsigma`: one row per isolated point and `n_dense`
    /// evenly spaced samples per dense segment. `xdelta` is blank where the
    /// delta derivative is undefined (the maximum of a left-scattered end).
    pub fn write_csv<W: Write>(&self, w: &mut W, n_dense: usize) -> Result<()> {
        writeln!(w, "t,x,xdelta,xsigma")?;
        for c in self.scale.components() {
            let ts: Vec<f64> = match *c {
                Component::Point(p) => vec![p],
                Component::Interval(lo, hi) => {
                    let n = n_dense.max(2);
                    (0..n)
                        .map(|k| {
                            if k == n - 1 {
                                hi
                            } else {
                                lo + (hi - lo) * k as f64 / (n - 1) as f64
                            }
                        })
                        .collect()
                }
            };
            for t in ts {
                write_row(
                    w,
                    &[
                        Some(t),
                        Some(self.eval(t)),
                        self.delta(t).ok(),
                        self.sigma_value(t).ok(),
                    ],
                )?;
            }
        }
        Ok(())
    }
}

/// `𝓛[x]`.
pub fn evaluate_functional(p: &VariationalProblem, x: &Trajectory) -> Result<f64> {
    if !x.covers(p.scale()) {
        return Err(Error::InvalidProblem(
            "trajectory is not defined on the whole problem scale".into(),
        ));
    }
    let ts = p.scale();
    let corners = x.corners();
    let l = p.lagrangian();
    let integrand = |t: f64, side: Side| -> Result<f64> {
        let xs = |s: f64| Ok(x.eval(s));
        match side {
            Side::At => {
                let y = x.eval(ts.sigma(t)?);
                let v = derivative_by(ts, xs, &corners, t, Side::At)?;
                Ok(l.eval(t, y, v))
            }
            Side::Left => {
                let y = x.eval_left(t);
                let v = derivative_by(ts, xs, &corners, t, Side::Left)?;
                Ok(l.eval(t, y, v))
            }
        }
    };
    integrate_by(ts, integrand, &corners, p.a(), p.b())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    StartValue { expected: f64, got: f64 },
    EndValue { expected: f64, got: f64 },
    Discontinuity { t: f64, jump: f64 },
    NotDefined,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub admissible: bool,
    pub violations: Vec<Violation>,
}

pub fn check_admissible(p: &VariationalProblem, x: &Trajectory, tol: f64) -> AdmissibilityReport {
    let mut violations = Vec::new();
    if !x.covers(p.scale()) {
        violations.push(Violation::NotDefined);
    }
    let xa = x.eval(p.a());
    if !((xa - p.alpha()).abs() <= tol) {
        violations.push(Violation::StartValue {
            expected: p.alpha(),
            got: xa,
        });
    }
    let xb = x.eval(p.b());
    if !((xb - p.beta()).abs() <= tol) {
        violations.push(Violation::EndValue {
            expected: p.beta(),
            got: xb,
        });
    }
    for (t, jump) in x.corner_jumps() {
        if !(jump.abs() <= tol) {
            violations.push(Violation::Discontinuity { t, jump });
        }
    }
    AdmissibilityReport {
        admissible: violations.is_empty(),
        violations,
    }
}

/// The straight line between the boundary values plus a seeded perturbation
/// vanishing at `a` and `b`.
///
/// Isolated points get uniform noise in `[-magnitude, magnitude]` scaled by a
/// tent that is 1 at the midpoint of `[a, b]` and 0 at the ends. Each dense
/// segment gets a cubic bump that vanishes at both of its ends.
pub fn random_admissible(p: &VariationalProblem, seed: u64, magnitude: f64) -> Trajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let line = p.linear_interpolant();
    let (a, b) = (p.a(), p.b());
    let tent = move |t: f64| 1.0 - (2.0 * (t - a) / (b - a) - 1.0).abs();
    let mut point_values = Vec::new();
    let mut pieces = Vec::new();
    for c in p.scale().components() {
        match *c {
            Component::Point(t) => {
                let u: f64 = rng.random_range(-1.0..=1.0);
                let v = if t == a {
                    p.alpha()
                } else if t == b {
                    p.beta()
                } else {
                    line(t) + magnitude * u * tent(t)
                };
                point_values.push(v);
            }
            Component::Interval(lo, hi) => {
                let u1: f64 = rng.random_range(-1.0..=1.0);
                let u2: f64 = rng.random_range(-1.0..=1.0);
                let line = line.clone();
                let rule: Rule = Arc::new(move |t| {
                    let w = hi - lo;
                    let bump = 4.0 * (t - lo) * (hi - t) / (w * w);
                    let skew = (2.0 * t - lo - hi) / w;
                    line(t) + magnitude * bump * (u1 + u2 * skew)
                });
                pieces.push(vec![(lo, rule)]);
            }
        }
    }
    Trajectory::from_parts(p.scale(), point_values, pieces)
        .expect("shape follows the problem scale")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timescale::ScaleGenerator;

    fn illustrative() -> Lagrangian {
        Lagrangian::new(|t, y, v| v * v + y + t * v)
    }

    fn z(a: i64, b: i64) -> TimeScale {
        ScaleGenerator::Integers { a, b }.generate().unwrap()
    }

    fn mixed() -> TimeScale {
        TimeScale::new([Component::Point(0.0), Component::Interval(1.0, 2.0)]).unwrap()
    }

    #[test]
    fn functional_examples() {
        let p = VariationalProblem::new(&z(0, 2), 0.0, 2.0, 0.0, 2.0, illustrative()).unwrap();
        let x = Trajectory::from_fn(p.scale(), |t| t);
        // t=0: 1 + 1 + 0; t=1: 1 + 2 + 1.
        assert_eq!(evaluate_functional(&p, &x).unwrap(), 6.0);
        let zero = p.with_lagrangian(Lagrangian::zero());
        assert_eq!(evaluate_functional(&zero, &x).unwrap(), 0.0);
        let trivial = p
            .with_lagrangian(Lagrangian::new(|_, _, v| v * v))
            .with_boundary(0.0, 0.0);
        let x0 = Trajectory::from_fn(trivial.scale(), |_| 0.0);
        assert_eq!(evaluate_functional(&trivial, &x0).unwrap(), 0.0);
    }

    #[test]
    fn functional_on_mixed_scale() {
        // {0} ∪ [1,2], x(t) = t: μ(0)·(1 + 1 + 0) + ∫_1^2 (1 + 2t) dt = 2 + 4.
        let p = VariationalProblem::new(&mixed(), 0.0, 2.0, 0.0, 2.0, illustrative()).unwrap();
        let x = Trajectory::from_fn(p.scale(), |t| t);
        let v = evaluate_functional(&p, &x).unwrap();
        assert!((v - 6.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn problem_validation() {
        let ts = z(0, 2);
        assert!(matches!(
            VariationalProblem::new(&ts, 1.0, 1.0, 0.0, 1.0, illustrative()),
            Err(Error::DegenerateInterval(_))
        ));
        assert!(VariationalProblem::new(&ts, 2.0, 0.0, 0.0, 1.0, illustrative()).is_err());
        assert!(matches!(
            VariationalProblem::new(&ts, 0.5, 2.0, 0.0, 1.0, illustrative()),
            Err(Error::NotMember { .. })
        ));
    }

    #[test]
    fn admissibility_examples() {
        let p = VariationalProblem::new(&z(0, 2), 0.0, 2.0, 0.0, 2.0, illustrative()).unwrap();
        let ok = check_admissible(&p, &Trajectory::from_fn(p.scale(), |t| t), TOL_ADMISSIBLE);
        assert!(ok.admissible);
        let shifted = check_admissible(&p, &Trajectory::from_fn(p.scale(), |t| t + 1.0), 1e-9);
        assert!(!shifted.admissible);
        assert!(matches!(shifted.violations[0], Violation::StartValue { .. }));
        let sq = check_admissible(&p, &Trajectory::from_fn(p.scale(), |t| t * t), 1e-9);
        assert_eq!(
            sq.violations,
            vec![Violation::EndValue {
                expected: 2.0,
                got: 4.0
            }]
        );
    }

    #[test]
    fn corner_discontinuity_is_reported() {
        let ts = TimeScale::interval(0.0, 2.0).unwrap();
        let p = VariationalProblem::new(&ts, 0.0, 2.0, 0.0, 2.0, illustrative()).unwrap();
        let x = Trajectory::from_parts(
            &ts,
            vec![],
            vec![vec![
                (0.0, Arc::new(|t: f64| t) as Rule),
                (1.0, Arc::new(|t: f64| t + 0.5) as Rule),
            ]],
        )
        .unwrap();
        let r = check_admissible(&p, &x, 1e-9);
        assert!(!r.admissible);
        assert!(r
            .violations
            .iter()
            .any(|v| matches!(v, Violation::Discontinuity { t, jump } if *t == 1.0 && *jump == 0.5)));
    }

    #[test]
    fn corner_trajectory_integrates_piecewise() {
        // x = t on [0,1], x = 2t - 1 on [1,2]; ∫ (x')² = 1 + 4 = 5.
        let ts = TimeScale::interval(0.0, 2.0).unwrap();
        let p = VariationalProblem::new(&ts, 0.0, 2.0, 0.0, 3.0, Lagrangian::new(|_, _, v| v * v))
            .unwrap();
        let x = Trajectory::from_parts(
            &ts,
            vec![],
            vec![vec![
                (0.0, Arc::new(|t: f64| t) as Rule),
                (1.0, Arc::new(|t: f64| 2.0 * t - 1.0) as Rule),
            ]],
        )
        .unwrap();
        assert!(check_admissible(&p, &x, 1e-12).admissible);
        let v = evaluate_functional(&p, &x).unwrap();
        assert!((v - 5.0).abs() < 1e-10, "{v}");
        assert_eq!(x.delta(1.0).unwrap().round(), 2.0);
        assert_eq!(x.delta_left(1.0).unwrap().round(), 1.0);
    }

    #[test]
    fn random_admissible_contract() {
        for ts in [z(0, 6), mixed(), TimeScale::interval(0.0, 1.0).unwrap()] {
            let p = VariationalProblem::new(&ts, ts.min(), ts.max(), -1.0, 3.0, illustrative())
                .unwrap();
            let line = p.linear_interpolant();
            let flat = random_admissible(&p, 7, 0.0);
            for t in [ts.min(), ts.max()] {
                assert_eq!(flat.eval(t), line(t));
            }
            for c in ts.components() {
                let t = 0.5 * (c.lo() + c.hi());
                assert_eq!(flat.eval(t), line(t));
            }
            let x1 = random_admissible(&p, 42, 3.0);
            let x2 = random_admissible(&p, 42, 3.0);
            for c in ts.components() {
                for t in [c.lo(), 0.3 * c.lo() + 0.7 * c.hi(), c.hi()] {
                    assert_eq!(x1.eval(t).to_bits(), x2.eval(t).to_bits());
                }
            }
            assert!(check_admissible(&p, &x1, 1e-9).admissible);
        }
    }

    #[test]
    fn csv_export() {
        let p = VariationalProblem::new(&mixed(), 0.0, 2.0, 0.0, 2.0, illustrative()).unwrap();
        let x = Trajectory::from_fn(p.scale(), |t| t);
        let mut buf = Vec::new();
        x.write_csv(&mut buf, 5).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,x,xdelta,xsigma");
        assert_eq!(lines.len(), 1 + 1 + 5);
        let first: Vec<f64> = lines[1].split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(first, vec![0.0, 0.0, 1.0, 1.0]);

        let p = VariationalProblem::new(&z(0, 2), 0.0, 2.0, 0.0, 2.0, illustrative()).unwrap();
        let x = Trajectory::from_fn(p.scale(), |t| t);
        let mut buf = Vec::new();
        x.write_csv(&mut buf, 5).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().last().unwrap().ends_with(",,2.0000000000000000e0"));
    }

    #[test]
    fn fallback_partials() {
        let l = illustrative();
        assert!((l.partial_v(1.0, 2.0, 3.0) - 7.0).abs() < 1e-6);
        assert!((l.partial_y(1.0, 2.0, 3.0) - 1.0).abs() < 1e-6);
        let l = l.with_partials(|_, _, _| 1.0, |t, _, v| 2.0 * v + t);
        assert_eq!(l.partial_v(1.0, 2.0, 3.0), 7.0);
    }
}
