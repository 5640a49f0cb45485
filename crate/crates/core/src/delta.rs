//! Delta derivative, sigma composition and delta integral.
//!
//! On right-scattered points everything is exact: the derivative is the
//! forward quotient over the graininess and the integral is a weighted sum.
//! On dense segments the derivative is a five-point difference quotient that
//! never leaves the piece of the segment it starts in, and the integral is
//! composite Simpson (see [`crate::quadrature`]).

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature::{adaptive_simpson, Side, TOL_QUAD};
use crate::timescale::{TimeScale, EPS_MEMBER};

/// Step of the dense-segment difference quotient.
pub const H_NUM: f64 = 1e-3;

pub type Rule = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A real function on a time scale.
///
/// `left` optionally supplies left limits, which differ from `rule` only at
/// right-scattered points and declared breaks. `breaks` lists the finitely
/// many dense points where the delta derivative may jump.
#[derive(Clone)]
pub struct ScaleFn {
    rule: Rule,
    left: Option<Rule>,
    breaks: Vec<f64>,
}

impl fmt::Debug for ScaleFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScaleFn")
            .field("left_limit", &self.left.is_some())
            .field("breaks", &self.breaks)
            .finish()
    }
}

impl ScaleFn {
    pub fn new(rule: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            rule: Arc::new(rule),
            left: None,
            breaks: Vec::new(),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_| c)
    }

    pub fn with_left_limit(mut self, left: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.left = Some(Arc::new(left));
        self
    }

    pub fn with_breaks(mut self, mut breaks: Vec<f64>) -> Self {
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        self.breaks = breaks;
        self
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.rule)(t)
    }

    pub fn eval_left(&self, t: f64) -> f64 {
        match &self.left {
            Some(l) => l(t),
            None => (self.rule)(t),
        }
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    fn eval_side(&self, t: f64, side: Side) -> f64 {
        match side {
            Side::At => self.eval(t),
            Side::Left => self.eval_left(t),
        }
    }
}

/// `f^σ = f ∘ σ`. Outside the scale the composed rule yields NaN.
pub fn compose_sigma(ts: &TimeScale, f: &ScaleFn) -> ScaleFn {
    let ts = ts.clone();
    let g = f.clone();
    let gl = f.clone();
    ScaleFn::new(move |t| ts.sigma(t).map_or(f64::NAN, |s| g.eval(s)))
        .with_left_limit(move |t| gl.eval_left(t))
        .with_breaks(f.breaks.clone())
}

/// Bounds of the smooth piece of the dense segment `(lo, hi)` around `t`,
/// cut at the nearest breaks. A break at `t` itself belongs to the right
/// piece for [`Side::At`] and to the left piece for [`Side::Left`].
fn piece(lo: f64, hi: f64, breaks: &[f64], t: f64, side: Side) -> (f64, f64) {
    let mut a = lo;
    let mut b = hi;
    for &br in breaks {
        if br <= lo || br >= hi {
            continue;
        }
        let left_of = match side {
            Side::At => br <= t,
            Side::Left => br < t,
        };
        if left_of {
            a = a.max(br);
        } else {
            b = b.min(br);
        }
    }
    (a, b)
}

fn dense_quotient<F>(f: &mut F, t: f64, a: f64, b: f64, side: Side) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let dl = t - a;
    let dr = b - t;
    if side == Side::At && dl >= 2.0 * H_NUM && dr >= 2.0 * H_NUM {
        let h = H_NUM;
        return Ok((f(t - 2.0 * h)? - 8.0 * f(t - h)? + 8.0 * f(t + h)? - f(t + 2.0 * h)?)
            / (12.0 * h));
    }
    let forward = side == Side::At && dr >= dl;
    let room = if forward { dr } else { dl };
    let h = H_NUM.min(room / 4.0);
    if h < EPS_MEMBER {
        return Err(Error::DegenerateSegment { t });
    }
    let h = if forward { h } else { -h };
    let f0 = f(t)?;
    Ok((-25.0 * f0 + 48.0 * f(t + h)? - 36.0 * f(t + 2.0 * h)? + 16.0 * f(t + 3.0 * h)?
        - 3.0 * f(t + 4.0 * h)?)
        / (12.0 * h))
}

/// Delta derivative of an arbitrary (fallible) rule.
///
/// With [`Side::Left`] this returns the left-sided derivative at a dense
/// point, i.e. the left limit of `f^Δ`; it is used for Simpson end nodes.
pub fn derivative_by<F>(ts: &TimeScale, mut f: F, breaks: &[f64], t: f64, side: Side) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let t = ts.canonical(t)?;
    if side == Side::At {
        if !ts.in_kappa(t)? {
            return Err(Error::NotInKappa { t });
        }
        let s = ts.sigma(t)?;
        if s > t {
            return Ok((f(s)? - f(t)?) / (s - t));
        }
    }
    let (lo, hi) = ts.segment_of(t)?.ok_or(Error::DegenerateSegment { t })?;
    if side == Side::Left && t == lo {
        return Err(Error::DegenerateSegment { t });
    }
    let (a, b) = piece(lo, hi, breaks, t, side);
    dense_quotient(&mut f, t, a, b, side)
}

pub fn delta_derivative(ts: &TimeScale, f: &ScaleFn, t: f64) -> Result<f64> {
    derivative_by(ts, |s| Ok(f.eval(s)), &f.breaks, t, Side::At)
}

/// Left limit of `f^Δ` at a left-dense point of a dense segment.
pub fn delta_derivative_left(ts: &TimeScale, f: &ScaleFn, t: f64) -> Result<f64> {
    derivative_by(ts, |s| Ok(f.eval(s)), &f.breaks, t, Side::Left)
}

/// Delta integral of an arbitrary (fallible) rule over `[c, d]`, `c <= d`.
pub fn integrate_by<F>(ts: &TimeScale, mut f: F, breaks: &[f64], c: f64, d: f64) -> Result<f64>
where
    F: FnMut(f64, Side) -> Result<f64>,
{
    let c = ts.canonical(c)?;
    let d = ts.canonical(d)?;
    if c > d {
        return Err(Error::InvalidProblem(format!("integrate_by needs c <= d, got {c} > {d}")));
    }
    let mut total = 0.0;
    for t in ts.enumerate_scattered() {
        if t < c || t >= d {
            continue;
        }
        let mu = ts.sigma(t)? - t;
        if mu > 0.0 {
            total += mu * f(t, Side::At)?;
        }
    }
    for (lo, hi) in ts.dense_segments() {
        let lo = lo.max(c);
        let hi = hi.min(d);
        if lo >= hi {
            continue;
        }
        let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&b| b > lo && b < hi).collect();
        cuts.push(hi);
        let mut p = lo;
        for q in cuts {
            let right = if q < hi || ts.sigma(q)? > q {
                Side::Left
            } else {
                Side::At
            };
            total += adaptive_simpson(&mut f, p, q, right, TOL_QUAD)?.0;
            p = q;
        }
    }
    Ok(total)
}

/// `∫_c^d f(t) Δt`; the orientation flips the sign when `c > d`.
pub fn delta_integral(ts: &TimeScale, f: &ScaleFn, c: f64, d: f64) -> Result<f64> {
    let eval = |t: f64, side: Side| Ok(f.eval_side(t, side));
    if c > d {
        Ok(-integrate_by(ts, eval, &f.breaks, d, c)?)
    } else {
        integrate_by(ts, eval, &f.breaks, c, d)
    }
}
