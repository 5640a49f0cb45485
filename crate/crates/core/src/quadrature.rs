//! Composite Simpson quadrature with panel doubling.

use crate::error::{Error, Result};

/// Convergence threshold on successive Simpson estimates.
pub const TOL_QUAD: f64 = 1e-10;
/// Upper bound on the number of Simpson panels per integration range.
pub const MAX_PANELS: usize = 1 << 16;
const MIN_PANELS: usize = 8;

/// Which value an integrand should report at a node.
///
/// Simpson nodes at the right end of a range take the limit from the left so
/// that a jump of an rd-continuous integrand at a right-scattered point (or
/// at a declared corner) does not leak into the Riemann part.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    At,
    Left,
}

struct Accum {
    ends: f64,
    odd: f64,
    even: f64,
    panels: usize,
}

impl Accum {
    fn estimate(&self, lo: f64, hi: f64) -> f64 {
        let h = (hi - lo) / self.panels as f64;
        h / 3.0 * (self.ends + 4.0 * self.odd + 2.0 * self.even)
    }
}

fn start<F>(f: &mut F, lo: f64, hi: f64, right: Side, panels: usize) -> Result<Accum>
where
    F: FnMut(f64, Side) -> Result<f64>,
{
    let h = (hi - lo) / panels as f64;
    let mut odd = 0.0;
    let mut even = 0.0;
    for k in 1..panels {
        let v = f(lo + k as f64 * h, Side::At)?;
        if k % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    Ok(Accum {
        ends: f(lo, Side::At)? + f(hi, right)?,
        odd,
        even,
        panels,
    })
}

fn refine<F>(f: &mut F, acc: &mut Accum, lo: f64, hi: f64) -> Result<()>
where
    F: FnMut(f64, Side) -> Result<f64>,
{
    let panels = acc.panels * 2;
    let h = (hi - lo) / panels as f64;
    let mut odd = 0.0;
    for k in (1..panels).step_by(2) {
        odd += f(lo + k as f64 * h, Side::At)?;
    }
    acc.even += acc.odd;
    acc.odd = odd;
    acc.panels = panels;
    Ok(())
}

/// Integrates `f` over `[lo, hi]`, doubling the panel count until two
/// successive estimates agree within `tol`. Returns the estimate together
/// with the panel count that achieved it.
pub fn adaptive_simpson<F>(mut f: F, lo: f64, hi: f64, right: Side, tol: f64) -> Result<(f64, usize)>
where
    F: FnMut(f64, Side) -> Result<f64>,
{
    if hi == lo {
        return Ok((0.0, 0));
    }
    let mut acc = start(&mut f, lo, hi, right, MIN_PANELS)?;
    let mut prev = acc.estimate(lo, hi);
    loop {
        refine(&mut f, &mut acc, lo, hi)?;
        let est = acc.estimate(lo, hi);
        let change = (est - prev).abs();
        if !est.is_finite() {
            return Err(Error::QuadratureTolerance {
                lo,
                hi,
                estimate: est,
                change,
            });
        }
        if change <= tol {
            return Ok((est, acc.panels));
        }
        if acc.panels >= MAX_PANELS {
            return Err(Error::QuadratureTolerance {
                lo,
                hi,
                estimate: est,
                change,
            });
        }
        prev = est;
    }
}

/// Composite Simpson with a fixed, even panel count.
pub fn simpson_fixed<F>(mut f: F, lo: f64, hi: f64, right: Side, panels: usize) -> Result<f64>
where
    F: FnMut(f64, Side) -> Result<f64>,
{
    if hi == lo || panels == 0 {
        return Ok(0.0);
    }
    let panels = panels + panels % 2;
    Ok(start(&mut f, lo, hi, right, panels)?.estimate(lo, hi))
}
