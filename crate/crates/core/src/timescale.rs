//! Bounded time scales: finite unions of isolated points and closed intervals.
//!
//! A [`TimeScale`] is stored as a sorted list of pairwise disjoint
//! [`Component`]s. Components closer than [`EPS_MEMBER`] are merged when the
//! scale is built, so two neighbouring components are always separated by a
//! genuine gap. Every point that is not inside an interval is therefore
//! isolated from the right or from the left, which is all the jump operators
//! need to know.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance used for membership tests and endpoint snapping.
pub const EPS_MEMBER: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    Point(f64),
    Interval(f64, f64),
}

impl Component {
    pub fn lo(&self) -> f64 {
        match *self {
            Component::Point(p) => p,
            Component::Interval(lo, _) => lo,
        }
    }

    pub fn hi(&self) -> f64 {
        match *self {
            Component::Point(p) => p,
            Component::Interval(_, hi) => hi,
        }
    }

    fn is_interval(&self) -> bool {
        matches!(self, Component::Interval(..))
    }
}

/// Left/right structure of a point, as returned by [`TimeScale::classify`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PointClass {
    pub right_scattered: bool,
    pub left_scattered: bool,
    pub is_min: bool,
    pub is_max: bool,
}

impl PointClass {
    pub fn right_dense(&self) -> bool {
        !self.right_scattered
    }

    pub fn left_dense(&self) -> bool {
        !self.left_scattered
    }

    pub fn isolated(&self) -> bool {
        self.left_scattered && self.right_scattered
    }

    pub fn dense(&self) -> bool {
        self.left_dense() && self.right_dense()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeScale {
    components: Arc<[Component]>,
}

impl TimeScale {
    /// Builds a time scale from arbitrary components, sorting them and merging
    /// any that touch or overlap.
    pub fn new(components: impl IntoIterator<Item = Component>) -> Result<Self> {
        let mut comps: Vec<Component> = components.into_iter().collect();
        if comps.is_empty() {
            return Err(Error::InvalidScale("time scale must be nonempty".into()));
        }
        for c in &comps {
            match *c {
                Component::Point(p) if !p.is_finite() => {
                    return Err(Error::InvalidScale(format!("non-finite point {p}")))
                }
                Component::Interval(lo, hi) if !(lo.is_finite() && hi.is_finite()) => {
                    return Err(Error::InvalidScale(format!(
                        "non-finite interval [{lo}, {hi}]"
                    )))
                }
                Component::Interval(lo, hi) if lo >= hi => {
                    return Err(Error::InvalidScale(format!(
                        "interval [{lo}, {hi}] needs lo < hi"
                    )))
                }
                _ => {}
            }
        }
        comps.sort_by(|x, y| x.lo().total_cmp(&y.lo()));

        let mut merged: Vec<Component> = Vec::with_capacity(comps.len());
        for c in comps {
            match merged.last_mut() {
                Some(last) if c.lo() <= last.hi() + EPS_MEMBER => {
                    let lo = last.lo();
                    let hi = last.hi().max(c.hi());
                    *last = if last.is_interval() || c.is_interval() || hi - lo > EPS_MEMBER {
                        Component::Interval(lo, hi)
                    } else {
                        Component::Point(lo)
                    };
                }
                _ => merged.push(c),
            }
        }
        Ok(Self {
            components: merged.into(),
        })
    }

    /// Convenience constructor for a purely scattered scale.
    pub fn from_points(points: &[f64]) -> Result<Self> {
        Self::new(points.iter().map(|&p| Component::Point(p)))
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new([Component::Interval(lo, hi)])
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn min(&self) -> f64 {
        self.components[0].lo()
    }

    pub fn max(&self) -> f64 {
        self.components[self.components.len() - 1].hi()
    }

    pub fn is_purely_scattered(&self) -> bool {
        self.components.iter().all(|c| !c.is_interval())
    }

    /// Index of the component holding `t`, if any.
    pub fn locate(&self, t: f64) -> Option<usize> {
        if !t.is_finite() {
            return None;
        }
        let idx = self
            .components
            .partition_point(|c| c.lo() <= t + EPS_MEMBER);
        if idx == 0 {
            return None;
        }
        let i = idx - 1;
        (t <= self.components[i].hi() + EPS_MEMBER).then_some(i)
    }

    pub fn contains(&self, t: f64) -> bool {
        self.locate(t).is_some()
    }

    /// The stored representative of `t`: exact grid value for points, the
    /// snapped endpoint for values within [`EPS_MEMBER`] of an interval end.
    pub fn canonical(&self, t: f64) -> Result<f64> {
        let i = self.locate(t).ok_or(Error::NotMember { t })?;
        Ok(self.snap(i, t))
    }

    fn snap(&self, i: usize, t: f64) -> f64 {
        match self.components[i] {
            Component::Point(p) => p,
            Component::Interval(lo, hi) => {
                if (t - lo).abs() <= EPS_MEMBER {
                    lo
                } else if (hi - t).abs() <= EPS_MEMBER {
                    hi
                } else {
                    t
                }
            }
        }
    }

    fn member(&self, t: f64) -> Result<(usize, f64)> {
        let i = self.locate(t).ok_or(Error::NotMember { t })?;
        Ok((i, self.snap(i, t)))
    }

    pub fn sigma(&self, t: f64) -> Result<f64> {
        let (i, t) = self.member(t)?;
        let next = self.components.get(i + 1).map(Component::lo);
        Ok(match self.components[i] {
            Component::Point(p) => next.unwrap_or(p),
            Component::Interval(_, hi) if t < hi => t,
            Component::Interval(_, hi) => next.unwrap_or(hi),
        })
    }

    pub fn rho(&self, t: f64) -> Result<f64> {
        let (i, t) = self.member(t)?;
        let prev = i.checked_sub(1).map(|j| self.components[j].hi());
        Ok(match self.components[i] {
            Component::Point(p) => prev.unwrap_or(p),
            Component::Interval(lo, _) if t > lo => t,
            Component::Interval(lo, _) => prev.unwrap_or(lo),
        })
    }

    pub fn graininess(&self, t: f64) -> Result<f64> {
        let s = self.sigma(t)?;
        Ok(s - self.canonical(t)?)
    }

    pub fn classify(&self, t: f64) -> Result<PointClass> {
        let c = self.canonical(t)?;
        Ok(PointClass {
            right_scattered: self.sigma(c)? > c,
            left_scattered: self.rho(c)? < c,
            is_min: c == self.min(),
            is_max: c == self.max(),
        })
    }

    /// T^κ: drops the maximum when it is left-scattered.
    pub fn kappa(&self) -> TimeScale {
        let n = self.components.len();
        if n > 1 && !self.components[n - 1].is_interval() {
            Self {
                components: self.components[..n - 1].into(),
            }
        } else {
            self.clone()
        }
    }

    pub fn in_kappa(&self, t: f64) -> Result<bool> {
        let c = self.canonical(t)?;
        let n = self.components.len();
        Ok(!(n > 1 && c == self.max() && !self.components[n - 1].is_interval()))
    }

    /// Points with no dense continuation to their right: every isolated
    /// component plus the right end of each interval followed by a gap.
    pub fn enumerate_scattered(&self) -> Vec<f64> {
        let n = self.components.len();
        self.components
            .iter()
            .enumerate()
            .filter_map(|(i, c)| match *c {
                Component::Point(p) => Some(p),
                Component::Interval(_, hi) if i + 1 < n => Some(hi),
                Component::Interval(..) => None,
            })
            .collect()
    }

    pub fn dense_segments(&self) -> Vec<(f64, f64)> {
        self.components
            .iter()
            .filter_map(|c| match *c {
                Component::Interval(lo, hi) => Some((lo, hi)),
                Component::Point(_) => None,
            })
            .collect()
    }

    /// `[a, b] ∩ T`. Both ends must be members.
    pub fn restrict(&self, a: f64, b: f64) -> Result<TimeScale> {
        let a = self.canonical(a)?;
        let b = self.canonical(b)?;
        if a > b {
            return Err(Error::InvalidScale(format!("restriction needs a <= b, got [{a}, {b}]")));
        }
        let comps = self.components.iter().filter_map(|c| {
            let lo = c.lo().max(a);
            let hi = c.hi().min(b);
            if lo > hi {
                None
            } else if c.is_interval() && hi > lo {
                Some(Component::Interval(lo, hi))
            } else {
                Some(Component::Point(lo))
            }
        });
        TimeScale::new(comps)
    }

    /// The component `t` lives in, as `Some((lo, hi))` for an interval.
    pub fn segment_of(&self, t: f64) -> Result<Option<(f64, f64)>> {
        let (i, _) = self.member(t)?;
        Ok(match self.components[i] {
            Component::Interval(lo, hi) => Some((lo, hi)),
            Component::Point(_) => None,
        })
    }
}

/// Compact descriptions of the common scales.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ScaleGenerator {
    Integers {
        a: i64,
        b: i64,
    },
    #[serde(rename = "hstep")]
    HStep {
        a: f64,
        b: f64,
        h: f64,
    },
    #[serde(rename = "qscale")]
    QScale {
        q: f64,
        k_min: i32,
        k_max: i32,
    },
    Union(Vec<Component>),
}

impl ScaleGenerator {
    pub fn generate(&self) -> Result<TimeScale> {
        match *self {
            ScaleGenerator::Integers { a, b } => {
                if a > b {
                    return Err(Error::InvalidScale(format!("integers {a}..{b} is empty")));
                }
                TimeScale::new((a..=b).map(|k| Component::Point(k as f64)))
            }
            ScaleGenerator::HStep { a, b, h } => {
                if !(h > 0.0 && h.is_finite()) || !(b >= a) {
                    return Err(Error::InvalidScale(format!("bad hstep a={a} b={b} h={h}")));
                }
                let n = ((b - a) / h).round();
                if ((a + n * h) - b).abs() > 1e-9 * b.abs().max(1.0) {
                    return Err(Error::InvalidScale(format!(
                        "({b} - {a}) is not a multiple of h = {h}"
                    )));
                }
                let n = n as u64;
                TimeScale::new((0..=n).map(|k| {
                    Component::Point(if k == n { b } else { a + k as f64 * h })
                }))
            }
            ScaleGenerator::QScale { q, k_min, k_max } => {
                if !(q > 1.0 && q.is_finite()) || k_min > k_max {
                    return Err(Error::InvalidScale(format!(
                        "bad qscale q={q} k={k_min}..{k_max}"
                    )));
                }
                TimeScale::new((k_min..=k_max).map(|k| Component::Point(q.powi(k))))
            }
            ScaleGenerator::Union(ref comps) => TimeScale::new(comps.iter().copied()),
        }
    }
}

/// JSON wire form of a time scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScaleSpec {
    Components(ComponentsSpec),
    Generator(GeneratorSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentsSpec {
    pub components: Vec<Component>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub generator: ScaleGenerator,
}

impl ScaleSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::InvalidScale(format!("bad time-scale JSON: {e}")))
    }

    pub fn build(&self) -> Result<TimeScale> {
        match self {
            ScaleSpec::Components(c) => TimeScale::new(c.components.iter().copied()),
            ScaleSpec::Generator(g) => g.generator.generate(),
        }
    }
}

impl From<&TimeScale> for ScaleSpec {
    fn from(ts: &TimeScale) -> Self {
        ScaleSpec::Components(ComponentsSpec {
            components: ts.components().to_vec(),
        })
    }
}
