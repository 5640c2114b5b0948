use serde::{Deserialize, Serialize};

use crate::core::grid::midpoint;
use crate::error::{Error, Result};

/// Constant piece of a distortion weight on `(lo, hi]` (the first piece also
/// contains `0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
    pub value: f64,
}

/// Piecewise-constant distortion weight `γ` on `[0,1]`.
///
/// The norm, the total mass and the two shape flags are derived from the
/// segments at construction, never supplied by the caller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Segment>", into = "Vec<Segment>")]
pub struct DistortionWeight {
    segments: Vec<Segment>,
    non_decreasing: bool,
    non_negative: bool,
    l2_norm_sq: f64,
    integral: f64,
}

impl DistortionWeight {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        let (first, last) = match (segments.first(), segments.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(Error::invalid("distortion weight needs at least one segment")),
        };
        if first.lo != 0.0 || last.hi != 1.0 {
            return Err(Error::invalid("segments must start at 0 and end at 1"));
        }
        for (i, s) in segments.iter().enumerate() {
            if !(s.lo < s.hi) || !s.value.is_finite() {
                return Err(Error::invalid(format!("segment {i} is empty or has a non-finite value")));
            }
        }
        if let Some(i) = segments.windows(2).position(|w| w[0].hi != w[1].lo) {
            return Err(Error::invalid(format!(
                "gap or overlap between segments {i} and {}",
                i + 1
            )));
        }
        if segments.iter().all(|s| s.value == 0.0) {
            return Err(Error::invalid("distortion weight is identically zero"));
        }
        let non_decreasing = segments.windows(2).all(|w| w[0].value <= w[1].value);
        let non_negative = segments.iter().all(|s| s.value >= 0.0);
        let l2_norm_sq = segments.iter().map(|s| s.value * s.value * (s.hi - s.lo)).sum();
        let integral = segments.iter().map(|s| s.value * (s.hi - s.lo)).sum();
        Ok(Self {
            segments,
            non_decreasing,
            non_negative,
            l2_norm_sq,
            integral,
        })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn is_non_decreasing(&self) -> bool {
        self.non_decreasing
    }

    pub fn is_non_negative(&self) -> bool {
        self.non_negative
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.l2_norm_sq
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq.sqrt()
    }

    /// `∫₀¹ γ(u) du`.
    pub fn integral(&self) -> f64 {
        self.integral
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.segments
            .iter()
            .find(|s| u <= s.hi)
            .unwrap_or(self.segments.last().expect("non-empty"))
            .value
    }

    /// `γ` at the `m` grid midpoints.
    pub fn sample(&self, m: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(m);
        let mut seg = 0;
        for j in 0..m {
            let u = midpoint(j, m);
            while seg + 1 < self.segments.len() && u > self.segments[seg].hi {
                seg += 1;
            }
            out.push(self.segments[seg].value);
        }
        out
    }
}

impl TryFrom<Vec<Segment>> for DistortionWeight {
    type Error = Error;

    fn try_from(segments: Vec<Segment>) -> Result<Self> {
        Self::new(segments)
    }
}

impl From<DistortionWeight> for Vec<Segment> {
    fn from(w: DistortionWeight) -> Self {
        w.segments
    }
}

/// Expected Shortfall at level `alpha`: `γ = 𝟙_{u>α}/(1-α)`.
pub fn make_es_gamma(alpha: f64) -> Result<DistortionWeight> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("ES level must lie in (0,1), got {alpha}")));
    }
    DistortionWeight::new(vec![
        Segment { lo: 0.0, hi: alpha, value: 0.0 },
        Segment { lo: alpha, hi: 1.0, value: 1.0 / (1.0 - alpha) },
    ])
}

/// Inter-ES range at level `alpha ∈ (0.5, 1)`: upper-tail ES minus the
/// lower-tail average.
pub fn make_ier_gamma(alpha: f64) -> Result<DistortionWeight> {
    if !(alpha > 0.5 && alpha < 1.0) {
        return Err(Error::invalid(format!("IER level must lie in (0.5,1), got {alpha}")));
    }
    let w = 1.0 / (1.0 - alpha);
    DistortionWeight::new(vec![
        Segment { lo: 0.0, hi: 1.0 - alpha, value: -w },
        Segment { lo: 1.0 - alpha, hi: alpha, value: 0.0 },
        Segment { lo: alpha, hi: 1.0, value: w },
    ])
}

/// Builds a weight from `(lo, hi, value)` triples that partition `[0,1]`.
pub fn make_piecewise_gamma(segments: &[(f64, f64, f64)]) -> Result<DistortionWeight> {
    DistortionWeight::new(
        segments
            .iter()
            .map(|&(lo, hi, value)| Segment { lo, hi, value })
            .collect(),
    )
}
