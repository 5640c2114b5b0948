use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of grid cells; every breakpoint of the built-in distortion
/// weights is a multiple of `1/DEFAULT_RESOLUTION`.
pub const DEFAULT_RESOLUTION: usize = 10_000;

/// Midpoint `u_j = (2j+1)/(2M)` of cell `j` (zero based).
#[inline]
pub fn midpoint(j: usize, m: usize) -> f64 {
    (2 * j + 1) as f64 / (2 * m) as f64
}

/// A non-decreasing quantile function sampled at the midpoints of a uniform
/// partition of `(0,1)` into `M ≥ 2` cells.
///
/// Left-continuity of the underlying function has no grid counterpart; the
/// representation only keeps the midpoint values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct QuantileGrid {
    values: Vec<f64>,
}

impl QuantileGrid {
    /// Rejects (does not repair) non-monotone or non-finite input.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid(format!(
                "quantile grid needs at least 2 cells, got {}",
                values.len()
            )));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite quantile value at cell {j}")));
        }
        if let Some(j) = values.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::invalid(format!(
                "quantile values decrease between cells {j} and {}",
                j + 1
            )));
        }
        Ok(Self { values })
    }

    /// Samples `f` at the `m` midpoints.
    pub fn from_fn(m: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new((0..m).map(|j| f(midpoint(j, m))).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn midpoints(&self) -> impl Iterator<Item = f64> + '_ {
        let m = self.len();
        (0..m).map(move |j| midpoint(j, m))
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v + c).collect(),
        }
    }

    pub(crate) fn ensure_same_len(&self, other: &Self) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::invalid(format!(
                "grid resolutions differ: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for QuantileGrid {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<QuantileGrid> for Vec<f64> {
    fn from(grid: QuantileGrid) -> Self {
        grid.values
    }
}

/// Left-continuous empirical quantile on an `m`-cell grid:
/// `values[j] = X_(⌈u_j·N⌉)` from the sorted sample.
pub fn quantile_from_samples(samples: &[f64], m: usize) -> Result<QuantileGrid> {
    if samples.is_empty() {
        return Err(Error::invalid("empty sample"));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("sample contains non-finite values"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len();
    // ⌈(2j+1)·N / (2M)⌉ in integers so the rank never suffers rounding.
    let values = (0..m)
        .map(|j| {
            let rank = ((2 * j + 1) * n).div_ceil(2 * m);
            sorted[rank.max(1) - 1]
        })
        .collect();
    QuantileGrid::new(values)
}
