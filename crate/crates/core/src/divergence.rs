//! Univariate (Bregman-)Wasserstein divergences on quantile grids and an
//! exhaustive optimal-transport oracle for small uniform clouds.

use rayon::prelude::*;

use crate::core::{BregmanGenerator, QuantileGrid, p_norm};
use crate::error::{Error, Result};

/// Largest cloud size accepted by [`discrete_ot_oracle`] (9! assignments).
pub const OT_ORACLE_MAX: usize = 9;

/// `N` equally weighted points in `ℝⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteCloud {
    points: Vec<Vec<f64>>,
}

impl DiscreteCloud {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points.first().map(Vec::len).unwrap_or(0);
        if points.is_empty() || dim == 0 {
            return Err(Error::invalid("cloud needs at least one point of dimension ≥ 1"));
        }
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::invalid("cloud points differ in dimension"));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("cloud has non-finite coordinates"));
        }
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    /// Values of coordinate `k` across the cloud.
    pub fn coordinate(&self, k: usize) -> Vec<f64> {
        self.points.iter().map(|p| p[k]).collect()
    }
}

/// Ground cost of [`discrete_ot_oracle`].
#[derive(Debug, Clone)]
pub enum Cost {
    /// `‖x − y‖_a^p`; the oracle returns the `p`-th root of the optimal mean.
    NormPower { a: f64, p: f64 },
    /// `Σ_k B_{φ_k}(x_k, y_k)` with `x` the perturbed and `y` the reference point.
    Bregman(Vec<BregmanGenerator>),
    /// `(x − y)ᵀ diag(q) (x − y)`.
    Mahalanobis(Vec<f64>),
}

impl Cost {
    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Cost::NormPower { a, p } => {
                let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
                p_norm(&diff, *a).powf(*p)
            }
            Cost::Bregman(phis) => phis
                .iter()
                .zip(x.iter().zip(y))
                .map(|(phi, (&xi, &yi))| phi.divergence(xi, yi))
                .sum(),
            Cost::Mahalanobis(q) => q
                .iter()
                .zip(x.iter().zip(y))
                .map(|(qk, (xi, yi))| qk * (xi - yi) * (xi - yi))
                .sum(),
        }
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        let expected = match self {
            Cost::NormPower { a, p } => {
                if !(*a >= 1.0 && *p >= 1.0) {
                    return Err(Error::invalid("norm-power cost needs a ≥ 1 and p ≥ 1"));
                }
                return Ok(());
            }
            Cost::Bregman(phis) => phis.len(),
            Cost::Mahalanobis(q) => {
                if q.iter().any(|v| !(*v >= 0.0)) {
                    return Err(Error::invalid("Mahalanobis weights must be non-negative"));
                }
                q.len()
            }
        };
        if expected != dim {
            return Err(Error::invalid(format!(
                "cost is defined on dimension {expected}, clouds have dimension {dim}"
            )));
        }
        Ok(())
    }
}

/// `((1/M) Σ_j |f[j] − g[j]|^p)^{1/p}`: the comonotonic coupling is optimal
/// in one dimension.
pub fn wasserstein_1d(f: &QuantileGrid, g: &QuantileGrid, p: f64) -> Result<f64> {
    f.ensure_same_len(g)?;
    if !(p >= 1.0) {
        return Err(Error::invalid(format!("Wasserstein order must be ≥ 1, got {p}")));
    }
    let m = f.len() as f64;
    let total: f64 = f
        .values()
        .iter()
        .zip(g.values())
        .map(|(a, b)| {
            let d = (a - b).abs();
            if p == 1.0 {
                d
            } else if p == 2.0 {
                d * d
            } else {
                d.powf(p)
            }
        })
        .sum();
    Ok((total / m).powf(1.0 / p))
}

/// Bregman-Wasserstein divergence from the reference `g` to the perturbed
/// law `f` under the comonotonic coupling.
pub fn bregman_wasserstein_1d(
    f: &QuantileGrid,
    g: &QuantileGrid,
    phi: &BregmanGenerator,
) -> Result<f64> {
    f.ensure_same_len(g)?;
    Ok(bregman_on_values(f.values(), g.values(), phi))
}

pub(crate) fn bregman_on_values(f: &[f64], g: &[f64], phi: &BregmanGenerator) -> f64 {
    let total: f64 = f.iter().zip(g).map(|(&a, &b)| phi.divergence(a, b)).sum();
    total / f.len() as f64
}

/// Minimum average cost over all bijections between two clouds of equal size
/// (uniform weights turn transport into assignment).
///
/// `NormPower` returns the `p`-th root of the optimum; Bregman and Mahalanobis
/// costs return the raw average divergence.
pub fn discrete_ot_oracle(x: &DiscreteCloud, y: &DiscreteCloud, cost: &Cost) -> Result<f64> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::invalid(format!("cloud sizes differ: {} vs {}", n, y.len())));
    }
    if x.dim() != y.dim() {
        return Err(Error::invalid("clouds differ in dimension"));
    }
    if n > OT_ORACLE_MAX {
        return Err(Error::Capacity {
            what: "cloud size",
            got: n,
            limit: OT_ORACLE_MAX,
        });
    }
    cost.check_dim(x.dim())?;
    let mut table = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            table[i * n + j] = cost.eval(x.point(i), y.point(j));
        }
    }
    // Split on the image of the first point so each worker enumerates the
    // remaining (n-1)! permutations; the minimum is order independent.
    let best = (0..n)
        .into_par_iter()
        .map(|first| {
            let mut rest: Vec<usize> = (0..n).filter(|&j| j != first).collect();
            let head = table[first];
            let mut best = f64::INFINITY;
            for_each_permutation(&mut rest, &mut |perm| {
                let total: f64 = head
                    + perm
                        .iter()
                        .enumerate()
                        .map(|(i, &j)| table[(i + 1) * n + j])
                        .sum::<f64>();
                best = best.min(total);
            });
            best
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let mean = best / n as f64;
    Ok(match cost {
        Cost::NormPower { p, .. } => mean.powf(1.0 / p),
        _ => mean,
    })
}

/// Heap's algorithm.
fn for_each_permutation(items: &mut [usize], visit: &mut impl FnMut(&[usize])) {
    let k = items.len();
    let mut c = vec![0usize; k];
    visit(items);
    let mut i = 0;
    while i < k {
        if c[i] < i {
            if i % 2 == 0 {
                items.swap(0, i);
            } else {
                items.swap(c[i], i);
            }
            visit(items);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::quantile_from_samples;
    use proptest::prelude::*;

    fn grid(v: &[f64]) -> QuantileGrid {
        QuantileGrid::new(v.to_vec()).unwrap()
    }

    #[test]
    fn permutation_count() {
        for k in 0..7 {
            let mut items: Vec<usize> = (0..k).collect();
            let mut seen = std::collections::HashSet::new();
            for_each_permutation(&mut items, &mut |p| {
                seen.insert(p.to_vec());
            });
            assert_eq!(seen.len(), (1..=k).product::<usize>().max(1));
        }
    }

    #[test]
    fn wasserstein_examples() {
        let f = grid(&[0.0, 0.5, 1.0, 4.0]);
        assert_eq!(wasserstein_1d(&f, &f, 2.0).unwrap(), 0.0);
        for p in [1.0, 2.0, 3.5] {
            let w = wasserstein_1d(&f.shifted(-1.25), &f, p).unwrap();
            assert!((w - 1.25).abs() < 1e-12);
        }
        let a = grid(&[0.0, 2.0]);
        let b = grid(&[1.0, 5.0]);
        assert!((wasserstein_1d(&a, &b, 2.0).unwrap() - 5f64.sqrt()).abs() < 1e-12);
        assert!(wasserstein_1d(&a, &grid(&[0.0, 1.0, 2.0]), 2.0).is_err());
    }

    #[test]
    fn bregman_examples() {
        let f = grid(&[-1.0, 0.0, 3.0]);
        let q = BregmanGenerator::quadratic(1.0).unwrap();
        assert_eq!(bregman_wasserstein_1d(&f, &f, &q).unwrap(), 0.0);
        let bw = bregman_wasserstein_1d(&f.shifted(0.7), &f, &q).unwrap();
        assert!((bw - 0.49).abs() < 1e-12);
        let one = grid(&[1.0, 1.0]);
        let zero = grid(&[0.0, 0.0]);
        let quartic = BregmanGenerator::quartic();
        assert_eq!(bregman_wasserstein_1d(&one, &zero, &quartic).unwrap(), 1.0);
    }

    #[test]
    fn quartic_is_asymmetric_quadratic_is_not() {
        let f = grid(&[0.0, 1.0, 2.0]);
        let g = grid(&[0.5, 0.5, 0.5]);
        let quartic = BregmanGenerator::quartic();
        let q = BregmanGenerator::quadratic(2.0).unwrap();
        let fwd = bregman_wasserstein_1d(&f, &g, &quartic).unwrap();
        let bwd = bregman_wasserstein_1d(&g, &f, &quartic).unwrap();
        assert!((fwd - bwd).abs() > 1e-3);
        let fwd = bregman_wasserstein_1d(&f, &g, &q).unwrap();
        let bwd = bregman_wasserstein_1d(&g, &f, &q).unwrap();
        assert!((fwd - bwd).abs() < 1e-14);
    }

    #[test]
    fn oracle_examples() {
        let x = DiscreteCloud::new(vec![vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let y = DiscreteCloud::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let c = Cost::NormPower { a: 2.0, p: 2.0 };
        assert_eq!(discrete_ot_oracle(&x, &x, &c).unwrap(), 0.0);
        assert!((discrete_ot_oracle(&x, &y, &c).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn oracle_errors() {
        let ten = DiscreteCloud::new((0..10).map(|i| vec![i as f64]).collect()).unwrap();
        let c = Cost::NormPower { a: 2.0, p: 2.0 };
        assert!(matches!(
            discrete_ot_oracle(&ten, &ten, &c),
            Err(Error::Capacity { .. })
        ));
        let two = DiscreteCloud::new(vec![vec![0.0], vec![1.0]]).unwrap();
        let three = DiscreteCloud::new(vec![vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        assert!(discrete_ot_oracle(&two, &three, &c).is_err());
        assert!(DiscreteCloud::new(vec![]).is_err());
    }

    #[test]
    fn mahalanobis_identity_is_squared_euclidean() {
        let x = DiscreteCloud::new(vec![vec![0.3, -1.0], vec![2.0, 0.5], vec![-0.4, 1.1]]).unwrap();
        let y = DiscreteCloud::new(vec![vec![1.0, 0.0], vec![0.2, 0.2], vec![0.0, -2.0]]).unwrap();
        let m = discrete_ot_oracle(&x, &y, &Cost::Mahalanobis(vec![1.0, 1.0])).unwrap();
        let w = discrete_ot_oracle(&x, &y, &Cost::NormPower { a: 2.0, p: 2.0 }).unwrap();
        assert!((m - w * w).abs() < 1e-12);
    }

    fn arb_grid(m: usize) -> impl Strategy<Value = QuantileGrid> {
        prop::collection::vec(-10.0f64..10.0, m).prop_map(|mut v| {
            v.sort_by(f64::total_cmp);
            QuantileGrid::new(v).unwrap()
        })
    }

    proptest! {
        #[test]
        fn one_dimensional_oracle_is_comonotonic(xs in prop::collection::vec(-5.0f64..5.0, 2..7),
                                                 ys_seed in prop::collection::vec(-5.0f64..5.0, 7)) {
            let n = xs.len();
            let ys = &ys_seed[..n];
            let cx = DiscreteCloud::new(xs.iter().map(|&v| vec![v]).collect()).unwrap();
            let cy = DiscreteCloud::new(ys.iter().map(|&v| vec![v]).collect()).unwrap();
            let ot = discrete_ot_oracle(&cx, &cy, &Cost::NormPower { a: 2.0, p: 2.0 }).unwrap();
            let w = wasserstein_1d(
                &quantile_from_samples(&xs, n).unwrap(),
                &quantile_from_samples(ys, n).unwrap(),
                2.0,
            ).unwrap();
            prop_assert!((ot - w).abs() < 1e-12);
        }

        #[test]
        fn triangle_inequality(f in arb_grid(16), g in arb_grid(16), h in arb_grid(16)) {
            for p in [1.0, 2.0] {
                let fg = wasserstein_1d(&f, &g, p).unwrap();
                let gh = wasserstein_1d(&g, &h, p).unwrap();
                let fh = wasserstein_1d(&f, &h, p).unwrap();
                prop_assert!(fh <= fg + gh + 1e-10);
            }
        }

        #[test]
        fn bregman_non_negative(f in arb_grid(12), g in arb_grid(12), c in 0.1f64..5.0) {
            for phi in [BregmanGenerator::quadratic(c).unwrap(), BregmanGenerator::quartic()] {
                prop_assert!(bregman_wasserstein_1d(&f, &g, &phi).unwrap() >= 0.0);
            }
        }
    }
}
