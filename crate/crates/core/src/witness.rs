//! Explicit perturbations attaining prescribed aggregate values, and
//! sample-level checks of the inclusion `g(ball around X) ⊆ ball around g(X)`.
//!
//! Clouds are paired point by point (the identity coupling), whose cost
//! bounds the optimal transport cost from above.

use serde::{Deserialize, Serialize};

use crate::bounds::MahalanobisSpec;
use crate::core::{AggregationSpec, conjugate_exponent};
use crate::divergence::{Cost, DiscreteCloud, discrete_ot_oracle};
use crate::error::{Error, Result};

/// Absolute slack used by the inclusion verdicts.
pub const INCLUSION_TOL: f64 = 1e-9;

/// Box `∏ [lo_k, hi_k]` for the coordinates of the nonlinear block, in the
/// order of [`AggregationSpec::nonlinear_idx`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportBox {
    bounds: Vec<(f64, f64)>,
}

impl SupportBox {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if let Some((lo, hi)) = bounds.iter().find(|(lo, hi)| !(lo <= hi)) {
            return Err(Error::invalid(format!("box side [{lo}, {hi}] is empty")));
        }
        Ok(Self { bounds })
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    /// Whether the nonlinear coordinates of `x` lie in the box.
    pub fn contains(&self, x: &[f64], agg: &AggregationSpec) -> bool {
        agg.nonlinear_idx()
            .iter()
            .zip(&self.bounds)
            .all(|(&i, &(lo, hi))| lo <= x[i] && x[i] <= hi)
    }
}

fn mean_power_root(d: impl Iterator<Item = f64>, p: f64) -> f64 {
    let (sum, n) = d.fold((0.0, 0usize), |(s, n), v| (s + v.abs().powf(p), n + 1));
    (sum / n as f64).powf(1.0 / p)
}

/// Perturb the linear block of every point of `x_samples` so that
/// `g(Z_i) = z_target[i]`, moving each point by `|z_i − g(x_i)| / ‖β‖_b` in the
/// `a`-norm.
///
/// For `a > 1` the direction is `v = sgn(β)|β|^{b/a}`; for `a = 1` only the
/// coordinate with the largest `|β_k|` moves.
pub fn construct_witness(
    x_samples: &DiscreteCloud,
    agg: &AggregationSpec,
    z_target: &[f64],
    epsilon: f64,
    p: f64,
) -> Result<DiscreteCloud> {
    if z_target.len() != x_samples.len() {
        return Err(Error::invalid(format!(
            "{} targets for {} points",
            z_target.len(),
            x_samples.len()
        )));
    }
    if x_samples.dim() != agg.n() {
        return Err(Error::invalid("cloud dimension differs from the aggregation"));
    }
    if !(p >= 1.0) {
        return Err(Error::invalid(format!("p must be at least 1, got {p}")));
    }
    let beta_norm = agg.beta_norm();
    if beta_norm == 0.0 {
        return Err(Error::NoWitness(
            "the linear block is zero, so g cannot be moved off g(X)".into(),
        ));
    }
    let residual: Vec<f64> = x_samples
        .points()
        .iter()
        .zip(z_target)
        .map(|(x, z)| z - agg.eval(x))
        .collect();
    let norm = mean_power_root(residual.iter().copied(), p);
    let budget = beta_norm * epsilon;
    if norm > budget * (1.0 + 1e-12) {
        return Err(Error::InfeasibleTarget { norm, budget });
    }

    let a = agg.norm_exponent();
    let beta = agg.beta();
    let direction: Vec<f64> = if a == 1.0 {
        let j = (0..beta.len())
            .max_by(|&i, &j| beta[i].abs().total_cmp(&beta[j].abs()))
            .expect("non-zero beta");
        let mut v = vec![0.0; beta.len()];
        v[j] = beta[j].signum();
        v
    } else {
        let exponent = conjugate_exponent(a) / a;
        beta.iter().map(|b| b.signum() * b.abs().powf(exponent)).collect()
    };
    let scale: f64 = beta.iter().zip(&direction).map(|(b, v)| b * v).sum();

    let points = x_samples
        .points()
        .iter()
        .zip(&residual)
        .map(|(x, d)| {
            let mut z = x.clone();
            for (&k, v) in agg.linear_idx().iter().zip(&direction) {
                z[k] += v * d / scale;
            }
            z
        })
        .collect();
    DiscreteCloud::new(points)
}

/// `((1/N) Σ ‖Z_i − X_i‖_a^p)^{1/p}` for the identity coupling.
pub fn identity_coupling_cost(x: &DiscreteCloud, z: &DiscreteCloud, a: f64, p: f64) -> f64 {
    let dists = x.points().iter().zip(z.points()).map(|(xi, zi)| {
        let d: Vec<f64> = xi.iter().zip(zi).map(|(u, v)| u - v).collect();
        crate::core::p_norm(&d, a)
    });
    mean_power_root(dists, p)
}

/// `W_p` between two equal-size empirical laws on the line.
fn empirical_wasserstein(u: &[f64], v: &[f64], p: f64) -> f64 {
    let mut u = u.to_vec();
    let mut v = v.to_vec();
    u.sort_by(f64::total_cmp);
    v.sort_by(f64::total_cmp);
    mean_power_root(u.iter().zip(&v).map(|(a, b)| a - b), p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclusionVerdict {
    /// Optimal `W_p` between the clouds in the `a`-norm.
    pub multivariate_distance: f64,
    /// `W_p(g(Z), g(X))`.
    pub univariate_distance: f64,
    pub in_ball: bool,
    pub image_in_ball: bool,
    /// `in_ball ⇒ image_in_ball`.
    pub implication_holds: bool,
    /// Whether every `Z_i` lies in the support box, when one is given.
    pub support_ok: Option<bool>,
}

/// Check that a cloud within `W_p`-radius `epsilon` of `x_samples` has an
/// image within `K·epsilon` of `g(X)`. Both clouds must have at most
/// [`crate::divergence::OT_ORACLE_MAX`] points.
pub fn verify_inclusion(
    x_samples: &DiscreteCloud,
    z_samples: &DiscreteCloud,
    agg: &AggregationSpec,
    epsilon: f64,
    p: f64,
    support: Option<&SupportBox>,
) -> Result<InclusionVerdict> {
    let a = agg.norm_exponent();
    let multivariate_distance = discrete_ot_oracle(z_samples, x_samples, &Cost::NormPower { a, p })?;
    let gz: Vec<f64> = z_samples.points().iter().map(|z| agg.eval(z)).collect();
    let gx: Vec<f64> = x_samples.points().iter().map(|x| agg.eval(x)).collect();
    let univariate_distance = empirical_wasserstein(&gz, &gx, p);
    let in_ball = multivariate_distance <= epsilon + INCLUSION_TOL;
    let image_in_ball = univariate_distance <= agg.lipschitz() * epsilon + INCLUSION_TOL;
    let support_ok = support.map(|b| z_samples.points().iter().all(|z| b.contains(z, agg)));
    Ok(InclusionVerdict {
        multivariate_distance,
        univariate_distance,
        in_ball,
        image_in_ball,
        implication_holds: !in_ball || image_in_ball,
        support_ok,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MahalanobisVerdict {
    /// Optimal `E[(Z−X)ᵀQ(Z−X)]`.
    pub multivariate_divergence: f64,
    /// `q_min · W₂²(g(Z), g(X))`.
    pub image_divergence: f64,
    pub in_ball: bool,
    pub image_in_ball: bool,
    pub implication_holds: bool,
}

/// Mahalanobis analogue of [`verify_inclusion`]: a divergence budget
/// `epsilon` around `X` maps into the budget `K²·epsilon` for the generator
/// `q_min·x²` around `g(X)`.
pub fn verify_mahalanobis_inclusion(
    x_samples: &DiscreteCloud,
    z_samples: &DiscreteCloud,
    agg: &AggregationSpec,
    q: &MahalanobisSpec,
    epsilon: f64,
) -> Result<MahalanobisVerdict> {
    let multivariate_divergence =
        discrete_ot_oracle(z_samples, x_samples, &Cost::Mahalanobis(q.q_diag().to_vec()))?;
    let gz: Vec<f64> = z_samples.points().iter().map(|z| agg.eval(z)).collect();
    let gx: Vec<f64> = x_samples.points().iter().map(|x| agg.eval(x)).collect();
    let image_divergence = q.q_min() * empirical_wasserstein(&gz, &gx, 2.0).powi(2);
    let k = agg.lipschitz();
    let in_ball = multivariate_divergence <= epsilon + INCLUSION_TOL;
    let image_in_ball = image_divergence <= k * k * epsilon + INCLUSION_TOL;
    Ok(MahalanobisVerdict {
        multivariate_divergence,
        image_divergence,
        in_ball,
        image_in_ball,
        implication_holds: !in_ball || image_in_ball,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(points: &[&[f64]]) -> DiscreteCloud {
        DiscreteCloud::new(points.iter().map(|p| p.to_vec()).collect()).unwrap()
    }

    #[test]
    fn euclidean_example() {
        let agg = AggregationSpec::linear(vec![3.0, 4.0], 2.0).unwrap();
        let x = cloud(&[&[0.0, 0.0]]);
        let z = construct_witness(&x, &agg, &[5.0], 1.0, 2.0).unwrap();
        assert!((z.point(0)[0] - 0.6).abs() < 1e-15);
        assert!((z.point(0)[1] - 0.8).abs() < 1e-15);
        assert_eq!(agg.eval(z.point(0)), 5.0);
        assert!((identity_coupling_cost(&x, &z, 2.0, 2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_residual_is_identity() {
        let agg = AggregationSpec::linear(vec![1.0, -2.0, 0.5], 2.0).unwrap();
        let x = cloud(&[&[1.0, 2.0, 3.0], &[-1.0, 0.5, 2.0]]);
        let targets: Vec<f64> = x.points().iter().map(|p| agg.eval(p)).collect();
        let z = construct_witness(&x, &agg, &targets, 0.1, 2.0).unwrap();
        assert_eq!(z, x);
    }

    #[test]
    fn l1_moves_largest_coefficient() {
        let agg = AggregationSpec::linear(vec![1.0, -2.0], 1.0).unwrap();
        let x = cloud(&[&[0.0, 0.0], &[1.0, 1.0]]);
        let z = construct_witness(&x, &agg, &[1.0, -2.0], 1.0, 2.0).unwrap();
        assert_eq!(z.point(0), &[0.0, -0.5]);
        // g(x_2) = -1, residual -1, moves by sgn(-2)·(-1)/2
        assert_eq!(z.point(1), &[1.0, 1.5]);
    }

    #[test]
    fn infeasible_and_degenerate() {
        let agg = AggregationSpec::linear(vec![3.0, 4.0], 2.0).unwrap();
        let x = cloud(&[&[0.0, 0.0]]);
        assert!(matches!(
            construct_witness(&x, &agg, &[6.0], 1.0, 2.0),
            Err(Error::InfeasibleTarget { .. })
        ));
        // g(x) = sin(x_1): the image is confined to [-1, 1], and g(X) + 3 has
        // no preimage
        let g = AggregationSpec::builder(1)
            .nonlinear(vec![0], |x| x[0].sin(), 1.0)
            .build()
            .unwrap();
        let x = cloud(&[&[0.3], &[1.2]]);
        let targets: Vec<f64> = x.points().iter().map(|p| g.eval(p) + 3.0).collect();
        assert!(matches!(
            construct_witness(&x, &g, &targets, 10.0, 2.0),
            Err(Error::NoWitness(_))
        ));
    }

    #[test]
    fn full_budget_witness_is_sandwiched() {
        let agg = AggregationSpec::linear(vec![1.0, 2.0, -1.0], 2.0).unwrap();
        let x = cloud(&[&[0.0, 1.0, 2.0], &[1.0, -1.0, 0.0], &[2.0, 0.5, -1.0], &[-1.0, 0.0, 1.0]]);
        let eps = 0.7;
        let shift = agg.beta_norm() * eps;
        let targets: Vec<f64> = x.points().iter().map(|p| agg.eval(p) + shift).collect();
        let z = construct_witness(&x, &agg, &targets, eps, 2.0).unwrap();
        let v = verify_inclusion(&x, &z, &agg, eps, 2.0, None).unwrap();
        assert!(v.in_ball && v.implication_holds);
        assert!((v.univariate_distance - shift).abs() < 1e-9);
    }

    #[test]
    fn identical_clouds() {
        let agg = AggregationSpec::linear(vec![1.0, 1.0], 2.0).unwrap();
        let x = cloud(&[&[0.0, 1.0], &[2.0, 3.0], &[1.0, 1.0]]);
        let b = SupportBox::new(vec![]).unwrap();
        let v = verify_inclusion(&x, &x, &agg, 0.0, 2.0, Some(&b)).unwrap();
        assert_eq!(v.multivariate_distance, 0.0);
        assert_eq!(v.univariate_distance, 0.0);
        assert!(v.implication_holds);
        assert_eq!(v.support_ok, Some(true));
    }

    #[test]
    fn support_box_membership() {
        let g = AggregationSpec::builder(2)
            .nonlinear(vec![0], |x| x[0].max(0.0), 1.0)
            .linear(vec![1], vec![2.0])
            .build()
            .unwrap();
        let b = SupportBox::new(vec![(-1.0, 1.0)]).unwrap();
        assert!(b.contains(&[0.5, 100.0], &g));
        assert!(!b.contains(&[1.5, 0.0], &g));
        assert!(SupportBox::new(vec![(1.0, 0.0)]).is_err());
    }

    #[test]
    fn mahalanobis_inclusion() {
        let agg = AggregationSpec::linear(vec![1.0, -4.0], 2.0).unwrap();
        let q = MahalanobisSpec::new(vec![1.0, 4.0]).unwrap();
        let x = cloud(&[&[0.0, 1.0], &[2.0, 3.0], &[1.0, -1.0]]);
        let z = cloud(&[&[0.3, 1.1], &[1.8, 3.2], &[1.0, -0.7]]);
        let eps = discrete_ot_oracle(&z, &x, &Cost::Mahalanobis(vec![1.0, 4.0])).unwrap();
        let v = verify_mahalanobis_inclusion(&x, &z, &agg, &q, eps).unwrap();
        assert!(v.in_ball && v.image_in_ball);
    }
}
