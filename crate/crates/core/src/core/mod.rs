//! Domain types shared by every solver, plus signed Choquet integrals on grids.

mod aggregation;
mod distortion;
mod generator;
mod grid;
mod report;

pub use aggregation::{AggregationBuilder, AggregationSpec, NonlinearFn, conjugate_exponent, p_norm};
pub use distortion::{
    DistortionWeight, Segment, make_es_gamma, make_ier_gamma, make_piecewise_gamma,
};
pub use generator::{BregmanGenerator, GeneratorKind};
pub use grid::{DEFAULT_RESOLUTION, QuantileGrid, midpoint, quantile_from_samples};
pub use report::{BoundMethod, BoundReport, BudgetUnit, ComponentLambdas};

/// Signed Choquet integral `∫ γ(u) F⁻¹(u) du` by the midpoint rule on the
/// grid of `q`, with `γ` evaluated exactly from its segments.
pub fn choquet_integral(q: &QuantileGrid, gamma: &DistortionWeight) -> f64 {
    weighted_mean(q.values(), &gamma.sample(q.len()))
}

/// `(1/M) Σ w[j]·v[j]` for an arbitrary (not necessarily monotone) grid function.
pub(crate) fn weighted_mean(values: &[f64], weights: &[f64]) -> f64 {
    debug_assert_eq!(values.len(), weights.len());
    let total: f64 = values.iter().zip(weights).map(|(v, w)| v * w).sum();
    total / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ContinuousCDF, Continuous, Normal};

    fn uniform_grid(m: usize) -> QuantileGrid {
        QuantileGrid::from_fn(m, |u| u).unwrap()
    }

    #[test]
    fn expectation_of_uniform() {
        let gamma = make_piecewise_gamma(&[(0.0, 1.0, 1.0)]).unwrap();
        let v = choquet_integral(&uniform_grid(1000), &gamma);
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn es_of_uniform() {
        let m = 1000;
        let gamma = make_es_gamma(0.95).unwrap();
        let v = choquet_integral(&uniform_grid(m), &gamma);
        assert!((v - 0.975).abs() <= 0.5 / m as f64);
    }

    #[test]
    fn es_of_standard_normal() {
        // ES_α of N(0,1) is pdf(z_α)/(1-α).
        let n = Normal::standard();
        let alpha = 0.95;
        let exact = n.pdf(n.inverse_cdf(alpha)) / (1.0 - alpha);
        assert!((exact - 2.0627).abs() < 1e-4);
        let grid = QuantileGrid::from_fn(100_000, |u| n.inverse_cdf(u)).unwrap();
        let v = choquet_integral(&grid, &make_es_gamma(alpha).unwrap());
        assert!((v - exact).abs() < 2e-3, "{v} vs {exact}");
    }

    #[test]
    fn translation_picks_up_gamma_mass() {
        let grid = QuantileGrid::from_fn(400, |u| (u * 7.0).sinh()).unwrap();
        let c = 3.25;
        let shifted = grid.shifted(c);
        for gamma in [make_es_gamma(0.95).unwrap(), make_ier_gamma(0.75).unwrap()] {
            let lhs = choquet_integral(&shifted, &gamma);
            let rhs = choquet_integral(&grid, &gamma) + c * gamma.integral();
            assert!((lhs - rhs).abs() < 1e-10);
        }
    }
}
