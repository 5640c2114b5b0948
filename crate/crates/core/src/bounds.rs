//! Lower and upper bounds on the worst-case risk of an aggregated position
//! `g(X)` when the law of `X` ranges over a multivariate uncertainty ball.
//!
//! Every bound reduces to univariate worst-case problems on the quantile
//! grid of `g(X)` (or of the marginals, for separable generators), solved by
//! [`solve_lambda`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::core::{
    AggregationSpec, BoundMethod, BoundReport, BregmanGenerator, BudgetUnit, ComponentLambdas,
    DistortionWeight, QuantileGrid, choquet_integral, conjugate_exponent, p_norm,
};
use crate::error::{Error, Result};
use crate::worstcase::{SolveCase, SolveReport, solve_lambda};

/// Upper bound on the Lipschitz constant of `g(x) = h(x⁽¹⁾) + βᵀx⁽²⁾` in the
/// `a`-norm, given an `L`-Lipschitz nonlinear part:
/// `min{L + ‖β‖_b, n^{1/b}·max{L, ‖β‖_b}}`.
pub fn lipschitz_bound(l: f64, beta: &[f64], a: f64, n: usize) -> f64 {
    let b = conjugate_exponent(a);
    let beta_norm = p_norm(beta, b);
    let spread = if b.is_infinite() {
        1.0
    } else {
        (n as f64).powf(1.0 / b)
    };
    (l + beta_norm).min(spread * l.max(beta_norm))
}

/// Diagonal of a positive definite diagonal matrix `Q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct MahalanobisSpec {
    q_diag: Vec<f64>,
}

impl MahalanobisSpec {
    pub fn new(q_diag: Vec<f64>) -> Result<Self> {
        if q_diag.is_empty() {
            return Err(Error::invalid("Q must have at least one diagonal entry"));
        }
        if let Some(q) = q_diag.iter().find(|q| !(**q > 0.0 && q.is_finite())) {
            return Err(Error::invalid(format!("Q entries must be positive, got {q}")));
        }
        Ok(Self { q_diag })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            q_diag: vec![1.0; n.max(1)],
        }
    }

    pub fn q_diag(&self) -> &[f64] {
        &self.q_diag
    }

    pub fn q_min(&self) -> f64 {
        self.q_diag.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn q_max(&self) -> f64 {
        self.q_diag.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl TryFrom<Vec<f64>> for MahalanobisSpec {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<MahalanobisSpec> for Vec<f64> {
    fn from(s: MahalanobisSpec) -> Self {
        s.q_diag
    }
}

/// Worst case over a zero budget is the reference itself.
fn solve_or_reference(
    f: &QuantileGrid,
    gamma: &DistortionWeight,
    phi: &BregmanGenerator,
    budget: f64,
) -> Result<Option<SolveReport>> {
    if budget == 0.0 {
        Ok(None)
    } else {
        solve_lambda(f, gamma, phi, budget).map(Some)
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon >= 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("epsilon must be a finite non-negative number, got {epsilon}")))
    }
}

fn check_a2(agg: &AggregationSpec) -> Result<()> {
    if agg.norm_exponent() == 2.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "these bounds need the Euclidean norm (a = 2), got a = {}",
            agg.norm_exponent()
        )))
    }
}

/// Assemble a two-sided report from the lower and upper univariate solves.
fn two_sided(
    method: BoundMethod,
    unit: BudgetUnit,
    epsilon: f64,
    f: &QuantileGrid,
    gamma: &DistortionWeight,
    lower: Option<SolveReport>,
    upper: Option<SolveReport>,
) -> BoundReport {
    let reference_risk = choquet_integral(f, gamma);
    let risk = |s: &Option<SolveReport>| s.as_ref().map_or(reference_risk, |s| s.worst_risk);
    BoundReport {
        method,
        epsilon,
        epsilon_unit: unit,
        reference_risk,
        lower: risk(&lower),
        upper: risk(&upper),
        lower_lambda: lower.as_ref().map(|s| s.lambda_star),
        upper_lambda: upper.as_ref().map(|s| s.lambda_star),
        upper_pre_projection: Some(
            upper
                .as_ref()
                .map_or_else(|| f.values().to_vec(), |s| s.pre_projection.clone()),
        ),
        lower_curve: Some(lower.map_or_else(|| f.clone(), |s| s.worst_curve)),
        upper_curve: Some(upper.map_or_else(|| f.clone(), |s| s.worst_curve)),
        component_lambdas: Vec::new(),
    }
}

/// Bounds for a Wasserstein-2 ball of radius `epsilon` around `X`, given the
/// quantile grid `f_agg` of `g(X)`.
///
/// The lower bound is the worst case over the univariate ball of radius
/// `‖β‖₂·ε`, the upper bound over radius `K·ε`. For a non-decreasing `γ` both
/// are vertical shifts of the quantile function along `γ/‖γ‖₂`. Passing an
/// aggregation whose `K` is a restricted constant `K_C` gives the bounds for
/// a reference with compactly supported nonlinear block.
pub fn wasserstein_bounds(
    f_agg: &QuantileGrid,
    gamma: &DistortionWeight,
    agg: &AggregationSpec,
    epsilon: f64,
) -> Result<BoundReport> {
    check_a2(agg)?;
    check_epsilon(epsilon)?;
    let case = SolveCase::for_gamma(gamma)?;
    let method = match case {
        SolveCase::GammaNonDecreasing => BoundMethod::WassersteinLipschitzI,
        SolveCase::GammaNonNegative => BoundMethod::WassersteinLipschitzIi,
    };
    if epsilon == 0.0 {
        let r = choquet_integral(f_agg, gamma);
        return Ok(BoundReport::degenerate(method, BudgetUnit::Radius, r, Some(f_agg)));
    }
    let quad = BregmanGenerator::quadratic(1.0)?;
    let lower_radius = agg.beta_norm() * epsilon;
    let upper_radius = agg.lipschitz() * epsilon;
    let lower = solve_or_reference(f_agg, gamma, &quad, lower_radius * lower_radius)?;
    let upper = solve_or_reference(f_agg, gamma, &quad, upper_radius * upper_radius)?;
    let report = two_sided(method, BudgetUnit::Radius, epsilon, f_agg, gamma, lower, upper);
    report.check_invariants(gamma.is_non_negative())?;
    Ok(report)
}

/// Bounds for a separable Bregman-Wasserstein ball with budget `epsilon`
/// around `X = (X_1, …, X_n)` and the linear position `βᵀX`, `β ≥ 0`.
///
/// Upper: `Σ β_i · sup{I(Y) : B_{φ_i}(Y, X_i) ≤ ε}`. Lower: the same with
/// per-component budget `ε/n`. The reference risk reported is
/// `Σ β_i I(X_i)`.
///
/// Requires `γ` non-negative and non-decreasing. Non-negativity alone makes
/// the lower bound valid; the upper bound also needs subadditivity, which a
/// non-decreasing `γ` supplies.
pub fn separable_bregman_bounds(
    marginal_quantiles: &[QuantileGrid],
    gamma: &DistortionWeight,
    phis: &[BregmanGenerator],
    beta: &[f64],
    epsilon: f64,
) -> Result<BoundReport> {
    let n = marginal_quantiles.len();
    if n == 0 || phis.len() != n || beta.len() != n {
        return Err(Error::invalid(format!(
            "need equal numbers of marginals, generators and weights, got {n}, {}, {}",
            phis.len(),
            beta.len()
        )));
    }
    if let Some(b) = beta.iter().find(|b| !(**b >= 0.0 && b.is_finite())) {
        return Err(Error::AssumptionViolation(format!(
            "separable bounds need non-negative weights, got {b}"
        )));
    }
    if !(gamma.is_non_negative() && gamma.is_non_decreasing()) {
        return Err(Error::AssumptionViolation(
            "separable bounds need a distortion weight that is non-negative and non-decreasing"
                .into(),
        ));
    }
    check_epsilon(epsilon)?;
    let reference_risk: f64 = marginal_quantiles
        .iter()
        .zip(beta)
        .map(|(f, b)| b * choquet_integral(f, gamma))
        .sum();
    if epsilon == 0.0 {
        return Ok(BoundReport::degenerate(
            BoundMethod::SeparableBregman,
            BudgetUnit::Divergence,
            reference_risk,
            None,
        ));
    }
    let lower_budget = epsilon / n as f64;
    let solves: Vec<(SolveReport, SolveReport)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let f = &marginal_quantiles[i];
            let up = solve_lambda(f, gamma, &phis[i], epsilon)?;
            let lo = solve_lambda(f, gamma, &phis[i], lower_budget)?;
            Ok((up, lo))
        })
        .collect::<Result<_>>()?;
    let mut upper = 0.0;
    let mut lower = 0.0;
    let mut component_lambdas = Vec::with_capacity(n);
    for ((up, lo), b) in solves.iter().zip(beta) {
        upper += b * up.worst_risk;
        lower += b * lo.worst_risk;
        component_lambdas.push(ComponentLambdas {
            upper: up.lambda_star,
            lower: lo.lambda_star,
        });
    }
    let report = BoundReport {
        method: BoundMethod::SeparableBregman,
        epsilon,
        epsilon_unit: BudgetUnit::Divergence,
        reference_risk,
        lower,
        upper,
        lower_lambda: None,
        upper_lambda: None,
        lower_curve: None,
        upper_curve: None,
        upper_pre_projection: None,
        component_lambdas,
    };
    report.check_invariants(true)?;
    Ok(report)
}

/// Bound on `upper − lower` of [`separable_bregman_bounds`]:
/// `Σ β_i L_i (1/λ̄_i − 1/λ̲_i) ‖γ‖₂²`, with `L_i` the Lipschitz constant of
/// `(φ_i′)⁻¹`.
pub fn separable_gap_bound(
    beta: &[f64],
    lipschitz_of_inverse: &[f64],
    lambdas: &[ComponentLambdas],
    gamma: &DistortionWeight,
) -> Result<f64> {
    if beta.len() != lipschitz_of_inverse.len() || beta.len() != lambdas.len() {
        return Err(Error::invalid("beta, inverse Lipschitz constants and lambdas differ in length"));
    }
    let mut total = 0.0;
    for ((b, l), lam) in beta.iter().zip(lipschitz_of_inverse).zip(lambdas) {
        if !(lam.upper > 0.0 && lam.lower > 0.0) {
            return Err(Error::invalid("multipliers must be positive"));
        }
        if *l < 0.0 {
            return Err(Error::invalid("Lipschitz constants must be non-negative"));
        }
        total += b * l * (1.0 / lam.upper - 1.0 / lam.lower);
    }
    Ok(total * gamma.l2_norm_sq())
}

/// Bounds for a Mahalanobis ball `E[(Z−X)ᵀQ(Z−X)] ≤ ε` with diagonal `Q`.
///
/// The image `g(Z)` lies in the univariate ball of `q_min·x²` with budget
/// `K²ε` (upper bound), and every law in the univariate ball of `q_max·x²`
/// with budget `‖β‖₂²ε` is attained (lower bound). With `Q = I` and
/// `ε = δ²` this is exactly [`wasserstein_bounds`] with radius `δ`.
pub fn mahalanobis_bounds(
    f_agg: &QuantileGrid,
    gamma: &DistortionWeight,
    agg: &AggregationSpec,
    q: &MahalanobisSpec,
    epsilon: f64,
) -> Result<BoundReport> {
    check_a2(agg)?;
    check_epsilon(epsilon)?;
    if q.q_diag().len() != agg.n() {
        return Err(Error::invalid(format!(
            "Q has {} diagonal entries for a {}-dimensional aggregation",
            q.q_diag().len(),
            agg.n()
        )));
    }
    let case = SolveCase::for_gamma(gamma)?;
    let method = match case {
        SolveCase::GammaNonDecreasing => BoundMethod::MahalanobisI,
        SolveCase::GammaNonNegative => BoundMethod::MahalanobisIi,
    };
    if epsilon == 0.0 {
        let r = choquet_integral(f_agg, gamma);
        return Ok(BoundReport::degenerate(method, BudgetUnit::Divergence, r, Some(f_agg)));
    }
    let k = agg.lipschitz();
    let bn = agg.beta_norm();
    let upper_phi = BregmanGenerator::quadratic(q.q_min())?;
    let lower_phi = BregmanGenerator::quadratic(q.q_max())?;
    let upper = solve_or_reference(f_agg, gamma, &upper_phi, k * k * epsilon)?;
    let lower = solve_or_reference(f_agg, gamma, &lower_phi, bn * bn * epsilon)?;
    let report = two_sided(method, BudgetUnit::Divergence, epsilon, f_agg, gamma, lower, upper);
    report.check_invariants(gamma.is_non_negative())?;
    Ok(report)
}

/// Upper bound for a composable generator `φ∘g`: the univariate worst case
/// over `{G : B_φ(G, F_{g(X)}) ≤ ε}`. The caller is responsible for `φ` being
/// non-decreasing on the range of `g(X)`.
pub fn composable_upper_bound(
    f_agg: &QuantileGrid,
    gamma: &DistortionWeight,
    phi_univariate: &BregmanGenerator,
    epsilon: f64,
) -> Result<f64> {
    Ok(composable_bounds(f_agg, gamma, phi_univariate, epsilon)?.upper)
}

/// [`composable_upper_bound`] as a report. No lower bound is available for
/// composable generators beyond the reference risk itself.
pub fn composable_bounds(
    f_agg: &QuantileGrid,
    gamma: &DistortionWeight,
    phi_univariate: &BregmanGenerator,
    epsilon: f64,
) -> Result<BoundReport> {
    check_epsilon(epsilon)?;
    SolveCase::for_gamma(gamma)?;
    let upper = solve_or_reference(f_agg, gamma, phi_univariate, epsilon)?;
    let mut report = two_sided(
        BoundMethod::ComposableUpperOnly,
        BudgetUnit::Divergence,
        epsilon,
        f_agg,
        gamma,
        None,
        upper,
    );
    report.lower_curve = None;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

/// Side-by-side comparison of direct and separable bounds for a linear
/// position `βᵀX`. All rows are reported on the common base `I(βᵀX)`: each
/// separable row adds the shift of its per-component solves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Report {
    pub reference_risk: f64,
    pub wasserstein_direct: Interval,
    pub wasserstein_separable: Interval,
    pub mahalanobis_direct: Option<Interval>,
    pub mahalanobis_separable: Option<Interval>,
}

/// Compare direct and separable bounds for a Wasserstein radius `epsilon`
/// (and, if given, the Mahalanobis ball of budget `epsilon²`).
///
/// Fails with an internal-consistency error unless
/// `sep_lower ≤ direct_lower ≤ direct_upper ≤ sep_upper` for the Wasserstein
/// rows.
pub fn table1_compare(
    agg: &AggregationSpec,
    gamma: &DistortionWeight,
    marginals: &[QuantileGrid],
    f_agg: &QuantileGrid,
    epsilon: f64,
    mahalanobis: Option<&MahalanobisSpec>,
) -> Result<Table1Report> {
    if !agg.is_linear() || agg.n() != marginals.len() {
        return Err(Error::invalid("table comparison needs a linear aggregation over the given marginals"));
    }
    // coefficients in coordinate order
    let mut beta = vec![0.0; agg.n()];
    for (&i, &b) in agg.linear_idx().iter().zip(agg.beta()) {
        beta[i] = b;
    }
    let budget = epsilon * epsilon;
    let direct = wasserstein_bounds(f_agg, gamma, agg, epsilon)?;
    let reference_risk = direct.reference_risk;
    let quad = BregmanGenerator::quadratic(1.0)?;
    let sep = separable_bregman_bounds(marginals, gamma, &vec![quad; agg.n()], &beta, budget)?;
    let rebase = |r: &BoundReport| Interval {
        lower: reference_risk + (r.lower - r.reference_risk),
        upper: reference_risk + (r.upper - r.reference_risk),
    };
    let wasserstein_direct = Interval {
        lower: direct.lower,
        upper: direct.upper,
    };
    let wasserstein_separable = rebase(&sep);

    let (mahalanobis_direct, mahalanobis_separable) = match mahalanobis {
        Some(q) => {
            let d = mahalanobis_bounds(f_agg, gamma, agg, q, budget)?;
            let phis = q
                .q_diag()
                .iter()
                .map(|&qi| BregmanGenerator::quadratic(qi))
                .collect::<Result<Vec<_>>>()?;
            let s = separable_bregman_bounds(marginals, gamma, &phis, &beta, budget)?;
            (
                Some(Interval {
                    lower: d.lower,
                    upper: d.upper,
                }),
                Some(rebase(&s)),
            )
        }
        None => (None, None),
    };

    let chain = [
        wasserstein_separable.lower,
        wasserstein_direct.lower,
        wasserstein_direct.upper,
        wasserstein_separable.upper,
    ];
    let scale = 1.0 + chain.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if chain.windows(2).any(|w| w[0] > w[1] + 1e-9 * scale) {
        return Err(Error::InternalConsistency(format!(
            "ordering sep_lower <= direct_lower <= direct_upper <= sep_upper violated: {chain:?}"
        )));
    }
    Ok(Table1Report {
        reference_risk,
        wasserstein_direct,
        wasserstein_separable,
        mahalanobis_direct,
        mahalanobis_separable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{make_es_gamma, make_ier_gamma, make_piecewise_gamma};
    use statrs::distribution::{ContinuousCDF, Normal};

    fn normal_grid(m: usize) -> QuantileGrid {
        let n = Normal::standard();
        QuantileGrid::from_fn(m, |u| n.inverse_cdf(u)).unwrap()
    }

    /// Same constants as the four-asset portfolio: ‖β‖₂ = √17, K = √30.
    fn portfolio_like() -> AggregationSpec {
        AggregationSpec::linear(vec![-1.0, -4.0], 2.0)
            .unwrap()
            .with_lipschitz(30f64.sqrt())
            .unwrap()
    }

    #[test]
    fn lipschitz_bound_examples() {
        let beta = [-1.0, -4.0];
        let k = lipschitz_bound(13f64.sqrt(), &beta, 2.0, 4);
        assert!((k - (13f64.sqrt() + 17f64.sqrt())).abs() < 1e-12);
        assert!((k - 7.72866).abs() < 1e-5);
        assert_eq!(lipschitz_bound(0.0, &[3.0, 4.0], 2.0, 2), 5.0);
        assert_eq!(lipschitz_bound(1.0, &[1.0, -2.0], 1.0, 3), 2.0);
    }

    #[test]
    fn es_shifts() {
        let f = normal_grid(10_000);
        let gamma = make_es_gamma(0.95).unwrap();
        let r = wasserstein_bounds(&f, &gamma, &portfolio_like(), 0.3).unwrap();
        assert_eq!(r.method, BoundMethod::WassersteinLipschitzI);
        assert!((r.upper - r.reference_risk - 7.34847).abs() < 1e-5);
        assert!((r.lower - r.reference_risk - 5.53173).abs() < 1e-5);
    }

    #[test]
    fn ier_shifts() {
        let f = normal_grid(10_000);
        let gamma = make_ier_gamma(0.75).unwrap();
        let r = wasserstein_bounds(&f, &gamma, &portfolio_like(), 1.0).unwrap();
        assert!((r.upper - r.reference_risk - 15.49193).abs() < 1e-5);
        assert!((r.lower - r.reference_risk - 11.66190).abs() < 1e-5);
    }

    #[test]
    fn linear_position_is_tight() {
        let f = normal_grid(2_000);
        let agg = AggregationSpec::linear(vec![1.0, 2.0, -0.5], 2.0).unwrap();
        let inv_s = make_piecewise_gamma(&[(0.0, 0.4, 2.0), (0.4, 0.7, 0.5), (0.7, 1.0, 3.0)]).unwrap();
        for gamma in [make_es_gamma(0.9).unwrap(), inv_s] {
            for eps in [0.1, 1.0, 10.0] {
                let r = wasserstein_bounds(&f, &gamma, &agg, eps).unwrap();
                assert!((r.upper - r.lower).abs() <= 1e-9 * (1.0 + r.upper.abs()));
            }
        }
    }

    #[test]
    fn zero_radius_is_degenerate() {
        let f = normal_grid(100);
        let gamma = make_es_gamma(0.9).unwrap();
        let r = wasserstein_bounds(&f, &gamma, &portfolio_like(), 0.0).unwrap();
        assert_eq!(r.lower, r.reference_risk);
        assert_eq!(r.upper, r.reference_risk);
        assert!(wasserstein_bounds(&f, &gamma, &portfolio_like(), -1.0).is_err());
    }

    #[test]
    fn rejects_unsupported_weight() {
        let f = normal_grid(100);
        let bad = make_piecewise_gamma(&[(0.0, 0.3, -1.0), (0.3, 0.7, 2.0), (0.7, 1.0, -1.0)]).unwrap();
        assert_eq!(
            wasserstein_bounds(&f, &bad, &portfolio_like(), 1.0),
            Err(Error::UnsupportedDistortion)
        );
    }

    #[test]
    fn monotone_in_epsilon() {
        let f = normal_grid(1_000);
        let inv_s = make_piecewise_gamma(&[(0.0, 0.4, 2.0), (0.4, 0.7, 0.5), (0.7, 1.0, 3.0)]).unwrap();
        let mut prev = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for eps in [0.01, 0.1, 0.5, 1.0, 2.0] {
            let r = wasserstein_bounds(&f, &inv_s, &portfolio_like(), eps).unwrap();
            assert!(r.lower > prev.0 && r.upper > prev.1);
            prev = (r.lower, r.upper);
        }
    }

    #[test]
    fn separable_example() {
        let f = normal_grid(100_000);
        let gamma = make_es_gamma(0.95).unwrap();
        let quad = BregmanGenerator::quadratic(1.0).unwrap();
        let r = separable_bregman_bounds(
            &[f.clone(), f.clone()],
            &gamma,
            &[quad.clone(), quad.clone()],
            &[1.0, 1.0],
            1.0,
        )
        .unwrap();
        assert!((r.upper - 13.0696).abs() < 5e-3, "{}", r.upper);
        assert!((r.lower - 10.4499).abs() < 5e-3, "{}", r.lower);
        let gap = separable_gap_bound(&[1.0, 1.0], &[0.5, 0.5], &r.component_lambdas, &gamma).unwrap();
        assert!((gap - (2.0 - 2f64.sqrt()) * 20f64.sqrt()).abs() < 1e-9);
        assert!((gap - 2.61972).abs() < 1e-5);
        assert!(r.upper - r.lower <= gap + 1e-3);
    }

    #[test]
    fn separable_edge_cases() {
        let f = normal_grid(500);
        let gamma = make_es_gamma(0.9).unwrap();
        let quart = BregmanGenerator::quartic();
        let one = separable_bregman_bounds(std::slice::from_ref(&f), &gamma, std::slice::from_ref(&quart), &[2.0], 0.7).unwrap();
        assert_eq!(one.lower, one.upper);
        let zero = separable_bregman_bounds(
            &[f.clone(), f.clone()],
            &gamma,
            &[quart.clone(), quart.clone()],
            &[0.0, 0.0],
            0.7,
        )
        .unwrap();
        assert_eq!((zero.lower, zero.upper), (0.0, 0.0));
        let neg = separable_bregman_bounds(std::slice::from_ref(&f), &gamma, std::slice::from_ref(&quart), &[-1.0], 0.7);
        assert!(matches!(neg, Err(Error::AssumptionViolation(_))));
        let ier = make_ier_gamma(0.8).unwrap();
        assert!(separable_bregman_bounds(&[f], &ier, &[quart], &[1.0], 0.7).is_err());
    }

    #[test]
    fn gap_bound_trivial() {
        let gamma = make_es_gamma(0.9).unwrap();
        let same = [ComponentLambdas { upper: 2.0, lower: 2.0 }];
        assert_eq!(separable_gap_bound(&[1.0], &[0.5], &same, &gamma).unwrap(), 0.0);
        let diff = [ComponentLambdas { upper: 1.0, lower: 2.0 }];
        assert_eq!(separable_gap_bound(&[0.0], &[0.5], &diff, &gamma).unwrap(), 0.0);
    }

    #[test]
    fn mahalanobis_identity_matches_wasserstein() {
        let f = normal_grid(2_000);
        let agg = portfolio_like();
        let inv_s = make_piecewise_gamma(&[(0.0, 0.4, 2.0), (0.4, 0.7, 0.5), (0.7, 1.0, 3.0)]).unwrap();
        for gamma in [make_es_gamma(0.95).unwrap(), make_ier_gamma(0.75).unwrap(), inv_s] {
            for delta in [0.3, 1.0] {
                let w = wasserstein_bounds(&f, &gamma, &agg, delta).unwrap();
                let m = mahalanobis_bounds(&f, &gamma, &agg, &MahalanobisSpec::identity(2), delta * delta)
                    .unwrap();
                assert!((w.lower - m.lower).abs() <= 1e-9 * (1.0 + w.lower.abs()));
                assert!((w.upper - m.upper).abs() <= 1e-9 * (1.0 + w.upper.abs()));
            }
        }
    }

    #[test]
    fn mahalanobis_scaling() {
        let f = normal_grid(10_000);
        let gamma = make_es_gamma(0.95).unwrap();
        let q = MahalanobisSpec::new(vec![1.0, 4.0]).unwrap();
        let r = mahalanobis_bounds(&f, &gamma, &portfolio_like(), &q, 1.0).unwrap();
        // K·√(ε/q_min)·‖γ‖₂ and ‖β‖₂·√(ε/q_max)·‖γ‖₂
        assert!((r.upper - r.reference_risk - 600f64.sqrt()).abs() < 1e-9);
        assert!((r.lower - r.reference_risk - 85f64.sqrt()).abs() < 1e-9);
        assert!(MahalanobisSpec::new(vec![1.0, 0.0]).is_err());
        assert!(mahalanobis_bounds(&f, &gamma, &portfolio_like(), &MahalanobisSpec::identity(3), 1.0).is_err());
    }

    #[test]
    fn composable_quadratic_and_small_budget() {
        let f = normal_grid(1_000);
        let gamma = make_es_gamma(0.95).unwrap();
        let quad = BregmanGenerator::quadratic(1.0).unwrap();
        let up = composable_upper_bound(&f, &gamma, &quad, 0.25).unwrap();
        let w = wasserstein_bounds(&f, &gamma, &AggregationSpec::linear(vec![1.0], 2.0).unwrap(), 0.5).unwrap();
        assert!((up - w.upper).abs() < 1e-12);
        let tiny = composable_upper_bound(&f, &gamma, &BregmanGenerator::quartic(), 1e-12).unwrap();
        assert!((tiny - choquet_integral(&f, &gamma)).abs() < 1e-5);
    }

    #[test]
    fn table1_linear_pair() {
        let f = normal_grid(4_000);
        let gamma = make_es_gamma(0.95).unwrap();
        let agg = AggregationSpec::linear(vec![1.0, 1.0], 2.0).unwrap();
        // comonotone pair: X_1 = X_2, so βᵀX has quantiles 2f
        let f_agg = QuantileGrid::new(f.values().iter().map(|x| 2.0 * x).collect()).unwrap();
        let t = table1_compare(&agg, &gamma, &[f.clone(), f.clone()], &f_agg, 0.5, Some(&MahalanobisSpec::identity(2)))
            .unwrap();
        let norm = gamma.l2_norm();
        let base = t.reference_risk;
        assert!((t.wasserstein_direct.upper - base - 2f64.sqrt() * norm * 0.5).abs() < 1e-9);
        assert!((t.wasserstein_separable.upper - base - 2.0 * norm * 0.5).abs() < 1e-9);
        assert!((t.wasserstein_separable.lower - base - 2.0 / 2f64.sqrt() * norm * 0.5).abs() < 1e-9);
        let md = t.mahalanobis_direct.unwrap();
        assert!((md.upper - t.wasserstein_direct.upper).abs() < 1e-9);
        assert!((md.lower - t.wasserstein_direct.lower).abs() < 1e-9);
        let ms = t.mahalanobis_separable.unwrap();
        assert!((ms.upper - t.wasserstein_separable.upper).abs() < 1e-9);
    }

    #[test]
    fn table1_single_asset_rows_coincide() {
        let f = normal_grid(1_000);
        let gamma = make_es_gamma(0.9).unwrap();
        let agg = AggregationSpec::linear(vec![1.5], 2.0).unwrap();
        let f_agg = QuantileGrid::new(f.values().iter().map(|x| 1.5 * x).collect()).unwrap();
        let t = table1_compare(&agg, &gamma, &[f], &f_agg, 0.8, None).unwrap();
        let rows = [
            t.wasserstein_direct.lower,
            t.wasserstein_direct.upper,
            t.wasserstein_separable.lower,
            t.wasserstein_separable.upper,
        ];
        for r in rows {
            assert!((r - rows[0]).abs() < 1e-9);
        }
    }
}
