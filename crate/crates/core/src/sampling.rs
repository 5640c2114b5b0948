//! Reference models for the risk factors: parametric marginals glued by an
//! independent or Student-t copula, sampled deterministically from a seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::core::AggregationSpec;
use crate::divergence::DiscreteCloud;
use crate::error::{Error, Result};

/// Uniforms are kept inside `[U_CLAMP, 1 − U_CLAMP]` before quantile mapping.
const U_CLAMP: f64 = 1e-16;
/// Rows per RNG stream; fixed so output does not depend on the thread count.
const SHARD_ROWS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MarginalSpec {
    Normal { mu: f64, sigma: f64 },
    Weibull { lambda: f64, k: f64 },
    LogNormal { mu: f64, sigma: f64 },
}

impl MarginalSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            MarginalSpec::Normal { mu, sigma } | MarginalSpec::LogNormal { mu, sigma } => {
                mu.is_finite() && sigma > 0.0 && sigma.is_finite()
            }
            MarginalSpec::Weibull { lambda, k } => {
                lambda > 0.0 && lambda.is_finite() && k > 0.0 && k.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid marginal parameters {self:?}")))
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            MarginalSpec::Normal { mu, sigma } => mu + sigma * std_normal_quantile(u),
            MarginalSpec::Weibull { lambda, k } => lambda * (-(-u).ln_1p()).powf(1.0 / k),
            MarginalSpec::LogNormal { mu, sigma } => (mu + sigma * std_normal_quantile(u)).exp(),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let std = Normal::standard();
        match *self {
            MarginalSpec::Normal { mu, sigma } => std.cdf((x - mu) / sigma),
            MarginalSpec::Weibull { lambda, k } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-(x / lambda).powf(k)).exp_m1()
                }
            }
            MarginalSpec::LogNormal { mu, sigma } => {
                if x <= 0.0 {
                    0.0
                } else {
                    std.cdf((x.ln() - mu) / sigma)
                }
            }
        }
    }
}

fn std_normal_quantile(u: f64) -> f64 {
    Normal::standard().inverse_cdf(u)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CopulaSpec {
    Independent,
    /// Student-t copula with equicorrelation `rho` between every pair.
    StudentT { df: f64, rho: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceModel {
    pub marginals: Vec<MarginalSpec>,
    pub copula: CopulaSpec,
}

impl ReferenceModel {
    pub fn n(&self) -> usize {
        self.marginals.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.marginals.is_empty() {
            return Err(Error::invalid("reference model needs at least one marginal"));
        }
        for m in &self.marginals {
            m.validate()?;
        }
        if let CopulaSpec::StudentT { df, rho } = self.copula {
            if !(df > 0.0 && df.is_finite()) {
                return Err(Error::invalid(format!("t copula needs df > 0, got {df}")));
            }
            let n = self.n() as f64;
            let lo = if self.n() > 1 { -1.0 / (n - 1.0) } else { -1.0 };
            if !(rho > lo && rho < 1.0) {
                return Err(Error::invalid(format!(
                    "equicorrelation {rho} is not positive definite in dimension {}",
                    self.n()
                )));
            }
        }
        Ok(())
    }

    /// Four-factor model: N(4, 1), Weibull(λ = 2, k = 0.5), LogNormal(3, 1)
    /// and N(35, 1), with a t copula (3 degrees of freedom, ρ = 0.7).
    pub fn portfolio() -> Self {
        Self {
            marginals: vec![
                MarginalSpec::Normal { mu: 4.0, sigma: 1.0 },
                MarginalSpec::Weibull { lambda: 2.0, k: 0.5 },
                MarginalSpec::LogNormal { mu: 3.0, sigma: 1.0 },
                MarginalSpec::Normal { mu: 35.0, sigma: 1.0 },
            ],
            copula: CopulaSpec::StudentT { df: 3.0, rho: 0.7 },
        }
    }
}

/// Lower Cholesky factor of the `n × n` equicorrelation matrix.
fn equicorrelation_cholesky(n: usize, rho: f64) -> Vec<Vec<f64>> {
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let target = if i == j { 1.0 } else { rho };
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            l[i][j] = if i == j {
                (target - s).sqrt()
            } else {
                (target - s) / l[j][j]
            };
        }
    }
    l
}

/// Copula sample: `n_samples` rows of uniforms in `(0, 1)`.
pub fn sample_copula(model: &ReferenceModel, n_samples: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    model.validate()?;
    if n_samples == 0 {
        return Err(Error::invalid("sample size must be positive"));
    }
    let n = model.n();
    let shards = n_samples.div_ceil(SHARD_ROWS);
    let copula = model.copula;
    let (chol, t_cdf, chi) = match copula {
        CopulaSpec::StudentT { df, rho } => (
            equicorrelation_cholesky(n, rho),
            Some(StudentsT::new(0.0, 1.0, df).map_err(|e| Error::invalid(e.to_string()))?),
            Some(ChiSquared::new(df).map_err(|e| Error::invalid(e.to_string()))?),
        ),
        CopulaSpec::Independent => (Vec::new(), None, None),
    };
    let rows: Vec<Vec<Vec<f64>>> = (0..shards)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s as u64);
            let len = SHARD_ROWS.min(n_samples - s * SHARD_ROWS);
            let mut out = Vec::with_capacity(len);
            let mut g = vec![0.0; n];
            for _ in 0..len {
                let row: Vec<f64> = match (&t_cdf, &chi) {
                    (Some(t), Some(chi)) => {
                        for gi in g.iter_mut() {
                            *gi = rng.sample(StandardNormal);
                        }
                        let w: f64 = chi.sample(&mut rng);
                        let scale = (w / t.freedom()).sqrt();
                        (0..n)
                            .map(|i| {
                                let z: f64 = (0..=i).map(|k| chol[i][k] * g[k]).sum();
                                t.cdf(z / scale)
                            })
                            .collect()
                    }
                    _ => (0..n).map(|_| rng.random::<f64>()).collect(),
                };
                out.push(row.into_iter().map(|u| u.clamp(U_CLAMP, 1.0 - U_CLAMP)).collect());
            }
            out
        })
        .collect();
    Ok(rows.into_iter().flatten().collect())
}

/// Seeded sample of the reference model. Identical `(model, N, seed)` give
/// bitwise-identical clouds regardless of the number of worker threads.
pub fn sample_reference(model: &ReferenceModel, n_samples: usize, seed: u64) -> Result<DiscreteCloud> {
    let uniforms = sample_copula(model, n_samples, seed)?;
    let points = uniforms
        .into_par_iter()
        .map(|u| {
            u.iter()
                .zip(&model.marginals)
                .map(|(&u, m)| m.quantile(u))
                .collect()
        })
        .collect();
    DiscreteCloud::new(points)
}

/// `g(X_i)` for every point of the cloud.
pub fn aggregate(cloud: &DiscreteCloud, agg: &AggregationSpec) -> Vec<f64> {
    cloud.points().par_iter().map(|x| agg.eval(x)).collect()
}

/// Negative portfolio payoff
/// `g(x) = −x₁ − 2·max(x₂ − 5, 0) − 3·max(35 − x₃, 0) − 4x₄`
/// with the options on `(x₂, x₃)` as the non-linear block, `β = (−1, −4)`,
/// `L = √13` and `K = √30` (the largest Euclidean norm of a subgradient).
pub fn portfolio_aggregation() -> AggregationSpec {
    AggregationSpec::builder(4)
        .nonlinear(
            vec![1, 2],
            |x| -2.0 * (x[0] - 5.0).max(0.0) - 3.0 * (35.0 - x[1]).max(0.0),
            13f64.sqrt(),
        )
        .linear(vec![0, 3], vec![-1.0, -4.0])
        .norm_exponent(2.0)
        .lipschitz(30f64.sqrt())
        .build()
        .expect("portfolio aggregation is well formed")
}

/// Finite-difference step and sampling lattice of [`estimate_lipschitz`].
const FD_STEP: f64 = 1.0 / 1_048_576.0; // 2^-20

/// Lower estimate of the Lipschitz constant of `g` over the box `region`
/// (one interval per coordinate), in the aggregation's `a`-norm.
///
/// Takes the maximum of central-difference gradient norms (dual norm) at
/// sampled points and of difference quotients between successive samples.
/// Points are snapped to a dyadic lattice so that `x ± h` is exact.
pub fn estimate_lipschitz(
    agg: &AggregationSpec,
    region: &[(f64, f64)],
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if samples < 2 {
        return Err(Error::invalid("need at least two sample points"));
    }
    if region.len() != agg.n() {
        return Err(Error::invalid("probe region dimension differs from the aggregation"));
    }
    if region.iter().any(|(lo, hi)| !(lo <= hi && lo.is_finite() && hi.is_finite())) {
        return Err(Error::invalid("probe region must be a finite non-empty box"));
    }
    let a = agg.norm_exponent();
    let b = crate::core::conjugate_exponent(a);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 0.0;
    let mut prev: Option<(Vec<f64>, f64)> = None;
    for _ in 0..samples {
        let mut x: Vec<f64> = region
            .iter()
            .map(|&(lo, hi)| {
                let v = lo + (hi - lo) * rng.random::<f64>();
                (v / FD_STEP).round() * FD_STEP
            })
            .collect();
        let gx = agg.eval(&x);
        let mut grad = vec![0.0; x.len()];
        for k in 0..x.len() {
            let xk = x[k];
            x[k] = xk + FD_STEP;
            let up = agg.eval(&x);
            x[k] = xk - FD_STEP;
            let down = agg.eval(&x);
            x[k] = xk;
            grad[k] = (up - down) / (2.0 * FD_STEP);
        }
        best = best.max(crate::core::p_norm(&grad, b));
        if let Some((y, gy)) = &prev {
            let d: Vec<f64> = x.iter().zip(y).map(|(u, v)| u - v).collect();
            let dist = crate::core::p_norm(&d, a);
            if dist > 0.0 {
                best = best.max((gx - gy).abs() / dist);
            }
        }
        prev = Some((x, gx));
    }
    Ok(best)
}

/// Kendall's τ-b in `O(N log N)` (Knight's merge-sort count).
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid("Kendall's tau needs two equal-length samples of size ≥ 2"));
    }
    let n = x.len();
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));

    let tied = |same: &dyn Fn(usize) -> bool| -> u64 {
        let mut total = 0u64;
        let mut run = 1u64;
        for i in 1..n {
            if same(i) {
                run += 1;
            } else {
                total += run * (run - 1) / 2;
                run = 1;
            }
        }
        total + run * (run - 1) / 2
    };
    let ties_x = tied(&|i| pairs[i].0 == pairs[i - 1].0);
    let ties_xy = tied(&|i| pairs[i] == pairs[i - 1]);

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; n];
    let swaps = merge_count(&mut ys, &mut buf);
    let ties_y = tied(&|i| ys[i] == ys[i - 1]);

    let n0 = (n as u64) * (n as u64 - 1) / 2;
    let numer = n0 as f64 - ties_x as f64 - ties_y as f64 + ties_xy as f64 - 2.0 * swaps as f64;
    let denom = ((n0 - ties_x) as f64 * (n0 - ties_y) as f64).sqrt();
    if denom == 0.0 {
        return Err(Error::invalid("Kendall's tau is undefined for a constant sample"));
    }
    Ok(numer / denom)
}

/// Sorts `v` and returns the number of inversions.
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid], &mut buf[..mid]) + merge_count(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}
