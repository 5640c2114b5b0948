//! Worst-case signed Choquet integral over a univariate Bregman-Wasserstein
//! ball `{G : B_φ(G, F) ≤ ε}`.
//!
//! The maximiser is `G_λ⁻¹ = (φ′)⁻¹( iso(φ′∘F⁻¹ + γ/λ) )` for the multiplier
//! `λ*` that puts the divergence exactly on the budget. For a non-decreasing
//! `γ` the isotonic step is the identity; for a non-negative `γ` it is not,
//! and the divergence is strictly decreasing in `λ`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::core::{
    BregmanGenerator, DistortionWeight, GeneratorKind, QuantileGrid, choquet_integral,
    weighted_mean,
};
use crate::divergence::bregman_on_values;
use crate::error::{Error, Result};
use crate::isotonic::isotonic_projection;

/// Residual target `|B_φ(G_λ, F) − ε| ≤ ROOT_TOL·(1 + ε)`.
pub const ROOT_TOL: f64 = 1e-10;
/// Bracket width at which bisection gives up refining the residual.
pub const LAMBDA_REL_TOL: f64 = 1e-14;
pub const MAX_BISECTIONS: usize = 200;
/// The bracket search gives up beyond `λ ∈ [1e-8, 1e8]`.
pub const BRACKET_LIMIT: f64 = 1e8;
/// Resolution of the upward scan for the smallest root (case i).
const SCAN_FACTOR: f64 = 1.258_925_411_794_167_2; // 10^0.1

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveCase {
    GammaNonDecreasing,
    GammaNonNegative,
}

impl SolveCase {
    pub fn for_gamma(gamma: &DistortionWeight) -> Result<Self> {
        if gamma.is_non_decreasing() {
            Ok(SolveCase::GammaNonDecreasing)
        } else if gamma.is_non_negative() {
            Ok(SolveCase::GammaNonNegative)
        } else {
            Err(Error::UnsupportedDistortion)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub lambda_star: f64,
    pub worst_curve: QuantileGrid,
    pub worst_risk: f64,
    /// `|B_φ(G_λ*, F) − ε|` evaluated on the grid.
    pub constraint_residual: f64,
    pub case: SolveCase,
    /// `(φ′)⁻¹(φ′∘F⁻¹ + γ/λ*)` before the isotonic projection.
    pub pre_projection: Vec<f64>,
}

/// Candidate worst-case curve and the pointwise curve it was projected from.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub pre_projection: Vec<f64>,
    pub curve: QuantileGrid,
}

/// `G_λ⁻¹` on the grid of `f`.
pub fn candidate_quantile(
    f: &QuantileGrid,
    gamma: &DistortionWeight,
    phi: &BregmanGenerator,
    lambda: f64,
) -> Result<QuantileGrid> {
    Ok(candidate(f, gamma, phi, lambda)?.curve)
}

/// Like [`candidate_quantile`] but also returns the pre-projection curve.
pub fn candidate(
    f: &QuantileGrid,
    gamma: &DistortionWeight,
    phi: &BregmanGenerator,
    lambda: f64,
) -> Result<Candidate> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
    }
    let weights = gamma.sample(f.len());
    candidate_from_weights(f, &weights, gamma.is_non_decreasing(), phi, lambda)
}

fn candidate_from_weights(
    f: &QuantileGrid,
    weights: &[f64],
    non_decreasing: bool,
    phi: &BregmanGenerator,
    lambda: f64,
) -> Result<Candidate> {
    let h: Vec<f64> = f
        .values()
        .iter()
        .zip(weights)
        .map(|(&x, &w)| phi.phi_prime(x) + w / lambda)
        .collect();
    let monotone = h.windows(2).all(|w| w[0] <= w[1]);
    // with γ non-decreasing the dual curve is already monotone
    debug_assert!(!non_decreasing || monotone);
    let projected = if monotone {
        h.clone()
    } else {
        isotonic_projection(&h)?.0
    };
    let pre_projection = h.iter().map(|&v| phi.phi_prime_inverse(v)).collect();
    let curve = QuantileGrid::new(projected.iter().map(|&v| phi.phi_prime_inverse(v)).collect())?;
    Ok(Candidate {
        pre_projection,
        curve,
    })
}

/// Finds `λ*` with `B_φ(G_λ*, F) = ε` and returns the worst-case curve.
///
/// Quadratic generators with a non-decreasing `γ` use the exact solution
/// `λ* = ‖γ‖₂ / (2√(cε))`, whose risk is `I(F) + √(ε/c)·‖γ‖₂`, with the norm
/// taken over the grid.
pub fn solve_lambda(
    f: &QuantileGrid,
    gamma: &DistortionWeight,
    phi: &BregmanGenerator,
    epsilon: f64,
) -> Result<SolveReport> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid(format!("budget must be positive, got {epsilon}")));
    }
    let case = SolveCase::for_gamma(gamma)?;
    let weights = gamma.sample(f.len());
    if weights.iter().all(|&w| w == 0.0) {
        return Err(Error::NoSolution(
            "the distortion weight vanishes at every grid point; refine the grid".into(),
        ));
    }
    if let (GeneratorKind::Quadratic(c), SolveCase::GammaNonDecreasing) = (phi.kind(), case) {
        return Ok(closed_form(f, gamma, &weights, phi, c, epsilon));
    }

    let non_decreasing = case == SolveCase::GammaNonDecreasing;
    let residual = |lambda: f64| -> Result<f64> {
        let cand = candidate_from_weights(f, &weights, non_decreasing, phi, lambda)?;
        Ok(bregman_on_values(cand.curve.values(), f.values(), phi) - epsilon)
    };
    let tol = ROOT_TOL * (1.0 + epsilon);

    // r(λ) → +∞ as λ → 0 and → −ε as λ → ∞: expand geometrically from λ = 1.
    let (mut lo, mut hi);
    let r1 = residual(1.0)?;
    if r1.abs() <= tol {
        return finish(f, gamma, phi, &weights, non_decreasing, 1.0, epsilon, case);
    }
    if r1 > 0.0 {
        lo = 1.0;
        hi = 10.0;
        while residual(hi)? > 0.0 {
            lo = hi;
            hi *= 10.0;
            if hi > BRACKET_LIMIT {
                return Err(Error::NoSolution(format!(
                    "divergence stays above the budget {epsilon} for lambda up to {BRACKET_LIMIT:e}"
                )));
            }
        }
    } else {
        hi = 1.0;
        lo = 0.1;
        while residual(lo)? <= 0.0 {
            hi = lo;
            lo /= 10.0;
            if lo < 1.0 / BRACKET_LIMIT {
                return Err(Error::NoSolution(format!(
                    "divergence stays below the budget {epsilon} for lambda down to {:e}",
                    1.0 / BRACKET_LIMIT
                )));
            }
        }
    }
    if non_decreasing {
        // smallest root: first sign change scanning upward from `lo`
        let mut prev = lo;
        let mut cur = lo * SCAN_FACTOR;
        while cur < hi {
            if residual(cur)? <= 0.0 {
                break;
            }
            prev = cur;
            cur *= SCAN_FACTOR;
        }
        lo = prev;
        hi = cur.min(hi);
    }

    let mut lambda = (lo * hi).sqrt();
    for _ in 0..MAX_BISECTIONS {
        lambda = (lo * hi).sqrt();
        let r = residual(lambda)?;
        if r.abs() <= tol {
            break;
        }
        if r > 0.0 {
            lo = lambda;
        } else {
            hi = lambda;
        }
        if hi / lo - 1.0 <= LAMBDA_REL_TOL {
            let (r_lo, r_hi) = (residual(lo)?, residual(hi)?);
            lambda = if r_lo.abs() <= r_hi.abs() { lo } else { hi };
            break;
        }
    }
    finish(f, gamma, phi, &weights, non_decreasing, lambda, epsilon, case)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    f: &QuantileGrid,
    gamma: &DistortionWeight,
    phi: &BregmanGenerator,
    weights: &[f64],
    non_decreasing: bool,
    lambda: f64,
    epsilon: f64,
    case: SolveCase,
) -> Result<SolveReport> {
    let cand = candidate_from_weights(f, weights, non_decreasing, phi, lambda)?;
    let residual = (bregman_on_values(cand.curve.values(), f.values(), phi) - epsilon).abs();
    Ok(SolveReport {
        lambda_star: lambda,
        worst_risk: choquet_integral(&cand.curve, gamma),
        worst_curve: cand.curve,
        constraint_residual: residual,
        case,
        pre_projection: cand.pre_projection,
    })
}

fn closed_form(
    f: &QuantileGrid,
    gamma: &DistortionWeight,
    weights: &[f64],
    phi: &BregmanGenerator,
    c: f64,
    epsilon: f64,
) -> SolveReport {
    // norm of γ as sampled on the grid, so the curve meets the budget on the
    // grid exactly; it equals ‖γ‖₂ when the breakpoints fall between cells
    let norm = (weights.iter().map(|w| w * w).sum::<f64>() / weights.len() as f64).sqrt();
    let radius = (epsilon / c).sqrt();
    let lambda = norm / (2.0 * (c * epsilon).sqrt());
    let scale = radius / norm;
    let curve: Vec<f64> = f
        .values()
        .iter()
        .zip(weights)
        .map(|(&x, &w)| x + scale * w)
        .collect();
    let curve = QuantileGrid::new(curve).expect("shift by a non-decreasing weight stays monotone");
    let residual = (bregman_on_values(curve.values(), f.values(), phi) - epsilon).abs();
    SolveReport {
        lambda_star: lambda,
        worst_risk: choquet_integral(f, gamma) + radius * norm,
        pre_projection: curve.values().to_vec(),
        worst_curve: curve,
        constraint_residual: residual,
        case: SolveCase::GammaNonDecreasing,
    }
}

/// Settings of [`worstcase_brute_oracle_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BruteOracleConfig {
    pub iterations: usize,
    pub starts: usize,
    /// Step at iteration `k` is `step / √k`.
    pub step: f64,
    pub seed: u64,
}

impl Default for BruteOracleConfig {
    fn default() -> Self {
        Self {
            iterations: 5_000,
            starts: 20,
            step: 0.5,
            seed: 0,
        }
    }
}

/// Largest grid accepted by the brute-force oracle.
pub const BRUTE_ORACLE_MAX: usize = 50;

/// Best-effort maximum of `(1/M) Σ γ(u_j) q[j]` over non-decreasing `q`
/// with `B_φ(q, f) ≤ ε`, by projected gradient ascent from several starts.
///
/// Each step ascends along `γ` and projects exactly onto the intersection
/// of the monotone cone with the divergence ball, so every iterate is
/// feasible and the result is a lower estimate of the true maximum.
pub fn worstcase_brute_oracle(
    f: &QuantileGrid,
    gamma: &DistortionWeight,
    phi: &BregmanGenerator,
    epsilon: f64,
) -> Result<f64> {
    worstcase_brute_oracle_with(f, gamma, phi, epsilon, BruteOracleConfig::default())
}

pub fn worstcase_brute_oracle_with(
    f: &QuantileGrid,
    gamma: &DistortionWeight,
    phi: &BregmanGenerator,
    epsilon: f64,
    config: BruteOracleConfig,
) -> Result<f64> {
    let m = f.len();
    if m > BRUTE_ORACLE_MAX {
        return Err(Error::Capacity {
            what: "brute oracle grid",
            got: m,
            limit: BRUTE_ORACLE_MAX,
        });
    }
    if !(epsilon >= 0.0) {
        return Err(Error::invalid("budget must be non-negative"));
    }
    let weights = gamma.sample(m);
    let reference = f.values();
    if epsilon == 0.0 {
        return Ok(weighted_mean(reference, &weights));
    }
    let spread = (reference[m - 1] - reference[0]).abs().max(1.0);
    let results: Vec<f64> = (0..config.starts.max(1))
        .into_par_iter()
        .map(|start| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(start as u64);
            let mut q = reference.to_vec();
            if start > 0 {
                let mut d: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                d.sort_by(f64::total_cmp);
                let scale = spread * rng.random::<f64>();
                for (qj, dj) in q.iter_mut().zip(&d) {
                    *qj += scale * dj;
                }
                q = BallProjector::new(reference, phi, epsilon).project(&q);
            }
            let mut best = weighted_mean(&q, &weights);
            let mut ball = BallProjector::new(reference, phi, epsilon);
            for k in 1..=config.iterations {
                let eta = config.step / (k as f64).sqrt();
                let stepped: Vec<f64> = q.iter().zip(&weights).map(|(qj, w)| qj + eta * w).collect();
                q = ball.project(&stepped);
                best = best.max(weighted_mean(&q, &weights));
            }
            best
        })
        .collect();
    Ok(results.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// Euclidean projection onto the monotone part of the divergence ball,
/// `{q non-decreasing : (1/M) Σ B_φ(q_j, f_j) ≤ ε}`.
///
/// For a multiplier `μ ≥ 0` the penalised problem
/// `min ½‖q − y‖² + μ Σ B_φ(q_j, f_j)` over non-decreasing `q` is a separable
/// convex isotonic fit, solved by pooling adjacent violators where each
/// block value solves `q + μφ′(q) = mean(y) + μ·mean(φ′(f))`. The
/// divergence of the fit decreases in `μ`; `μ` is located on a log scale
/// and taken from the feasible side.
struct BallProjector<'a> {
    dphi_ref: Vec<f64>,
    reference: &'a [f64],
    phi: &'a BregmanGenerator,
    epsilon: f64,
    last_mu: f64,
}

struct FitBlock {
    len: usize,
    sum_t: f64,
    sum_y: f64,
}

impl<'a> BallProjector<'a> {
    fn new(reference: &'a [f64], phi: &'a BregmanGenerator, epsilon: f64) -> Self {
        Self {
            dphi_ref: reference.iter().map(|&x| phi.phi_prime(x)).collect(),
            reference,
            phi,
            epsilon,
            last_mu: 1.0,
        }
    }

    fn divergence(&self, q: &[f64]) -> f64 {
        bregman_on_values(q, self.reference, self.phi)
    }

    /// Root of `q + μφ′(q) = t`.
    fn block_value(&self, mu: f64, t: f64, hint: f64) -> f64 {
        match self.phi.kind() {
            // φ′(q) = 2cq, and t already carries μ·mean(2c·f)
            GeneratorKind::Quadratic(c) => return t / (1.0 + 2.0 * c * mu),
            GeneratorKind::Quartic if mu > 0.0 => return quartic_block_value(mu, t),
            _ => {}
        }
        let s = |q: f64| q + mu * self.phi.phi_prime(q) - t;
        let mut lo = hint;
        let mut hi = hint;
        let mut width = 1.0 + hint.abs();
        while s(lo) > 0.0 {
            lo -= width;
            width *= 2.0;
        }
        width = 1.0 + hint.abs();
        while s(hi) < 0.0 {
            hi += width;
            width *= 2.0;
        }
        let mut q = 0.5 * (lo + hi);
        for _ in 0..200 {
            let v = s(q);
            if v == 0.0 {
                break;
            }
            if v > 0.0 {
                hi = q;
            } else {
                lo = q;
            }
            let h = 1e-6 * (1.0 + q.abs());
            let dv = 1.0 + mu * (self.phi.phi_prime(q + h) - self.phi.phi_prime(q - h)) / (2.0 * h);
            let next = q - v / dv;
            q = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
            if hi - lo <= 4.0 * f64::EPSILON * (1.0 + q.abs()) {
                break;
            }
        }
        q
    }

    /// The block value is increasing in the pooled target, so the fit is the
    /// block map applied to the plain PAVA of `y + μφ′(f)`.
    fn fit(&self, mu: f64, y: &[f64]) -> Vec<f64> {
        let mut stack: Vec<FitBlock> = Vec::with_capacity(y.len());
        for (j, &yj) in y.iter().enumerate() {
            let mut cur = FitBlock {
                len: 1,
                sum_t: yj + mu * self.dphi_ref[j],
                sum_y: yj,
            };
            while let Some(prev) = stack.last() {
                if prev.sum_t * cur.len as f64 <= cur.sum_t * prev.len as f64 {
                    break;
                }
                let prev = stack.pop().expect("non-empty");
                cur = FitBlock {
                    len: prev.len + cur.len,
                    sum_t: prev.sum_t + cur.sum_t,
                    sum_y: prev.sum_y + cur.sum_y,
                };
            }
            stack.push(cur);
        }
        let mut out = Vec::with_capacity(y.len());
        for b in &stack {
            let n = b.len as f64;
            let value = if mu == 0.0 {
                b.sum_t / n
            } else {
                self.block_value(mu, b.sum_t / n, b.sum_y / n)
            };
            out.extend(std::iter::repeat_n(value, b.len));
        }
        out
    }

    fn project(&mut self, y: &[f64]) -> Vec<f64> {
        let free = self.fit(0.0, y);
        if self.divergence(&free) <= self.epsilon {
            return free;
        }
        let excess = |mu: f64| self.divergence(&self.fit(mu, y)) - self.epsilon;
        // bracket in t = ln μ, widening geometrically around the previous multiplier
        let t0 = self.last_mu.ln();
        let g0 = excess(t0.exp());
        let (mut t_lo, mut g_lo, mut t_hi, mut g_hi);
        let mut step = 0.02;
        if g0 > 0.0 {
            (t_lo, g_lo) = (t0, g0);
            loop {
                t_hi = t_lo + step;
                g_hi = excess(t_hi.exp());
                if g_hi <= 0.0 {
                    break;
                }
                (t_lo, g_lo) = (t_hi, g_hi);
                step *= 4.0;
            }
        } else {
            (t_hi, g_hi) = (t0, g0);
            loop {
                t_lo = t_hi - step;
                if t_lo < -700.0 {
                    t_lo = f64::NEG_INFINITY;
                    g_lo = excess(0.0);
                    break;
                }
                g_lo = excess(t_lo.exp());
                if g_lo > 0.0 {
                    break;
                }
                (t_hi, g_hi) = (t_lo, g_lo);
                step *= 4.0;
            }
        }
        // Illinois regula falsi, keeping the feasible end `t_hi`
        let mut side = 0i8;
        for _ in 0..100 {
            if g_lo <= 0.0 || -g_hi <= 1e-13 * (1.0 + self.epsilon) || t_hi - t_lo <= 1e-13 {
                break;
            }
            let t = (t_lo * g_hi - t_hi * g_lo) / (g_hi - g_lo);
            let t = if t > t_lo && t < t_hi { t } else { 0.5 * (t_lo + t_hi) };
            let g = excess(t.exp());
            if g > 0.0 {
                t_lo = t;
                g_lo = g;
                if side == 1 {
                    g_hi *= 0.5;
                }
                side = 1;
            } else {
                t_hi = t;
                g_hi = g;
                if side == -1 {
                    g_lo *= 0.5;
                }
                side = -1;
            }
        }
        let mu = if g_lo <= 0.0 { t_lo.exp() } else { t_hi.exp() };
        self.last_mu = mu;
        self.fit(mu, y)
    }
}

/// Real root of `q + 4μq³ = t` for `μ > 0`, via the hyperbolic form of
/// Cardano's formula, polished by one Newton step.
fn quartic_block_value(mu: f64, t: f64) -> f64 {
    // Halley on h(q) = q + aq³ − |t|, a = 4μ, started above the root; the
    // error after a step of size δ is O(δ³)
    let a = 4.0 * mu;
    let x = t.abs();
    if x == 0.0 {
        return 0.0;
    }
    // libm cbrt dominates the cost here; a bit-level estimate is enough to start
    let mut q = if a * x * x <= 1.0 {
        x
    } else {
        f64::from_bits((x / a).to_bits() / 3 + 0x2a9f_7893_782d_a1ce)
    };
    for _ in 0..60 {
        let h = q + a * q * q * q - x;
        let dh = 1.0 + 3.0 * a * q * q;
        let step = h * dh / (dh * dh - 3.0 * a * q * h);
        q -= step;
        if step.abs() <= 1e-6 * q {
            break;
        }
    }
    q.copysign(t)
}
