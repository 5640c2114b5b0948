//! Randomised self-check batteries comparing the closed-form and iterative
//! machinery against independent oracles. Every battery is seeded and
//! returns one outcome per property, aggregated over its instances.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::bounds::{MahalanobisSpec, lipschitz_bound, table1_compare};
use crate::core::{
    AggregationSpec, BregmanGenerator, DistortionWeight, QuantileGrid, make_es_gamma,
    make_piecewise_gamma, quantile_from_samples,
};
use crate::divergence::{Cost, DiscreteCloud, bregman_wasserstein_1d, discrete_ot_oracle};
use crate::error::{Error, Result};
use crate::isotonic::{isotonic_maxmin_oracle, isotonic_partition_oracle, isotonic_projection};
use crate::sampling::{CopulaSpec, MarginalSpec, ReferenceModel, aggregate, sample_reference};
use crate::witness::{construct_witness, identity_coupling_cost, verify_inclusion};
use crate::worstcase::{solve_lambda, worstcase_brute_oracle_with, BruteOracleConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Isotonic,
    Separability,
    Inclusion,
    OracleWorstcase,
    Table1,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Isotonic,
        Suite::Separability,
        Suite::Inclusion,
        Suite::OracleWorstcase,
        Suite::Table1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Isotonic => "isotonic",
            Suite::Separability => "separability",
            Suite::Inclusion => "inclusion",
            Suite::OracleWorstcase => "oracle-worstcase",
            Suite::Table1 => "table1",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown suite '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub suite: &'static str,
    pub name: String,
    pub passed: bool,
    pub instances: usize,
    /// Largest error (or smallest slack) observed.
    pub worst: f64,
    pub tolerance: f64,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}/{} instances={} worst={:e} tol={:e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.suite,
            self.name,
            self.instances,
            self.worst,
            self.tolerance
        )
    }
}

/// Running worst-case error of one property.
struct Tally {
    suite: &'static str,
    name: &'static str,
    tol: f64,
    worst: f64,
    count: usize,
    failed: bool,
}

impl Tally {
    fn new(suite: &'static str, name: &'static str, tol: f64) -> Self {
        Self {
            suite,
            name,
            tol,
            worst: 0.0,
            count: 0,
            failed: false,
        }
    }

    /// Records an error that must not exceed the tolerance.
    fn error(&mut self, e: f64) {
        self.count += 1;
        if !(e <= self.tol) {
            self.failed = true;
        }
        if e > self.worst || e.is_nan() {
            self.worst = e;
        }
    }

    fn fail(&mut self) {
        self.count += 1;
        self.failed = true;
    }

    fn finish(self) -> CheckOutcome {
        CheckOutcome {
            suite: self.suite,
            name: self.name.to_string(),
            passed: !self.failed && self.count > 0,
            instances: self.count,
            worst: self.worst,
            tolerance: self.tol,
        }
    }
}

/// Instance counts per suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuiteSize {
    pub primary: usize,
    pub secondary: usize,
    pub properties: usize,
}

impl Suite {
    pub fn default_size(self) -> SuiteSize {
        match self {
            Suite::Isotonic => SuiteSize { primary: 200, secondary: 500, properties: 1000 },
            Suite::Separability => SuiteSize { primary: 200, secondary: 200, properties: 0 },
            Suite::Inclusion => SuiteSize { primary: 200, secondary: 50, properties: 0 },
            Suite::OracleWorstcase => SuiteSize { primary: 50, secondary: 0, properties: 0 },
            Suite::Table1 => SuiteSize { primary: 100, secondary: 0, properties: 0 },
        }
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<Vec<CheckOutcome>> {
    run_suite_sized(suite, seed, suite.default_size())
}

pub fn run_suite_sized(suite: Suite, seed: u64, size: SuiteSize) -> Result<Vec<CheckOutcome>> {
    match suite {
        Suite::Isotonic => Ok(isotonic_battery(seed, size.primary, size.secondary, size.properties)),
        Suite::Separability => separability_battery(seed, size.primary, size.secondary),
        Suite::Inclusion => inclusion_battery(seed, size.primary, size.secondary),
        Suite::OracleWorstcase => oracle_worstcase_battery(seed, size.primary),
        Suite::Table1 => table1_battery(seed, size.primary),
    }
}

/// Random array mixing continuous values, heavy ties and near-sorted runs.
pub fn random_array(rng: &mut impl Rng, max_len: usize) -> Vec<f64> {
    let m = rng.random_range(1..=max_len);
    match rng.random_range(0..3) {
        0 => (0..m).map(|_| rng.sample::<f64, _>(StandardNormal) * 3.0).collect(),
        1 => (0..m).map(|_| rng.random_range(-2..=2) as f64).collect(),
        _ => (0..m)
            .map(|i| i as f64 / m as f64 + 0.3 * rng.sample::<f64, _>(StandardNormal))
            .collect(),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn iso(l: &[f64]) -> Vec<f64> {
    isotonic_projection(l).expect("finite input").0
}

/// Isotonic projection against the max-min and partition oracles, and the
/// structural properties of the projection.
pub fn isotonic_battery(seed: u64, maxmin: usize, partition: usize, properties: usize) -> Vec<CheckOutcome> {
    const S: &str = "isotonic";
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t_maxmin = Tally::new(S, "pava_vs_maxmin", 1e-9);
    for _ in 0..maxmin {
        let l = random_array(&mut rng, 500);
        t_maxmin.error(max_abs_diff(&iso(&l), &isotonic_maxmin_oracle(&l)));
    }
    let mut t_part = Tally::new(S, "pava_vs_partition", 1e-9);
    for _ in 0..partition {
        let l = random_array(&mut rng, 12);
        match isotonic_partition_oracle(&l) {
            Ok(o) => t_part.error(max_abs_diff(&iso(&l), &o)),
            Err(_) => t_part.fail(),
        }
    }

    let mut t_scale = Tally::new(S, "positive_homogeneity", 1e-9);
    let mut t_shift = Tally::new(S, "translation", 1e-9);
    let mut t_means = Tally::new(S, "block_means", 1e-9);
    let mut t_order = Tally::new(S, "ordering", 1e-9);
    let mut t_orth = Tally::new(S, "orthogonality", 1e-9);
    let mut t_var = Tally::new(S, "variational_inequality", 1e-9);
    let mut t_dual = Tally::new(S, "dual_inequality", 1e-9);
    let mut t_avg = Tally::new(S, "level_set_averages", 1e-9);
    for _ in 0..properties {
        let l = random_array(&mut rng, 200);
        let m = l.len();
        let scale = 1.0 + l.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let (p, blocks) = isotonic_projection(&l).expect("finite input");

        let k = rng.random_range(0.0..5.0);
        let kl: Vec<f64> = l.iter().map(|v| k * v).collect();
        let kp: Vec<f64> = p.iter().map(|v| k * v).collect();
        t_scale.error(max_abs_diff(&iso(&kl), &kp) / (1.0 + k * scale));

        let c = rng.random_range(-10.0..10.0);
        let cl: Vec<f64> = l.iter().map(|v| v + c).collect();
        let cp: Vec<f64> = p.iter().map(|v| v + c).collect();
        t_shift.error(max_abs_diff(&iso(&cl), &cp) / (scale + c.abs()));

        let mut worst_mean: f64 = 0.0;
        let mut covered = 0;
        let mut increasing = true;
        for (i, b) in blocks.blocks.iter().enumerate() {
            let mean = l[b.start..=b.end].iter().sum::<f64>() / (b.end - b.start + 1) as f64;
            worst_mean = worst_mean.max((mean - b.theta).abs() / scale);
            covered += b.end - b.start + 1;
            if i > 0 && blocks.blocks[i - 1].theta >= b.theta {
                increasing = false;
            }
        }
        if covered == m && increasing {
            t_means.error(worst_mean);
        } else {
            t_means.fail();
        }

        let lower: Vec<f64> = l.iter().map(|v| v - rng.random::<f64>()).collect();
        let pl = iso(&lower);
        t_order.error(pl.iter().zip(&p).map(|(a, b)| (a - b).max(0.0)).fold(0.0, f64::max));

        let resid: Vec<f64> = l.iter().zip(&p).map(|(a, b)| a - b).collect();
        let norm = m as f64 * scale * scale;
        for psi in [|x: f64| x, |x: f64| x.sin(), |x: f64| (x > 0.0) as u8 as f64] {
            let w: Vec<f64> = p.iter().map(|&x| psi(x)).collect();
            t_orth.error(dot(&resid, &w).abs() / norm);
        }

        let mut f: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal) * scale).collect();
        f.sort_by(f64::total_cmp);
        let gap: Vec<f64> = p.iter().zip(&f).map(|(a, b)| a - b).collect();
        t_var.error((-dot(&resid, &gap)).max(0.0) / (norm * 4.0));
        t_dual.error(dot(&resid, &f).max(0.0) / (norm * 4.0));

        // averages of l over {iso ≥ a} ∩ lower set and {iso ≤ a} ∩ upper set
        let a = p[rng.random_range(0..m)];
        let cut = rng.random_range(1..=m);
        let avg = |idx: &mut dyn Iterator<Item = usize>| {
            let (s, n) = idx.fold((0.0, 0usize), |(s, n), i| (s + l[i], n + 1));
            (n > 0).then(|| s / n as f64)
        };
        if let Some(v) = avg(&mut (0..cut).filter(|&i| p[i] >= a)) {
            t_avg.error((a - v).max(0.0) / scale);
        }
        if let Some(v) = avg(&mut (m - cut..m).filter(|&i| p[i] <= a)) {
            t_avg.error((v - a).max(0.0) / scale);
        }
    }
    [t_maxmin, t_part, t_scale, t_shift, t_means, t_order, t_orth, t_var, t_dual, t_avg]
        .into_iter()
        .map(Tally::finish)
        .collect()
}

fn random_generator(rng: &mut impl Rng) -> BregmanGenerator {
    if rng.random_bool(0.5) {
        BregmanGenerator::quadratic(rng.random_range(0.25..3.0)).expect("positive scale")
    } else {
        BregmanGenerator::quartic()
    }
}

fn random_cloud(rng: &mut impl Rng, n_points: usize, dim: usize, comonotone: bool) -> DiscreteCloud {
    let mut cols: Vec<Vec<f64>> = (0..dim)
        .map(|_| {
            let shift = rng.random_range(-1.0..1.0);
            (0..n_points).map(|_| shift + rng.sample::<f64, _>(StandardNormal)).collect()
        })
        .collect();
    if comonotone {
        for c in &mut cols {
            c.sort_by(f64::total_cmp);
        }
    }
    DiscreteCloud::new((0..n_points).map(|i| cols.iter().map(|c| c[i]).collect()).collect())
        .expect("finite points")
}

/// One separable instance: `(multivariate oracle cost, Σ_k coordinate-wise
/// 1-D divergence)`. With `comonotone` every cloud is sorted in every
/// coordinate, so a single coupling is comonotone in each coordinate.
pub fn separability_instance(rng: &mut impl Rng, comonotone: bool) -> Result<(f64, f64)> {
    let dim = rng.random_range(2..=3);
    let n_points = rng.random_range(2..=6);
    let phis: Vec<BregmanGenerator> = (0..dim).map(|_| random_generator(rng)).collect();
    let z = random_cloud(rng, n_points, dim, comonotone);
    let x = random_cloud(rng, n_points, dim, comonotone);
    let oracle = discrete_ot_oracle(&z, &x, &Cost::Bregman(phis.clone()))?;
    let mut sum = 0.0;
    for (k, phi) in phis.iter().enumerate() {
        let zk = quantile_from_samples(&z.coordinate(k), n_points)?;
        let xk = quantile_from_samples(&x.coordinate(k), n_points)?;
        sum += bregman_wasserstein_1d(&zk, &xk, phi)?;
    }
    Ok((oracle, sum))
}

/// Multivariate separable divergence against the sum of coordinate-wise
/// divergences. The sum never exceeds the joint cost, and the two agree
/// when one coupling is comonotone in every coordinate.
pub fn separability_battery(seed: u64, generic: usize, comonotone: usize) -> Result<Vec<CheckOutcome>> {
    const S: &str = "separability";
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t_lower = Tally::new(S, "coordinate_sum_below_joint", 1e-8);
    for _ in 0..generic {
        let (oracle, sum) = separability_instance(&mut rng, false)?;
        t_lower.error((sum - oracle).max(0.0) / (1.0 + oracle.abs()));
    }
    let mut t_eq = Tally::new(S, "identity_on_comonotone_clouds", 1e-8);
    for _ in 0..comonotone {
        let (oracle, sum) = separability_instance(&mut rng, true)?;
        t_eq.error((oracle - sum).abs() / (1.0 + oracle.abs()));
    }
    Ok(vec![t_lower.finish(), t_eq.finish()])
}

/// Aggregation with a one-hidden-layer ReLU network on the first `m`
/// coordinates and a random linear part on the rest. The network's
/// Lipschitz constant is certified by the product of Frobenius norms.
pub fn random_relu_aggregation(rng: &mut impl Rng, n: usize, m: usize) -> AggregationSpec {
    let linear_idx: Vec<usize> = (m..n).collect();
    let beta: Vec<f64> = linear_idx.iter().map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let mut builder = AggregationSpec::builder(n).linear(linear_idx, beta.clone());
    if m > 0 {
        let width = rng.random_range(2..=4);
        let w1: Vec<Vec<f64>> = (0..width)
            .map(|_| (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let b1: Vec<f64> = (0..width).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let w2: Vec<f64> = (0..width).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let frob = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let w1_norm = w1.iter().map(|r| frob(r).powi(2)).sum::<f64>().sqrt();
        let l = w1_norm * frob(&w2);
        let net = move |x: &[f64]| -> f64 {
            w1.iter()
                .zip(&b1)
                .zip(&w2)
                .map(|((row, b), v)| v * (dot(row, x) + b).max(0.0))
                .sum()
        };
        builder = builder.nonlinear((0..m).collect(), net, l);
    }
    let agg = builder.build().expect("well-formed random aggregation");
    debug_assert!(
        agg.lipschitz() <= lipschitz_bound(agg.nonlinear_lipschitz(), &beta, 2.0, n) + 1e-12
    );
    agg
}

/// Per-instance results of [`inclusion_instance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InclusionInstance {
    /// `max |g(Z_i) − z_i| / (1 + |z_i|)`.
    pub target_error: f64,
    /// `W_n(Z, X) − ε` (≤ 0 when feasible).
    pub feasibility_excess: f64,
    /// `W(g(Z), g(X)) − K·ε`.
    pub image_excess: f64,
}

/// Witness for random targets within `‖β‖₂·ε` of `g(X)`, checked with the
/// exhaustive OT oracle.
pub fn inclusion_instance(rng: &mut impl Rng) -> Result<InclusionInstance> {
    let n = rng.random_range(2..=4);
    let m = rng.random_range(0..n);
    let agg = random_relu_aggregation(rng, n, m);
    let n_points = rng.random_range(2..=6);
    let x = random_cloud(rng, n_points, n, false);
    let eps = rng.random_range(0.1..2.0);
    let gx: Vec<f64> = x.points().iter().map(|p| agg.eval(p)).collect();
    let d: Vec<f64> = (0..n_points).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let d_norm = (d.iter().map(|v| v * v).sum::<f64>() / n_points as f64).sqrt();
    let radius = agg.beta_norm() * eps * rng.random_range(0.05..1.0);
    let targets: Vec<f64> = gx.iter().zip(&d).map(|(g, v)| g + v * radius / d_norm).collect();
    let z = construct_witness(&x, &agg, &targets, eps, 2.0)?;
    let target_error = z
        .points()
        .iter()
        .zip(&targets)
        .map(|(p, t)| (agg.eval(p) - t).abs() / (1.0 + t.abs()))
        .fold(0.0, f64::max);
    let v = verify_inclusion(&x, &z, &agg, eps, 2.0, None)?;
    Ok(InclusionInstance {
        target_error,
        feasibility_excess: v.multivariate_distance - eps,
        image_excess: v.univariate_distance - agg.lipschitz() * eps,
    })
}

/// Linear position, every point shifted by the full budget: returns
/// `(W(g(Z), g(X)), ‖β‖₂ε, Kε)`.
pub fn linear_full_budget_instance(rng: &mut impl Rng) -> Result<(f64, f64, f64)> {
    let n = rng.random_range(1..=4);
    let agg = random_relu_aggregation(rng, n, 0);
    let n_points = rng.random_range(2..=6);
    let x = random_cloud(rng, n_points, n, false);
    let eps = rng.random_range(0.1..2.0);
    let shift = agg.beta_norm() * eps;
    let targets: Vec<f64> = x.points().iter().map(|p| agg.eval(p) + shift).collect();
    let z = construct_witness(&x, &agg, &targets, eps, 2.0)?;
    let v = verify_inclusion(&x, &z, &agg, eps, 2.0, None)?;
    Ok((v.univariate_distance, shift, agg.lipschitz() * eps))
}

/// Witness exactness and feasibility, and the image-distance inclusion for
/// witnesses and for arbitrary in-ball perturbations.
pub fn inclusion_battery(seed: u64, instances: usize, linear: usize) -> Result<Vec<CheckOutcome>> {
    const S: &str = "inclusion";
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t_exact = Tally::new(S, "witness_hits_targets", 1e-12);
    let mut t_feas = Tally::new(S, "witness_in_ball", 1e-9);
    let mut t_image = Tally::new(S, "image_within_k_epsilon", 1e-9);
    for _ in 0..instances {
        let r = inclusion_instance(&mut rng)?;
        t_exact.error(r.target_error);
        t_feas.error(r.feasibility_excess.max(0.0));
        t_image.error(r.image_excess.max(0.0));
    }
    let mut t_pert = Tally::new(S, "perturbation_image_within_k_distance", 1e-9);
    for _ in 0..instances {
        let n = rng.random_range(1..=4);
        let m = rng.random_range(0..=n);
        let agg = random_relu_aggregation(&mut rng, n, m);
        let n_points = rng.random_range(2..=6);
        let x = random_cloud(&mut rng, n_points, n, false);
        let noise = rng.random_range(0.01..2.0);
        let z = DiscreteCloud::new(
            x.points()
                .iter()
                .map(|p| p.iter().map(|v| v + noise * rng.sample::<f64, _>(StandardNormal)).collect())
                .collect(),
        )?;
        let eps = identity_coupling_cost(&x, &z, 2.0, 2.0);
        let v = verify_inclusion(&x, &z, &agg, eps, 2.0, None)?;
        let bound = agg.lipschitz() * v.multivariate_distance;
        t_pert.error((v.univariate_distance - bound).max(0.0));
    }
    let mut t_lin = Tally::new(S, "linear_full_budget_sandwich", 1e-9);
    for _ in 0..linear {
        let (w, lo, hi) = linear_full_budget_instance(&mut rng)?;
        t_lin.error((lo - w).max(w - hi).max(0.0));
    }
    Ok([t_exact, t_feas, t_image, t_pert, t_lin].into_iter().map(Tally::finish).collect())
}

/// Grid of length `m` from sorted normals with a random location and scale.
pub fn random_grid(rng: &mut impl Rng, m: usize) -> QuantileGrid {
    let loc = rng.random_range(-2.0..2.0);
    let scale = rng.random_range(0.2..2.0);
    let mut v: Vec<f64> = (0..m).map(|_| loc + scale * rng.sample::<f64, _>(StandardNormal)).collect();
    v.sort_by(f64::total_cmp);
    QuantileGrid::new(v).expect("sorted finite values")
}

/// Random non-negative piecewise-constant weight with 1–5 pieces; sorted
/// values when `non_decreasing`.
pub fn random_gamma(rng: &mut impl Rng, non_decreasing: bool) -> DistortionWeight {
    let pieces = rng.random_range(1..=5);
    let mut cuts: Vec<f64> = (1..pieces).map(|_| rng.random_range(0.05..0.95)).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut values: Vec<f64> = (0..=cuts.len()).map(|_| rng.random_range(0.0..4.0)).collect();
    if values.iter().all(|&v| v == 0.0) {
        values[0] = 1.0;
    }
    if non_decreasing {
        values.sort_by(f64::total_cmp);
    } else {
        values.shuffle(rng);
    }
    let mut bounds = vec![0.0];
    bounds.extend(&cuts);
    bounds.push(1.0);
    let segs: Vec<(f64, f64, f64)> = bounds.windows(2).zip(&values).map(|(w, &v)| (w[0], w[1], v)).collect();
    make_piecewise_gamma(&segs).expect("valid partition")
}

/// `(solver, oracle)` worst-case risks on a random instance with `M = 40`.
pub fn oracle_worstcase_instance(rng: &mut impl Rng) -> Result<(f64, f64)> {
    const M: usize = 40;
    let f = random_grid(rng, M);
    let gamma = loop {
        let sorted = rng.random_bool(0.3);
        let g = random_gamma(rng, sorted);
        if g.sample(M).iter().any(|&w| w > 0.0) {
            break g;
        }
    };
    let phi = random_generator(rng);
    let eps = rng.random_range(0.01..1.0);
    let solved = solve_lambda(&f, &gamma, &phi, eps)?;
    let config = BruteOracleConfig {
        seed: rng.random(),
        ..BruteOracleConfig::default()
    };
    let oracle = worstcase_brute_oracle_with(&f, &gamma, &phi, eps, config)?;
    Ok((solved.worst_risk, oracle))
}

pub fn oracle_worstcase_battery(seed: u64, instances: usize) -> Result<Vec<CheckOutcome>> {
    const S: &str = "oracle-worstcase";
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t_agree = Tally::new(S, "solver_matches_projected_ascent", 5e-3);
    let mut t_dominates = Tally::new(S, "solver_dominates_feasible_ascent", 1e-9);
    for _ in 0..instances {
        let (solved, oracle) = oracle_worstcase_instance(&mut rng)?;
        let scale = 1.0 + solved.abs();
        t_agree.error((solved - oracle).abs() / scale);
        t_dominates.error((oracle - solved).max(0.0) / scale);
    }
    Ok(vec![t_agree.finish(), t_dominates.finish()])
}

/// Random linear instance: non-negative weights on a t-copula reference.
pub fn table1_instance(rng: &mut impl Rng) -> Result<crate::bounds::Table1Report> {
    let n = rng.random_range(1..=4);
    let beta: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..3.0)).collect();
    let beta = if beta.iter().all(|&b| b == 0.0) { vec![1.0; n] } else { beta };
    let agg = AggregationSpec::linear(beta, 2.0)?;
    let model = ReferenceModel {
        marginals: (0..n)
            .map(|_| MarginalSpec::Normal {
                mu: rng.random_range(-2.0..2.0),
                sigma: rng.random_range(0.5..2.0),
            })
            .collect(),
        copula: if n > 1 {
            CopulaSpec::StudentT { df: 4.0, rho: rng.random_range(0.0..0.9) }
        } else {
            CopulaSpec::Independent
        },
    };
    let m = 200;
    let cloud = sample_reference(&model, 2_000, rng.random())?;
    let marginals = (0..n)
        .map(|k| quantile_from_samples(&cloud.coordinate(k), m))
        .collect::<Result<Vec<_>>>()?;
    let f_agg = quantile_from_samples(&aggregate(&cloud, &agg), m)?;
    let gamma = if rng.random_bool(0.5) {
        make_es_gamma(rng.random_range(0.5..0.99))?
    } else {
        random_gamma(rng, true)
    };
    let eps = rng.random_range(0.05..2.0);
    table1_compare(&agg, &gamma, &marginals, &f_agg, eps, Some(&MahalanobisSpec::identity(n)))
}

pub fn table1_battery(seed: u64, instances: usize) -> Result<Vec<CheckOutcome>> {
    const S: &str = "table1";
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t_order = Tally::new(S, "ordering_chain", 0.0);
    let mut t_ident = Tally::new(S, "identity_q_matches_wasserstein", 1e-9);
    for _ in 0..instances {
        match table1_instance(&mut rng) {
            Ok(t) => {
                t_order.error(0.0);
                let (md, ms) = (t.mahalanobis_direct.expect("requested"), t.mahalanobis_separable.expect("requested"));
                let scale = 1.0 + t.wasserstein_separable.upper.abs();
                let diffs = [
                    md.lower - t.wasserstein_direct.lower,
                    md.upper - t.wasserstein_direct.upper,
                    ms.lower - t.wasserstein_separable.lower,
                    ms.upper - t.wasserstein_separable.upper,
                ];
                t_ident.error(diffs.iter().fold(0.0f64, |a, d| a.max(d.abs())) / scale);
            }
            Err(Error::InternalConsistency(_)) => t_order.fail(),
            Err(e) => return Err(e),
        }
    }
    Ok(vec![t_order.finish(), t_ident.finish()])
}
