use std::path::Path;

use serde::{Deserialize, Serialize};
use wcrisk_core::bounds::MahalanobisSpec;
use wcrisk_core::divergence::DiscreteCloud;
use wcrisk_core::sampling::{ReferenceModel, estimate_lipschitz, portfolio_aggregation};
use wcrisk_core::{
    AggregationSpec, BregmanGenerator, DistortionWeight, GeneratorKind, make_es_gamma, make_ier_gamma,
};

use crate::error::CliError;
use crate::expr;

/// Probe points used when a custom expression comes without its Lipschitz constant.
const LIPSCHITZ_PROBES: usize = 20_000;

fn default_grid() -> usize {
    10_000
}

fn default_samples() -> usize {
    100_000
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub reference: ReferenceModel,
    pub aggregation: AggregationConfig,
    pub risk: RiskConfig,
    pub uncertainty: UncertaintyConfig,
    #[serde(rename = "grid_M", default = "default_grid")]
    pub grid_m: usize,
    #[serde(default = "default_samples")]
    pub mc_samples: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Builtin {
    Portfolio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum AggregationConfig {
    Builtin(Builtin),
    /// `g(x) = βᵀx` over all factors.
    Linear(Vec<f64>),
    Expression(ExpressionConfig),
}

/// `g(x) = nonlinear(x) + Σ beta[k]·x[linear_vars[k]]`; variables are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpressionConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonlinear: Option<String>,
    /// `L` of the non-linear block; estimated on the sample's bounding box if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonlinear_lipschitz: Option<f64>,
    #[serde(default)]
    pub linear_vars: Vec<usize>,
    #[serde(default)]
    pub beta: Vec<f64>,
    /// Global `K`; defaults to the bound built from `L` and `β`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RiskConfig {
    Es(f64),
    Ier(f64),
    Piecewise(DistortionWeight),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum UncertaintyConfig {
    /// Wasserstein-2 ball; `epsilon` is a radius.
    Wasserstein {
        epsilon: f64,
        /// Replaces the aggregation's `K`, e.g. by a constant valid on a compact support.
        #[serde(rename = "K", alias = "k", default, skip_serializing_if = "Option::is_none")]
        k: Option<f64>,
        /// Expected `‖β‖₂`; checked against the aggregation.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        beta_norm: Option<f64>,
    },
    Mahalanobis {
        q_diag: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        epsilon: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius: Option<f64>,
    },
    Separable {
        phis: Vec<GeneratorKind>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        epsilon: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius: Option<f64>,
        beta: Vec<f64>,
    },
    Composable {
        phi: GeneratorKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        epsilon: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius: Option<f64>,
    },
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub grid: Option<usize>,
    pub samples: Option<usize>,
    pub radius: Option<f64>,
}

pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Validated, ready-to-run form of a [`RunConfig`].
pub struct Plan {
    pub model: ReferenceModel,
    pub aggregation: AggregationPlan,
    pub gamma: DistortionWeight,
    pub uncertainty: Uncertainty,
    pub grid_m: usize,
    pub samples: usize,
    pub seed: u64,
}

pub enum AggregationPlan {
    Ready(AggregationSpec),
    /// Expression whose `L` is estimated once the reference sample exists.
    Estimate {
        n: usize,
        nonlinear: expr::Expr,
        linear_idx: Vec<usize>,
        beta: Vec<f64>,
        lipschitz: Option<f64>,
    },
}

pub enum Uncertainty {
    Wasserstein {
        radius: f64,
        k: Option<f64>,
        beta_norm: Option<f64>,
    },
    Mahalanobis {
        q: MahalanobisSpec,
        budget: f64,
    },
    Separable {
        phis: Vec<BregmanGenerator>,
        beta: Vec<f64>,
        budget: f64,
    },
    Composable {
        phi: BregmanGenerator,
        budget: f64,
    },
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn non_negative(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(CliError::Config(format!("{name} must be finite and non-negative, got {v}")))
    }
}

/// Exactly one of `epsilon` (a divergence budget) and `radius` (converted to
/// `radius²`, only for unit-scale quadratic costs).
fn budget(epsilon: Option<f64>, radius: Option<f64>, unit_quadratic: bool) -> Result<f64, CliError> {
    match (epsilon, radius) {
        (Some(e), None) => non_negative("epsilon", e),
        (None, Some(r)) if unit_quadratic => Ok(non_negative("radius", r)?.powi(2)),
        (None, Some(_)) => Err(CliError::Config(
            "radius is only defined for quadratic generators with unit scale; give epsilon instead".into(),
        )),
        (Some(_), Some(_)) => Err(CliError::Config("give either epsilon or radius, not both".into())),
        (None, None) => Err(CliError::Config("uncertainty needs epsilon or radius".into())),
    }
}

fn is_unit_quadratic(k: &GeneratorKind) -> bool {
    matches!(k, GeneratorKind::Quadratic(c) if *c == 1.0)
}

impl RunConfig {
    /// Checks everything that can be checked without sampling.
    pub fn resolve(&self, ov: &Overrides) -> Result<Plan, CliError> {
        self.reference.validate().map_err(config_err)?;
        let n = self.reference.n();
        let grid_m = ov.grid.unwrap_or(self.grid_m);
        let samples = ov.samples.unwrap_or(self.mc_samples);
        if grid_m == 0 || samples == 0 {
            return Err(CliError::Config("grid_M and mc_samples must be positive".into()));
        }
        let gamma = match &self.risk {
            RiskConfig::Es(a) => make_es_gamma(*a).map_err(config_err)?,
            RiskConfig::Ier(a) => make_ier_gamma(*a).map_err(config_err)?,
            RiskConfig::Piecewise(w) => w.clone(),
        };
        let aggregation = self.aggregation_plan(n)?;
        let uncertainty = self.uncertainty(n, ov.radius)?;
        Ok(Plan {
            model: self.reference.clone(),
            aggregation,
            gamma,
            uncertainty,
            grid_m,
            samples,
            seed: ov.seed.unwrap_or(self.seed),
        })
    }

    fn aggregation_plan(&self, n: usize) -> Result<AggregationPlan, CliError> {
        let spec = match &self.aggregation {
            AggregationConfig::Builtin(Builtin::Portfolio) => {
                if n != 4 {
                    return Err(CliError::Config(format!(
                        "the portfolio aggregation needs 4 risk factors, the reference has {n}"
                    )));
                }
                portfolio_aggregation()
            }
            AggregationConfig::Linear(beta) => {
                if beta.len() != n {
                    return Err(CliError::Config(format!(
                        "linear aggregation has {} coefficients for {n} risk factors",
                        beta.len()
                    )));
                }
                AggregationSpec::linear(beta.clone(), 2.0).map_err(config_err)?
            }
            AggregationConfig::Expression(e) => return expression_plan(e, n),
        };
        Ok(AggregationPlan::Ready(spec))
    }

    fn uncertainty(&self, n: usize, radius_flag: Option<f64>) -> Result<Uncertainty, CliError> {
        Ok(match &self.uncertainty {
            UncertaintyConfig::Wasserstein { epsilon, k, beta_norm } => Uncertainty::Wasserstein {
                radius: non_negative("epsilon", radius_flag.unwrap_or(*epsilon))?,
                k: *k,
                beta_norm: *beta_norm,
            },
            UncertaintyConfig::Mahalanobis { q_diag, epsilon, radius } => {
                if q_diag.len() != n {
                    return Err(CliError::Config(format!(
                        "q_diag has {} entries for {n} risk factors",
                        q_diag.len()
                    )));
                }
                let (epsilon, radius) = flag_wins(*epsilon, *radius, radius_flag);
                Uncertainty::Mahalanobis {
                    q: MahalanobisSpec::new(q_diag.clone()).map_err(config_err)?,
                    budget: budget(epsilon, radius, true)?,
                }
            }
            UncertaintyConfig::Separable { phis, epsilon, radius, beta } => {
                if phis.len() != n || beta.len() != n {
                    return Err(CliError::Config(format!(
                        "separable uncertainty needs {n} generators and {n} weights"
                    )));
                }
                let (epsilon, radius) = flag_wins(*epsilon, *radius, radius_flag);
                let budget = budget(epsilon, radius, phis.iter().all(is_unit_quadratic))?;
                Uncertainty::Separable {
                    phis: phis
                        .iter()
                        .map(|k| BregmanGenerator::from_kind(*k).map_err(config_err))
                        .collect::<Result<_, _>>()?,
                    beta: beta.clone(),
                    budget,
                }
            }
            UncertaintyConfig::Composable { phi, epsilon, radius } => {
                let (epsilon, radius) = flag_wins(*epsilon, *radius, radius_flag);
                Uncertainty::Composable {
                    phi: BregmanGenerator::from_kind(*phi).map_err(config_err)?,
                    budget: budget(epsilon, radius, is_unit_quadratic(phi))?,
                }
            }
        })
    }
}

fn flag_wins(epsilon: Option<f64>, radius: Option<f64>, flag: Option<f64>) -> (Option<f64>, Option<f64>) {
    match flag {
        Some(r) => (None, Some(r)),
        None => (epsilon, radius),
    }
}

fn expression_plan(e: &ExpressionConfig, n: usize) -> Result<AggregationPlan, CliError> {
    if e.linear_vars.len() != e.beta.len() {
        return Err(CliError::Config("linear_vars and beta differ in length".into()));
    }
    let mut linear_idx = Vec::with_capacity(e.linear_vars.len());
    for &v in &e.linear_vars {
        if v == 0 || v > n {
            return Err(CliError::Config(format!("linear variable x{v} is outside x1..x{n}")));
        }
        linear_idx.push(v - 1);
    }
    let nonlinear = match &e.nonlinear {
        Some(src) => Some(expr::parse(src, n).map_err(config_err)?),
        None => None,
    };
    let vars = nonlinear.as_ref().map(expr::Expr::variables).unwrap_or_default();
    if let Some(v) = linear_idx.iter().find(|i| vars.contains(i)) {
        return Err(CliError::Config(format!(
            "x{} appears in both the non-linear expression and the linear part",
            v + 1
        )));
    }
    match (nonlinear, e.nonlinear_lipschitz) {
        (Some(ex), None) => Ok(AggregationPlan::Estimate {
            n,
            nonlinear: ex,
            linear_idx,
            beta: e.beta.clone(),
            lipschitz: e.lipschitz,
        }),
        (ex, l) => build_expression(n, ex, l.unwrap_or(0.0), linear_idx, e.beta.clone(), e.lipschitz)
            .map(AggregationPlan::Ready),
    }
}

fn build_expression(
    n: usize,
    nonlinear: Option<expr::Expr>,
    l: f64,
    linear_idx: Vec<usize>,
    beta: Vec<f64>,
    k: Option<f64>,
) -> Result<AggregationSpec, CliError> {
    let mut b = AggregationSpec::builder(n).linear(linear_idx, beta).norm_exponent(2.0);
    if let Some(ex) = nonlinear {
        let vars: Vec<usize> = ex.variables().into_iter().collect();
        if vars.is_empty() {
            return Err(CliError::Config("non-linear expression uses no variables".into()));
        }
        let local = ex.remap(&|i| vars.binary_search(&i).expect("collected variable"));
        b = b.nonlinear(vars, move |x| local.eval(x), l);
    }
    if let Some(k) = k {
        b = b.lipschitz(k);
    }
    b.build().map_err(config_err)
}

impl AggregationPlan {
    /// Final aggregation; an estimated `L` is a sampled lower estimate on the
    /// bounding box of `cloud`, reported on stderr.
    pub fn finish(self, cloud: &DiscreteCloud, seed: u64) -> Result<AggregationSpec, CliError> {
        match self {
            AggregationPlan::Ready(a) => Ok(a),
            AggregationPlan::Estimate { n, nonlinear, linear_idx, beta, lipschitz } => {
                let vars: Vec<usize> = nonlinear.variables().into_iter().collect();
                let region: Vec<(f64, f64)> = vars
                    .iter()
                    .map(|&i| {
                        cloud.points().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                            (lo.min(x[i]), hi.max(x[i]))
                        })
                    })
                    .collect();
                let probe = build_expression(vars.len(), Some(nonlinear.clone().remap(&|i| {
                    vars.binary_search(&i).expect("collected variable")
                })), 0.0, Vec::new(), Vec::new(), None)?;
                let l = estimate_lipschitz(&probe, &region, LIPSCHITZ_PROBES, seed)?;
                eprintln!("estimated non-linear Lipschitz constant L = {l:.6} on the sample's bounding box");
                build_expression(n, Some(nonlinear), l, linear_idx, beta, lipschitz)
            }
        }
    }
}
