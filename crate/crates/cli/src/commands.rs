use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use wcrisk_core::bounds::{
    composable_bounds, mahalanobis_bounds, separable_bregman_bounds, separable_gap_bound,
    wasserstein_bounds,
};
use wcrisk_core::core::midpoint;
use wcrisk_core::sampling::{aggregate, sample_reference};
use wcrisk_core::verify::{Suite, run_suite};
use wcrisk_core::{BoundReport, QuantileGrid, quantile_from_samples};

use crate::config::{Plan, Uncertainty};
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Bound report plus the reference quantile grid of `g(X)` it was built on.
pub struct Computed {
    pub report: BoundReport,
    pub reference: Option<QuantileGrid>,
    pub gap_bound: Option<f64>,
}

pub fn compute(plan: Plan) -> Result<Computed, CliError> {
    let cloud = sample_reference(&plan.model, plan.samples, plan.seed)?;
    let gamma = &plan.gamma;
    if let Uncertainty::Separable { phis, beta, budget } = &plan.uncertainty {
        let marginals = (0..plan.model.n())
            .map(|i| {
                let col: Vec<f64> = cloud.points().iter().map(|x| x[i]).collect();
                quantile_from_samples(&col, plan.grid_m)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let report = separable_bregman_bounds(&marginals, gamma, phis, beta, *budget)?;
        let inverse_l: Option<Vec<f64>> = phis.iter().map(|p| p.inverse_lipschitz()).collect();
        let gap_bound = match inverse_l {
            Some(l) if report.component_lambdas.len() == beta.len() => {
                separable_gap_bound(beta, &l, &report.component_lambdas, gamma).ok()
            }
            _ => None,
        };
        return Ok(Computed { report, reference: None, gap_bound });
    }
    let agg = plan.aggregation.finish(&cloud, plan.seed)?;
    let f = quantile_from_samples(&aggregate(&cloud, &agg), plan.grid_m)?;
    let report = match &plan.uncertainty {
        Uncertainty::Wasserstein { radius, k, beta_norm } => {
            if let Some(bn) = beta_norm {
                let actual = agg.beta_norm();
                if (bn - actual).abs() > 1e-9 * (1.0 + actual) {
                    return Err(CliError::Config(format!(
                        "beta_norm {bn} does not match the aggregation's linear part ({actual})"
                    )));
                }
            }
            let agg = match k {
                Some(k) => agg.with_lipschitz(*k).map_err(|e| CliError::Config(e.to_string()))?,
                None => agg,
            };
            wasserstein_bounds(&f, gamma, &agg, *radius)?
        }
        Uncertainty::Mahalanobis { q, budget } => mahalanobis_bounds(&f, gamma, &agg, q, *budget)?,
        Uncertainty::Composable { phi, budget } => composable_bounds(&f, gamma, phi, *budget)?,
        Uncertainty::Separable { .. } => unreachable!("handled above"),
    };
    Ok(Computed { report, reference: Some(f), gap_bound: None })
}

/// Canonical JSON: keys sorted, shortest round-trip floats, trailing newline.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let v = serde_json::to_value(value).map_err(|e| CliError::Config(e.to_string()))?;
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| CliError::Config(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt_float(v: Option<f64>) -> String {
    v.map_or_else(String::new, float)
}

pub fn bound_csv(c: &Computed) -> String {
    let r = &c.report;
    let method = serde_json::to_value(r.method)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default();
    let mut out = String::from("metric,value\n");
    let mut row = |k: &str, v: String| writeln!(out, "{k},{v}").expect("string write");
    row("method", method);
    row("epsilon", float(r.epsilon));
    row("reference_risk", float(r.reference_risk));
    row("lower", float(r.lower));
    row("upper", float(r.upper));
    row("lower_lambda", opt_float(r.lower_lambda));
    row("upper_lambda", opt_float(r.upper_lambda));
    if let Some(g) = c.gap_bound {
        row("gap_bound", float(g));
    }
    out
}

pub fn worst_case_csv(c: &Computed) -> Result<String, CliError> {
    let f = c.reference.as_ref().ok_or_else(|| {
        CliError::Config("worst-case curves need an uncertainty set on g(X); separable sets bound βᵀX componentwise".into())
    })?;
    let r = &c.report;
    let lower = r.lower_curve.as_ref().unwrap_or(f).values();
    let upper = r.upper_curve.as_ref().unwrap_or(f).values();
    let pre = r.upper_pre_projection.as_deref().unwrap_or(upper);
    let m = f.len();
    let mut out = String::with_capacity(100 * (m + 1));
    out.push_str("u,reference_quantile,lower_curve,upper_curve,pre_projection_upper\n");
    for (j, q) in f.values().iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{},{}",
            float(midpoint(j, m)),
            float(*q),
            float(lower[j]),
            float(upper[j]),
            float(pre[j])
        )
        .expect("string write");
    }
    Ok(out)
}

pub fn sample_csv(plan: Plan) -> Result<String, CliError> {
    let cloud = sample_reference(&plan.model, plan.samples, plan.seed)?;
    let agg = plan.aggregation.finish(&cloud, plan.seed)?;
    let values = aggregate(&cloud, &agg);
    let mut out = String::with_capacity(25 * (values.len() + 1));
    out.push_str("aggregate\n");
    for v in values {
        out.push_str(&float(v));
        out.push('\n');
    }
    Ok(out)
}

/// Runs a named suite, printing one line per check; fails if any check fails.
pub fn verify(suite: &str, seed: u64, sink: &mut dyn Write) -> Result<(), CliError> {
    let suite: Suite = suite.parse().map_err(|_| {
        let names: Vec<&str> = Suite::ALL.iter().map(|s| s.name()).collect();
        CliError::Config(format!("unknown suite '{suite}', expected one of {}", names.join(", ")))
    })?;
    let outcomes = run_suite(suite, seed)?;
    for o in &outcomes {
        writeln!(sink, "{o}").map_err(|source| CliError::Io { path: "<stdout>".into(), source })?;
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    if failed > 0 {
        return Err(CliError::ChecksFailed { failed, total: outcomes.len() });
    }
    Ok(())
}

pub fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|source| CliError::Io {
            path: p.display().to_string(),
            source,
        }),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Io { path: "<stdout>".into(), source }),
    }
}
