use serde::{Deserialize, Serialize};

use crate::core::grid::QuantileGrid;
use crate::error::{Error, Result};

/// Which bound formula produced a [`BoundReport`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMethod {
    /// Wasserstein ball, non-decreasing `γ` (closed-form shifts).
    WassersteinLipschitzI,
    /// Wasserstein ball, non-negative `γ` (isotonic solves).
    WassersteinLipschitzIi,
    SeparableBregman,
    MahalanobisI,
    MahalanobisIi,
    ComposableUpperOnly,
}

/// Unit of the `epsilon` carried by a report: a Wasserstein radius or a
/// (Bregman-Wasserstein) divergence budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetUnit {
    Radius,
    Divergence,
}

/// Per-component multipliers of a separable solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentLambdas {
    pub upper: f64,
    pub lower: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub method: BoundMethod,
    pub epsilon: f64,
    pub epsilon_unit: BudgetUnit,
    pub reference_risk: f64,
    pub lower: f64,
    pub upper: f64,
    pub lower_lambda: Option<f64>,
    pub upper_lambda: Option<f64>,
    pub lower_curve: Option<QuantileGrid>,
    pub upper_curve: Option<QuantileGrid>,
    /// The upper-bound curve before isotonic projection, mapped back to
    /// quantile space.
    pub upper_pre_projection: Option<Vec<f64>>,
    pub component_lambdas: Vec<ComponentLambdas>,
}

impl BoundReport {
    /// Report for a zero-radius ball: both bounds equal the reference risk.
    pub fn degenerate(
        method: BoundMethod,
        unit: BudgetUnit,
        reference_risk: f64,
        reference: Option<&QuantileGrid>,
    ) -> Self {
        Self {
            method,
            epsilon: 0.0,
            epsilon_unit: unit,
            reference_risk,
            lower: reference_risk,
            upper: reference_risk,
            lower_lambda: None,
            upper_lambda: None,
            lower_curve: reference.cloned(),
            upper_curve: reference.cloned(),
            upper_pre_projection: reference.map(|r| r.values().to_vec()),
            component_lambdas: Vec::new(),
        }
    }

    /// `lower ≤ upper` (relative slack 1e-9) and, when `γ ≥ 0`, the upper
    /// bound dominates the reference risk.
    pub fn check_invariants(&self, gamma_non_negative: bool) -> Result<()> {
        let scale = 1.0 + self.lower.abs().max(self.upper.abs());
        if self.lower > self.upper + 1e-9 * scale {
            return Err(Error::InternalConsistency(format!(
                "lower bound {} exceeds upper bound {}",
                self.lower, self.upper
            )));
        }
        if gamma_non_negative && self.reference_risk > self.upper + 1e-9 * scale {
            return Err(Error::InternalConsistency(format!(
                "reference risk {} exceeds upper bound {}",
                self.reference_risk, self.upper
            )));
        }
        Ok(())
    }
}
