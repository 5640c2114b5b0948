//! Worst-case signed Choquet risk of aggregated multivariate positions under
//! Wasserstein and Bregman-Wasserstein distributional uncertainty.
//!
//! The crate is organised bottom-up:
//!
//! * [`core`] holds the domain types: quantile grids, distortion weights,
//!   Bregman generators, aggregation specs and bound reports.
//! * [`isotonic`] projects grid functions onto the non-decreasing cone.
//! * [`divergence`] evaluates univariate (Bregman-)Wasserstein divergences on
//!   grids and exhaustive discrete transport between small clouds.
//! * [`worstcase`] solves the univariate worst-case problem for a signed
//!   Choquet integral over a Bregman-Wasserstein ball.
//! * [`bounds`] turns those solves into lower/upper bounds for aggregated
//!   multivariate positions.
//! * [`witness`] builds explicit perturbations that make the set inclusions
//!   checkable on finite samples.
//! * [`sampling`] generates the Monte Carlo reference model.
//! * [`verify`] bundles randomized oracle batteries used by the CLI and the
//!   acceptance suite.

pub mod bounds;
pub mod core;
pub mod divergence;
pub mod error;
pub mod isotonic;
pub mod sampling;
pub mod verify;
pub mod witness;
pub mod worstcase;

pub use crate::core::{
    AggregationSpec, BoundMethod, BoundReport, BregmanGenerator, DistortionWeight, GeneratorKind,
    QuantileGrid, Segment, choquet_integral, make_es_gamma, make_ier_gamma, make_piecewise_gamma,
    quantile_from_samples,
};
pub use crate::error::{Error, Result};
