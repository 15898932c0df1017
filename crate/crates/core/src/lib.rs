//! Bootstrap-based adaptive window selection (BAWS) for online forecasting of
//! elicitable statistics under nonstationarity.
//!
//! At each forecast origin the selector compares a grid of look-back windows.
//! A window `k` is admissible when, for every smaller reference window `i`, the
//! estimator fitted on `k` does not score significantly worse on the most recent
//! `i` observations than the estimator fitted on `i` itself. "Significantly" is
//! decided by a threshold calibrated as a bootstrap quantile of the same score
//! gap. The largest admissible window wins.
//!
//! Supported targets are the mean (squared loss), Value-at-Risk (pinball loss)
//! and the (VaR, ES) pair (a Fissler–Ziegel joint score). Baselines (fixed
//! rolling window, full window, deterministic-threshold selection), synthetic
//! scenario generators, and evaluation metrics are included so that
//! simulation experiments can be run end to end.

pub mod baselines;
pub mod bootstrap;
pub mod error;
pub mod estimators;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod scenarios;
pub mod scoring;
pub mod selection;
pub mod stats;

pub use error::{BawsError, Result};
pub use estimators::{fit, FitResult};
pub use scoring::{ForecastTarget, Level, ParamVector};
pub use selection::{select_window, CandidateGridConfig, SelectionTrace, ThresholdPolicy};
