//! Reference forecasters: fixed rolling window, full (recursive) window, and
//! stability selection with deterministic thresholds (SAWS).

use serde::{Deserialize, Serialize};

use crate::error::{domain, parameter, Result};
use crate::estimators::{fit, FitResult};
use crate::scoring::ForecastTarget;
use crate::selection::{select_window, CandidateGridConfig, SelectionTrace, ThresholdPolicy};

/// Decay family of the deterministic threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SawsFamily {
    /// `C * i^-(1 - a)`, for strongly convex and smooth losses.
    ConvexSmooth,
    /// `C * i^-(1/2 - a)`, for Lipschitz losses.
    Lipschitz,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SawsConfig {
    pub alpha_tau: f64,
    pub c_tau: f64,
    pub family: SawsFamily,
}

impl SawsConfig {
    pub fn new(alpha_tau: f64, c_tau: f64, family: SawsFamily) -> Result<Self> {
        let cfg = Self { alpha_tau, c_tau, family };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Constants used for mean forecasts in the simulation settings.
    pub fn mean_default() -> Self {
        Self { alpha_tau: 0.1, c_tau: 0.3, family: SawsFamily::ConvexSmooth }
    }

    /// Constants used for VaR forecasts in the simulation settings.
    pub fn var_default() -> Self {
        Self { alpha_tau: 0.1, c_tau: 0.5, family: SawsFamily::Lipschitz }
    }

    /// Family matching the loss: convex-smooth for the mean, Lipschitz otherwise.
    pub fn family_for(target: &ForecastTarget) -> SawsFamily {
        match target {
            ForecastTarget::Mean => SawsFamily::ConvexSmooth,
            _ => SawsFamily::Lipschitz,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_tau > 0.0 && self.alpha_tau < 1.0) {
            return Err(parameter(format!("alpha_tau = {} must lie in (0, 1)", self.alpha_tau)));
        }
        if !(self.c_tau > 0.0) {
            return Err(parameter(format!("C_tau = {} must be positive", self.c_tau)));
        }
        Ok(())
    }
}

/// Deterministic threshold for reference window length `i`.
pub fn saws_threshold(i: usize, cfg: &SawsConfig) -> f64 {
    let exponent = match cfg.family {
        SawsFamily::ConvexSmooth => 1.0 - cfg.alpha_tau,
        SawsFamily::Lipschitz => 0.5 - cfg.alpha_tau,
    };
    cfg.c_tau * (i.max(1) as f64).powf(-exponent)
}

/// Fits on the last `min(k, history.len())` observations.
pub fn rolling_forecast(history: &[f64], k: usize, target: &ForecastTarget) -> Result<FitResult> {
    if history.is_empty() {
        return Err(domain("rolling forecast needs a non-empty history"));
    }
    if k == 0 {
        return Err(parameter("rolling window length must be positive"));
    }
    let k = k.min(history.len());
    fit(&history[history.len() - k..], target)
}

/// Fits on the entire history.
pub fn full_window_forecast(history: &[f64], target: &ForecastTarget) -> Result<FitResult> {
    rolling_forecast(history, usize::MAX, target)
}

/// Stability selection with [`saws_threshold`] in place of bootstrap thresholds.
pub fn saws_select(
    history: &[f64],
    target: &ForecastTarget,
    cfg: &SawsConfig,
    grid: &CandidateGridConfig,
    prev_k: Option<usize>,
) -> Result<SelectionTrace> {
    select_window(history, target, &ThresholdPolicy::Saws(*cfg), grid, prev_k)
}
