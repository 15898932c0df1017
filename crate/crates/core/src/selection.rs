//! Adaptive window selection: candidate grid, pairwise stability tests, and
//! the largest admissible window.
//!
//! For every candidate `k` and every smaller candidate `i`, the statistic
//! `f_i(theta_k) - f_i(theta_i)` (how much worse the long-window fit scores on
//! the recent `i` observations) is compared with a threshold `tau(t, i)`.
//! Window `k` is admissible when no comparison exceeds its threshold; the
//! smallest candidate is admissible by default.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{saws_threshold, SawsConfig};
use crate::bootstrap::{bootstrap_gaps, BootstrapConfig, GapSample};
use crate::error::{parameter, BawsError, Result};
use crate::estimators::{FitResult, WindowSummary};
use crate::rng;
use crate::scoring::{ForecastTarget, Level, ParamVector};
use crate::stats::norm_cdf;

/// Increasing-interval candidate grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateGridConfig {
    /// Smallest window `k0` ever considered.
    pub min_window: usize,
    /// Optional cap on every candidate.
    pub max_window: Option<usize>,
    /// `(upper, step)` bands: below `upper` (and at or above the previous
    /// band's upper bound) grid points are the multiples of `step`.
    pub bands: Vec<(usize, usize)>,
    /// Step for multiples beyond the last band.
    pub tail_step: usize,
    /// Spacing of the exploration points `prev + 1, prev + 1 + step, ...`.
    pub exploration_step: usize,
}

impl Default for CandidateGridConfig {
    fn default() -> Self {
        Self {
            min_window: 20,
            max_window: None,
            bands: vec![(50, 5), (100, 10), (300, 20), (1000, 50)],
            tail_step: 100,
            exploration_step: 50,
        }
    }
}

impl CandidateGridConfig {
    pub fn with_min_window(mut self, k0: usize) -> Self {
        self.min_window = k0;
        self
    }

    pub fn with_max_window(mut self, cap: Option<usize>) -> Self {
        self.max_window = cap;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_window < 2 {
            return Err(parameter("minimum window k0 must be at least 2"));
        }
        if let Some(cap) = self.max_window {
            if cap < self.min_window {
                return Err(parameter(format!(
                    "max window {cap} is below the minimum window {}",
                    self.min_window
                )));
            }
        }
        if self.tail_step == 0 || self.exploration_step == 0 || self.bands.iter().any(|b| b.1 == 0) {
            return Err(parameter("grid increments must be positive"));
        }
        if self.bands.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(parameter("grid breakpoints must be strictly increasing"));
        }
        Ok(())
    }

    /// Effective upper limit `min(history_length, max_window)`.
    pub fn limit(&self, history_length: usize) -> usize {
        self.max_window.map_or(history_length, |cap| cap.min(history_length))
    }

    /// Grid points in `[min_window, upper]`, ascending.
    fn grid_up_to(&self, upper: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut lo: usize = 0;
        for &(hi, step) in &self.bands {
            let mut p = lo.div_ceil(step) * step;
            while p < hi && p <= upper {
                if p >= self.min_window {
                    out.push(p);
                }
                p += step;
            }
            lo = hi;
        }
        let mut p = lo.div_ceil(self.tail_step) * self.tail_step;
        while p <= upper {
            if p >= self.min_window {
                out.push(p);
            }
            p += self.tail_step;
        }
        out
    }
}

/// Candidate set `K_t` given `history_length = t - 1` past observations and
/// the previous selection.
pub fn candidate_windows(
    history_length: usize,
    prev_k: Option<usize>,
    cfg: &CandidateGridConfig,
) -> Result<Vec<usize>> {
    cfg.validate()?;
    if history_length < cfg.min_window {
        return Err(BawsError::InsufficientHistory {
            needed: cfg.min_window,
            available: history_length,
        });
    }
    let limit = cfg.limit(history_length);
    let mut out = match prev_k {
        None => cfg.grid_up_to(limit),
        Some(prev) => {
            let prev = prev.clamp(cfg.min_window, limit);
            let mut v = cfg.grid_up_to(prev);
            v.push(prev);
            let mut p = prev + 1;
            while p <= limit {
                v.push(p);
                p += cfg.exploration_step;
            }
            v
        }
    };
    out.push(cfg.min_window);
    out.push(limit);
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// `1` iff `gap > tau`; equality accepts.
#[inline]
pub fn pairwise_test(gap: f64, tau: f64) -> bool {
    gap > tau
}

/// Bonferroni-adjusted acceptance level `1 - (1 - beta) / s`.
pub fn bonferroni_level(beta: Level, comparisons: usize) -> Result<Level> {
    if comparisons == 0 {
        return Err(parameter("Bonferroni correction needs at least one comparison"));
    }
    Level::new(1.0 - (1.0 - beta.get()) / comparisons as f64)
}

/// How bootstrap thresholds control errors across the comparisons of one candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorControl {
    /// One level `beta` per comparison.
    #[default]
    Pcer,
    /// Bonferroni split across the `s` comparisons of each candidate; quantiles
    /// are re-read from the cached gap samples.
    Fwer,
}

/// User-supplied deterministic threshold `i -> tau(i)`.
#[derive(Clone)]
pub struct ThresholdFn(pub Arc<dyn Fn(usize) -> f64 + Send + Sync>);

impl ThresholdFn {
    pub fn new(f: impl Fn(usize) -> f64 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }
}

impl fmt::Debug for ThresholdFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ThresholdFn(..)")
    }
}

/// Source of the thresholds `tau(t, i)`.
#[derive(Debug, Clone)]
pub enum ThresholdPolicy {
    Bootstrap { config: BootstrapConfig, control: ErrorControl },
    Saws(SawsConfig),
    Fixed(f64),
    Custom(ThresholdFn),
}

impl ThresholdPolicy {
    pub fn bootstrap(config: BootstrapConfig) -> Self {
        Self::Bootstrap { config, control: ErrorControl::Pcer }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Self::Bootstrap { config, .. } => config.validate(),
            Self::Saws(cfg) => cfg.validate(),
            Self::Fixed(c) if !(*c >= 0.0) => Err(parameter(format!("fixed threshold {c} must be >= 0"))),
            _ => Ok(()),
        }
    }
}

/// One pairwise comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairRecord {
    pub reference: usize,
    pub candidate: usize,
    pub gap: f64,
    pub tau: f64,
    pub reject: bool,
}

/// Full record of one selection step.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionTrace {
    /// Forecast origin; the history is `x_1, ..., x_{t-1}`.
    pub t: u64,
    pub candidates: Vec<usize>,
    /// Fitted parameter per candidate, aligned with `candidates`.
    pub fits: Vec<ParamVector>,
    /// `T_k == 0` per candidate.
    pub admissible: Vec<bool>,
    pub pairs: Vec<PairRecord>,
    pub selected: usize,
    pub theta: ParamVector,
}

impl SelectionTrace {
    /// Checks the bookkeeping invariants of the trace.
    pub fn is_consistent(&self) -> bool {
        let pairs_ok = self
            .pairs
            .iter()
            .all(|p| p.gap >= 0.0 && p.reject == pairwise_test(p.gap, p.tau) && p.reference < p.candidate);
        let adm_ok = self.candidates.iter().zip(&self.admissible).all(|(&k, &adm)| {
            adm == !self.pairs.iter().any(|p| p.candidate == k && p.reject)
        });
        let rederived = self
            .candidates
            .iter()
            .zip(&self.admissible)
            .filter(|(_, &a)| a)
            .map(|(&k, _)| k)
            .max();
        pairs_ok && adm_ok && rederived == Some(self.selected)
    }

    /// Threshold used for reference window `i` (first pair with that reference).
    pub fn threshold_for(&self, i: usize) -> Option<f64> {
        self.pairs.iter().find(|p| p.reference == i).map(|p| p.tau)
    }
}

enum ReferenceThreshold {
    Single(f64),
    Sample(GapSample),
}

fn window_of(history: &[f64], k: usize) -> &[f64] {
    &history[history.len() - k..]
}

/// Runs the selection for origin `t = history.len() + 1`.
pub fn select_window(
    history: &[f64],
    target: &ForecastTarget,
    policy: &ThresholdPolicy,
    grid: &CandidateGridConfig,
    prev_k: Option<usize>,
) -> Result<SelectionTrace> {
    policy.validate()?;
    let candidates = candidate_windows(history.len(), prev_k, grid)?;
    let t = history.len() as u64 + 1;
    if history.iter().any(|x| !x.is_finite()) {
        return Err(crate::error::domain("history contains non-finite values"));
    }

    let summaries: Vec<WindowSummary> = candidates
        .par_iter()
        .map(|&k| WindowSummary::from_finite(window_of(history, k).to_vec()))
        .collect();
    let fits: Vec<FitResult> = summaries.iter().map(|s| s.fit(target)).collect();

    // every candidate except the largest serves as a reference window
    let n_ref = candidates.len() - 1;
    let thresholds: Vec<ReferenceThreshold> = (0..n_ref)
        .into_par_iter()
        .map(|idx| {
            let i = candidates[idx];
            Ok(match policy {
                ThresholdPolicy::Bootstrap { config, control } => {
                    let sample = bootstrap_gaps(&summaries[idx], window_of(history, i), target, config, t)?;
                    match control {
                        ErrorControl::Pcer => ReferenceThreshold::Single(sample.quantile(config.beta)),
                        ErrorControl::Fwer => ReferenceThreshold::Sample(sample),
                    }
                }
                ThresholdPolicy::Saws(cfg) => ReferenceThreshold::Single(saws_threshold(i, cfg)),
                ThresholdPolicy::Fixed(c) => ReferenceThreshold::Single(*c),
                ThresholdPolicy::Custom(f) => ReferenceThreshold::Single((f.0)(i)),
            })
        })
        .collect::<Result<_>>()?;

    let mut pairs = Vec::with_capacity(candidates.len() * n_ref / 2);
    let mut admissible = vec![true; candidates.len()];
    for (kidx, &k) in candidates.iter().enumerate() {
        let level = match policy {
            ThresholdPolicy::Bootstrap { config, control: ErrorControl::Fwer } if kidx > 0 => {
                Some(bonferroni_level(config.beta, kidx)?)
            }
            _ => None,
        };
        for (iidx, &i) in candidates[..kidx].iter().enumerate() {
            let raw = summaries[iidx].objective(target, &fits[kidx].theta) - fits[iidx].achieved_score;
            let gap = raw.max(0.0);
            let tau = match &thresholds[iidx] {
                ReferenceThreshold::Single(tau) => *tau,
                ReferenceThreshold::Sample(s) => s.quantile(level.expect("fwer level")),
            };
            let reject = pairwise_test(gap, tau);
            if reject {
                admissible[kidx] = false;
            }
            pairs.push(PairRecord { reference: i, candidate: k, gap, tau, reject });
        }
    }

    let best = admissible
        .iter()
        .rposition(|&a| a)
        .expect("smallest candidate is always admissible");
    Ok(SelectionTrace {
        t,
        theta: fits[best].theta,
        selected: candidates[best],
        fits: fits.iter().map(|f| f.theta).collect(),
        admissible,
        pairs,
        candidates,
    })
}

/// Inputs of the two-block Gaussian rejection probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoBlockGaussian {
    /// Mean of the older block `X_{t-k}, ..., X_{t-k0-1}`.
    pub mu_old: f64,
    /// Mean of the recent block `X_{t-k0}, ..., X_{t-1}`.
    pub mu_recent: f64,
    pub var_old: f64,
    pub var_recent: f64,
    /// Candidate window.
    pub k: usize,
    /// Reference window (the post-break segment).
    pub k0: usize,
}

impl TwoBlockGaussian {
    fn validate(&self) -> Result<()> {
        if !(self.k > self.k0 && self.k0 >= 1) {
            return Err(parameter("need k > k0 >= 1"));
        }
        if !(self.var_old > 0.0 && self.var_recent > 0.0) {
            return Err(parameter("block variances must be positive"));
        }
        Ok(())
    }

    /// Mean and variance of `mean_k - mean_k0`.
    pub fn difference_moments(&self) -> (f64, f64) {
        let (k, k0) = (self.k as f64, self.k0 as f64);
        let w = (k - k0) / k;
        let m = w * (self.mu_old - self.mu_recent);
        let v = w * w * (self.var_old / (k - k0) + self.var_recent / k0);
        (m, v)
    }
}

/// `P((mean_k - mean_k0)^2 > tau)` in the two-block Gaussian model:
/// `1 - Phi((sqrt(tau) - m) / sqrt(v)) + Phi((-sqrt(tau) - m) / sqrt(v))`.
pub fn rejection_probability_gaussian(model: &TwoBlockGaussian, tau: f64) -> Result<f64> {
    model.validate()?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(parameter(format!("threshold {tau} must be positive")));
    }
    let (m, v) = model.difference_moments();
    let (r, s) = (tau.sqrt(), v.sqrt());
    Ok(norm_cdf(-(r - m) / s) + norm_cdf((-r - m) / s))
}

/// Monte Carlo frequency of `(mean_k - mean_k0)^2 > tau` from simulated raw
/// observations of the two-block model.
pub fn rejection_frequency_monte_carlo(
    model: &TwoBlockGaussian,
    tau: f64,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    model.validate()?;
    if trials == 0 {
        return Err(parameter("need at least one trial"));
    }
    let (sd_old, sd_recent) = (model.var_old.sqrt(), model.var_recent.sqrt());
    let n_old = model.k - model.k0;
    let hits: usize = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut r = rng::stream(seed, &[trial as u64]);
            let mut old = 0.0;
            for _ in 0..n_old {
                old += model.mu_old + sd_old * r.sample::<f64, _>(StandardNormal);
            }
            let mut recent = 0.0;
            for _ in 0..model.k0 {
                recent += model.mu_recent + sd_recent * r.sample::<f64, _>(StandardNormal);
            }
            let mean_k = (old + recent) / model.k as f64;
            let mean_k0 = recent / model.k0 as f64;
            usize::from((mean_k - mean_k0).powi(2) > tau)
        })
        .sum();
    Ok(hits as f64 / trials as f64)
}
