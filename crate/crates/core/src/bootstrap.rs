//! Bootstrap calibration of the stability-test threshold `tau(t, i)`.
//!
//! For a reference window of length `i` the estimator is refitted on `B`
//! resamples of the window (i.i.d. or moving-block). Each refit is scored on
//! the *original* window and compared with the original fit; the threshold is
//! the empirical `beta`-quantile of these nonnegative score gaps.
//!
//! Replication `b` at origin `t` for window length `i` draws from its own
//! stream keyed by `(seed, t, i, b)`, so thresholds are reproducible and do
//! not depend on evaluation order.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{domain, parameter, Result};
use crate::estimators::{shifted_mean, var_order_index, WindowSummary};
use crate::rng;
use crate::scoring::{ForecastTarget, Level, ParamVector};

pub const DEFAULT_REPLICATIONS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResampleMode {
    Iid,
    /// Moving-block bootstrap with block length `round(c * ceil(i^(1/3)))`.
    Block { c: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub beta: Level,
    pub replications: usize,
    pub mode: ResampleMode,
    pub seed: u64,
}

impl BootstrapConfig {
    pub fn new(beta: f64, replications: usize, mode: ResampleMode, seed: u64) -> Result<Self> {
        let cfg = Self { beta: Level::new(beta)?, replications, mode, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(parameter("bootstrap needs at least one replication"));
        }
        if let ResampleMode::Block { c } = self.mode {
            if !(c.is_finite() && c > 0.0) {
                return Err(parameter(format!("block constant c = {c} must be positive")));
            }
        }
        Ok(())
    }
}

/// Calibrated threshold for one reference window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdValue {
    pub tau: f64,
    pub window_length: usize,
    pub replications: usize,
}

/// Sorted bootstrap gaps for one reference window; quantiles at any level can
/// be read off without resampling again.
#[derive(Debug, Clone, PartialEq)]
pub struct GapSample {
    sorted: Vec<f64>,
    window_length: usize,
}

impl GapSample {
    pub fn gaps(&self) -> &[f64] {
        &self.sorted
    }

    pub fn window_length(&self) -> usize {
        self.window_length
    }

    pub fn quantile(&self, beta: Level) -> f64 {
        self.sorted[var_order_index(self.sorted.len(), beta.get()) - 1]
    }

    pub fn threshold(&self, beta: Level) -> ThresholdValue {
        ThresholdValue {
            tau: self.quantile(beta),
            window_length: self.window_length,
            replications: self.sorted.len(),
        }
    }
}

/// Block length `l_i` and block count `m_i = floor(i / l_i)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockLayout {
    pub length: usize,
    pub count: usize,
}

/// Smallest integer `r` with `r^3 >= i`.
fn ceil_cbrt(i: usize) -> usize {
    let mut r = (i as f64).cbrt().round() as usize;
    while r.pow(3) < i {
        r += 1;
    }
    while r > 1 && (r - 1).pow(3) >= i {
        r -= 1;
    }
    r.max(1)
}

/// `l = max(1, round_half_up(c * ceil(i^(1/3))))`, `m = floor(i / l)`.
pub fn block_length(i: usize, c: f64) -> BlockLayout {
    let raw = c * ceil_cbrt(i.max(1)) as f64;
    let length = ((raw + 0.5).floor() as usize).max(1);
    BlockLayout { length, count: i / length }
}

/// Draws `window.len()` points uniformly with replacement.
pub fn iid_resample<R: Rng + ?Sized>(window: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    if window.is_empty() {
        return Err(domain("cannot resample an empty window"));
    }
    let n = window.len();
    Ok((0..n).map(|_| window[rng.random_range(0..n)]).collect())
}

/// Concatenates `floor(i / l)` blocks of length `l`, each drawn uniformly from
/// the `i - l + 1` contiguous blocks of the window.
pub fn block_resample<R: Rng + ?Sized>(window: &[f64], l: usize, rng: &mut R) -> Result<Vec<f64>> {
    let i = window.len();
    if l == 0 || l > i {
        return Err(domain(format!("block length {l} incompatible with window length {i}")));
    }
    let m = i / l;
    let starts = i - l + 1;
    let mut out = Vec::with_capacity(m * l);
    for _ in 0..m {
        let s = rng.random_range(0..starts);
        out.extend_from_slice(&window[s..s + l]);
    }
    Ok(out)
}

/// Type-1 empirical quantile: the `ceil(beta * B)`-th order statistic.
pub fn empirical_quantile(values: &[f64], beta: Level) -> Result<f64> {
    if values.is_empty() {
        return Err(domain("quantile of an empty sample"));
    }
    let mut v = values.to_vec();
    let j = var_order_index(v.len(), beta.get());
    let (_, q, _) = v.select_nth_unstable_by(j - 1, f64::total_cmp);
    Ok(*q)
}

/// Refit of `target` on an owned resample.
fn refit(mut sample: Vec<f64>, target: &ForecastTarget) -> ParamVector {
    match target {
        ForecastTarget::Mean => ParamVector::Scalar(shifted_mean(&sample)),
        ForecastTarget::Var { alpha } => {
            let j = var_order_index(sample.len(), alpha.get());
            let (_, v, _) = sample.select_nth_unstable_by(j - 1, f64::total_cmp);
            ParamVector::Scalar(*v)
        }
        ForecastTarget::VarEs { alpha } => WindowSummary::from_finite(sample).fit_var_es(*alpha).theta,
    }
}

/// Gap `f_i(theta_b) - f_i(theta_hat)`; rounding noise below zero is clamped.
#[inline]
fn gap(summary: &WindowSummary, target: &ForecastTarget, theta_b: &ParamVector, base: f64) -> f64 {
    let g = summary.objective(target, theta_b) - base;
    debug_assert!(g > -1e-9 * base.abs().max(1.0), "negative bootstrap gap {g}");
    g.max(0.0)
}

/// Upper tail of a window, indexed by position, for block-resampled VaR.
///
/// The VaR refit of a block resample is its `need`-th largest value. Only the
/// window's top `r` values (ranked by value, then position) can matter as long
/// as the drawn blocks contain at least `need` of them, so each replication
/// gathers those from the drawn blocks and selects among them. The random
/// draws are the same as in [`block_resample`], and the result is identical.
struct TailIndex {
    /// `offsets[p]`: number of tail positions before `p`.
    offsets: Vec<u32>,
    /// Tail values in position order.
    values: Vec<f64>,
    need: usize,
    starts: usize,
}

impl TailIndex {
    fn new(window: &[f64], alpha: Level, layout: BlockLayout) -> Option<Self> {
        let i = window.len();
        let n_out = layout.count * layout.length;
        if n_out == 0 {
            return None;
        }
        let need = n_out - var_order_index(n_out, alpha.get()) + 1;
        let r = 2 * need + 16;
        if 2 * r >= i {
            return None;
        }
        let mut order: Vec<usize> = (0..i).collect();
        order.select_nth_unstable_by(i - r, |&a, &b| window[a].total_cmp(&window[b]).then(a.cmp(&b)));
        let mut in_tail = vec![false; i];
        for &p in &order[i - r..] {
            in_tail[p] = true;
        }
        let mut offsets = Vec::with_capacity(i + 1);
        let mut values = Vec::with_capacity(r);
        offsets.push(0);
        for (p, &x) in window.iter().enumerate() {
            if in_tail[p] {
                values.push(x);
            }
            offsets.push(values.len() as u32);
        }
        Some(Self { offsets, values, need, starts: i - layout.length + 1 })
    }

    fn draw<R: Rng + ?Sized>(&self, layout: BlockLayout, rng: &mut R, scratch: &mut Vec<f64>) -> Option<f64> {
        scratch.clear();
        for _ in 0..layout.count {
            let s = rng.random_range(0..self.starts);
            let (a, b) = (self.offsets[s] as usize, self.offsets[s + layout.length] as usize);
            scratch.extend_from_slice(&self.values[a..b]);
        }
        if scratch.len() < self.need {
            return None;
        }
        let idx = scratch.len() - self.need;
        let (_, v, _) = scratch.select_nth_unstable_by(idx, f64::total_cmp);
        Some(*v)
    }
}

/// Bootstrap gap sample for the window ending just before origin `t`.
///
/// I.i.d. resampling of the VaR target uses the exact law of the refitted
/// order statistic: the `j`-th smallest of `i` uniform draws from the sorted
/// window is `sorted[ceil(i * U) - 1]` with `U ~ Beta(j, i - j + 1)`, so each
/// replication costs one Beta draw instead of `i` index draws.
pub fn bootstrap_gaps(
    summary: &WindowSummary,
    window: &[f64],
    target: &ForecastTarget,
    cfg: &BootstrapConfig,
    t: u64,
) -> Result<GapSample> {
    cfg.validate()?;
    let i = window.len();
    if i == 0 {
        return Err(domain("cannot bootstrap an empty window"));
    }
    if summary.len() != i {
        return Err(domain("summary does not describe the window"));
    }
    let base_fit = summary.fit(target);
    let base = base_fit.achieved_score;

    let layout = match cfg.mode {
        ResampleMode::Iid => None,
        ResampleMode::Block { c } => {
            let layout = block_length(i, c);
            if layout.length > i {
                return Err(domain(format!(
                    "block length {} exceeds window length {i}",
                    layout.length
                )));
            }
            Some(layout)
        }
    };

    let order_stat = match (cfg.mode, target) {
        (ResampleMode::Iid, ForecastTarget::Var { alpha }) if i > 1 => {
            let j = var_order_index(i, alpha.get());
            Some(Beta::new(j as f64, (i - j + 1) as f64).map_err(|e| domain(e.to_string()))?)
        }
        _ => None,
    };

    let tail = match (layout, target) {
        (Some(layout), ForecastTarget::Var { alpha }) => TailIndex::new(window, *alpha, layout),
        _ => None,
    };
    let mut scratch = Vec::new();

    let mut gaps = Vec::with_capacity(cfg.replications);
    for b in 0..cfg.replications {
        let key = [t, i as u64, b as u64];
        let mut rng = rng::stream(cfg.seed, &key);
        let theta_b = match (&order_stat, layout) {
            (Some(beta), _) => {
                let u: f64 = beta.sample(&mut rng);
                let rank = ((i as f64 * u).ceil() as usize).clamp(1, i);
                ParamVector::Scalar(summary.sorted()[rank - 1])
            }
            (None, None) => refit(iid_resample(window, &mut rng)?, target),
            (None, Some(layout)) => match tail.as_ref().and_then(|tl| tl.draw(layout, &mut rng, &mut scratch)) {
                Some(v) => ParamVector::Scalar(v),
                None => {
                    let mut rng = rng::stream(cfg.seed, &key);
                    refit(block_resample(window, layout.length, &mut rng)?, target)
                }
            },
        };
        gaps.push(gap(summary, target, &theta_b, base));
    }
    gaps.sort_unstable_by(f64::total_cmp);
    Ok(GapSample { sorted: gaps, window_length: i })
}

/// `tau(t, i)`: empirical `beta`-quantile of the bootstrap gaps.
pub fn bootstrap_threshold(
    window: &[f64],
    target: &ForecastTarget,
    cfg: &BootstrapConfig,
    t: u64,
) -> Result<ThresholdValue> {
    let summary = WindowSummary::new(window)?;
    Ok(bootstrap_gaps(&summary, window, target, cfg, t)?.threshold(cfg.beta))
}

#[cfg(test)]
pub(crate) fn explicit_iid_gaps(
    window: &[f64],
    target: &ForecastTarget,
    replications: usize,
    seed: u64,
) -> Vec<f64> {
    let summary = WindowSummary::new(window).unwrap();
    let base = summary.fit(target).achieved_score;
    let mut out: Vec<f64> = (0..replications)
        .map(|b| {
            let mut rng = rng::stream(seed, &[b as u64]);
            let theta = refit(iid_resample(window, &mut rng).unwrap(), target);
            gap(&summary, target, &theta, base)
        })
        .collect();
    out.sort_by(f64::total_cmp);
    out
}
