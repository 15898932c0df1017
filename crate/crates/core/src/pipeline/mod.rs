//! Online forecasting loop, data ingestion, experiment replication and
//! result emission.
//!
//! A backtest walks forecast origins `t = t0, ..., n` over a loss series
//! `x_1, ..., x_n`. At each origin the forecast is computed from
//! `x_1, ..., x_{t-1}` only and then scored against `x_t`.

mod experiment;
mod io;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{rolling_forecast, SawsConfig};
use crate::bootstrap::{BootstrapConfig, ResampleMode, DEFAULT_REPLICATIONS};
use crate::error::{parameter, BawsError, Result};
use crate::scoring::{ForecastTarget, ParamVector};
use crate::selection::{select_window, CandidateGridConfig, ErrorControl, SelectionTrace, ThresholdPolicy};

pub use experiment::{run_experiment, ExperimentSpec};
pub use io::{load_loss_series, load_price_csv, read_records, write_plot_csv, write_records, ColumnSpec};

/// Window-selection method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Bootstrap thresholds.
    Baws,
    /// Deterministic thresholds.
    Saws,
    /// Fixed rolling window of the given length.
    Fixed(usize),
    /// All available history.
    Full,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Baws => write!(f, "BAWS"),
            Self::Saws => write!(f, "SAWS"),
            Self::Fixed(k) => write!(f, "Fixed({k})"),
            Self::Full => write!(f, "Full"),
        }
    }
}

impl FromStr for Method {
    type Err = BawsError;

    /// Accepts `baws`, `saws`, `full`, `fixed(250)` and `fixed:250`, in any case.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "baws" => return Ok(Self::Baws),
            "saws" => return Ok(Self::Saws),
            "full" => return Ok(Self::Full),
            _ => {}
        }
        let arg = lower
            .strip_prefix("fixed(")
            .and_then(|r| r.strip_suffix(')'))
            .or_else(|| lower.strip_prefix("fixed:"));
        match arg.map(|a| a.trim().parse::<usize>()) {
            Some(Ok(k)) if k > 0 => Ok(Self::Fixed(k)),
            _ => Err(parameter(format!("unknown method '{s}'"))),
        }
    }
}

/// Everything a backtest needs besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestConfig {
    pub method: Method,
    pub target: ForecastTarget,
    /// First forecast origin (1-based); the first forecast uses `t0 - 1` observations.
    pub t0: usize,
    /// Bootstrap settings; its seed drives all randomness of the backtest.
    pub bootstrap: BootstrapConfig,
    pub control: ErrorControl,
    pub saws: SawsConfig,
    /// Candidate grid. `max_window` caps every method, not only the selectors.
    pub grid: CandidateGridConfig,
    /// Keep the per-origin selection traces.
    pub keep_traces: bool,
}

impl BacktestConfig {
    /// Defaults: `t0 = 501`, `beta = 0.9`, `B = 500`, i.i.d. resampling,
    /// `k0 = 20`, SAWS constants matched to the target.
    pub fn new(method: Method, target: ForecastTarget) -> Self {
        let saws = match target {
            ForecastTarget::Mean => SawsConfig::mean_default(),
            _ => SawsConfig::var_default(),
        };
        Self {
            method,
            target,
            t0: 501,
            bootstrap: BootstrapConfig::new(0.9, DEFAULT_REPLICATIONS, ResampleMode::Iid, 0).expect("valid defaults"),
            control: ErrorControl::Pcer,
            saws,
            grid: CandidateGridConfig::default(),
            keep_traces: false,
        }
    }

    pub fn seed(&self) -> u64 {
        self.bootstrap.seed
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.bootstrap.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.bootstrap.validate()?;
        self.saws.validate()?;
        if self.t0 <= self.grid.min_window {
            return Err(parameter(format!(
                "first forecast origin t0 = {} must exceed the minimum window {}",
                self.t0, self.grid.min_window
            )));
        }
        if let Method::Fixed(0) = self.method {
            return Err(parameter("fixed window length must be positive"));
        }
        Ok(())
    }

    fn policy(&self) -> Option<ThresholdPolicy> {
        match self.method {
            Method::Baws => Some(ThresholdPolicy::Bootstrap { config: self.bootstrap, control: self.control }),
            Method::Saws => Some(ThresholdPolicy::Saws(self.saws)),
            Method::Fixed(_) | Method::Full => None,
        }
    }
}

/// Losses with optional date labels (carried through, never used).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossSeries {
    pub losses: Vec<f64>,
    pub dates: Option<Vec<String>>,
}

impl LossSeries {
    pub fn new(losses: Vec<f64>) -> Self {
        Self { losses, dates: None }
    }

    pub fn len(&self) -> usize {
        self.losses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.losses.is_empty()
    }

    fn date(&self, t: usize) -> Option<String> {
        self.dates.as_ref().map(|d| d[t - 1].clone())
    }
}

/// Output of one forecast origin.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRecord {
    pub t: usize,
    pub date: Option<String>,
    pub k_hat: usize,
    pub theta: ParamVector,
    pub realized_loss: f64,
    pub realized_score: f64,
}

/// State needed to resume a backtest at origin `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Checkpoint {
    pub t: usize,
    /// Window selected at `t - 1`, if any.
    pub prev_k: Option<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct BacktestOutput {
    pub records: Vec<ForecastRecord>,
    /// Selection traces (BAWS/SAWS with `keep_traces` only).
    pub traces: Vec<SelectionTrace>,
}

/// Runs the backtest from `cfg.t0` to the end of the series.
pub fn run_backtest(series: &LossSeries, cfg: &BacktestConfig) -> Result<Vec<ForecastRecord>> {
    Ok(run_backtest_detailed(series, cfg, None)?.records)
}

/// Runs the backtest, optionally resuming from a checkpoint, and returns the
/// selection traces when requested.
pub fn run_backtest_detailed(
    series: &LossSeries,
    cfg: &BacktestConfig,
    resume: Option<Checkpoint>,
) -> Result<BacktestOutput> {
    cfg.validate()?;
    let n = series.len();
    if n < cfg.t0 {
        return Err(BawsError::InsufficientHistory { needed: cfg.t0, available: n });
    }
    if let Some(d) = &series.dates {
        if d.len() != n {
            return Err(parameter("date labels do not match the number of losses"));
        }
    }
    if let Some((pos, _)) = series.losses.iter().enumerate().find(|(_, x)| !x.is_finite()) {
        return Err(BawsError::Parse { row: pos + 1, message: "non-finite loss".into() });
    }
    let (start, mut prev_k) = match resume {
        Some(cp) if cp.t < cfg.t0 => {
            return Err(parameter(format!("checkpoint {} precedes t0 = {}", cp.t, cfg.t0)));
        }
        Some(cp) => (cp.t, cp.prev_k),
        None => (cfg.t0, None),
    };

    let policy = cfg.policy();
    let mut out = BacktestOutput {
        records: Vec::with_capacity((n + 1).saturating_sub(start)),
        traces: Vec::new(),
    };
    for t in start..=n {
        let history = &series.losses[..t - 1];
        let (k_hat, theta) = match &policy {
            Some(policy) => {
                let trace = select_window(history, &cfg.target, policy, &cfg.grid, prev_k)?;
                let res = (trace.selected, trace.theta);
                if cfg.keep_traces {
                    out.traces.push(trace);
                }
                res
            }
            None => {
                let k = match cfg.method {
                    Method::Fixed(k) => k,
                    _ => usize::MAX,
                };
                let k = cfg.grid.limit(history.len()).min(k);
                let fit = rolling_forecast(history, k, &cfg.target)?;
                (fit.window_length, fit.theta)
            }
        };
        prev_k = Some(k_hat);
        let x = series.losses[t - 1];
        out.records.push(ForecastRecord {
            t,
            date: series.date(t),
            k_hat,
            theta,
            realized_loss: x,
            realized_score: cfg.target.score(x, &theta)?,
        });
    }
    Ok(out)
}
