//! Evaluation of replicated forecast experiments.
//!
//! All quantities are averages over the forecast horizon `t0..=T` and over
//! `n` replications. Sums run in a fixed order, so results are bit-identical
//! across runs.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{domain, parameter, Result};
use crate::scenarios::{format_sig, LossDistribution};
use crate::scoring::{ForecastTarget, Level, ParamVector};

/// Estimates, truths and realized losses of a replicated experiment.
///
/// `estimates[l][h]` is the forecast of replication `l` at horizon step `h`,
/// `truths[l][h]` the true parameter and `realized[l][h]` the loss it is
/// scored against. Truths may differ across replications (conditional
/// targets such as GARCH VaR, or random mean paths); the bias at each step is
/// then the replication average of `theta_hat - theta`, which is the usual
/// `|mean(theta_hat) - theta|` when the truth is shared.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentTensor {
    estimates: Vec<Vec<ParamVector>>,
    truths: Vec<Vec<ParamVector>>,
    realized: Vec<Vec<f64>>,
    windows: Option<Vec<Vec<usize>>>,
}

impl ExperimentTensor {
    /// Tensor whose truth path is shared by all replications.
    pub fn new(estimates: Vec<Vec<ParamVector>>, truths: Vec<ParamVector>, realized: Vec<Vec<f64>>) -> Result<Self> {
        let n = estimates.len();
        Self::with_replication_truths(estimates, vec![truths; n], realized)
    }

    pub fn with_replication_truths(
        estimates: Vec<Vec<ParamVector>>,
        truths: Vec<Vec<ParamVector>>,
        realized: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if estimates.is_empty() {
            return Err(domain("experiment needs at least one replication"));
        }
        let h = truths[0].len();
        if h == 0 {
            return Err(domain("experiment horizon is empty"));
        }
        if realized.len() != estimates.len() || truths.len() != estimates.len() {
            return Err(domain(format!(
                "{} replications of estimates, {} of truths and {} of realized losses",
                estimates.len(),
                truths.len(),
                realized.len()
            )));
        }
        let dim = truths[0][0].dim();
        for (l, ((est, x), th)) in estimates.iter().zip(&realized).zip(&truths).enumerate() {
            if est.len() != h || x.len() != h || th.len() != h {
                return Err(domain(format!("replication {l} does not span the horizon of {h} steps")));
            }
            if est.iter().chain(th).any(|p| p.dim() != dim) {
                return Err(domain(format!("replication {l} mixes parameter dimensions")));
            }
        }
        Ok(Self { estimates, truths, realized, windows: None })
    }

    pub fn with_windows(mut self, windows: Vec<Vec<usize>>) -> Result<Self> {
        if windows.len() != self.replications() || windows.iter().any(|w| w.len() != self.horizon()) {
            return Err(domain("window sizes do not match the tensor shape"));
        }
        self.windows = Some(windows);
        Ok(self)
    }

    pub fn replications(&self) -> usize {
        self.estimates.len()
    }

    pub fn horizon(&self) -> usize {
        self.truths[0].len()
    }

    pub fn estimates(&self) -> &[Vec<ParamVector>] {
        &self.estimates
    }

    pub fn truths(&self) -> &[Vec<ParamVector>] {
        &self.truths
    }

    pub fn realized(&self) -> &[Vec<f64>] {
        &self.realized
    }

    pub fn windows(&self) -> Option<&[Vec<usize>]> {
        self.windows.as_deref()
    }

    fn dim(&self) -> usize {
        self.truths[0][0].dim()
    }

    fn component(&self, p: &ParamVector, c: usize) -> Result<f64> {
        match (c, p) {
            (0, _) => Ok(p.first()),
            (1, ParamVector::Pair(_, e)) => Ok(*e),
            _ => Err(parameter(format!("component {c} out of range for dimension {}", self.dim()))),
        }
    }

    /// Cross-replication mean of component `c` at each step.
    fn replication_means(&self, c: usize) -> Result<Vec<f64>> {
        let n = self.replications() as f64;
        (0..self.horizon())
            .map(|h| {
                let mut s = 0.0;
                for est in &self.estimates {
                    s += self.component(&est[h], c)?;
                }
                Ok(s / n)
            })
            .collect()
    }
}

/// Mean absolute bias of component `c`: average over `t` of
/// `|mean_l(theta_hat) - theta|`.
pub fn mab_component(tensor: &ExperimentTensor, c: usize) -> Result<f64> {
    let n = tensor.replications() as f64;
    let mut s = 0.0;
    for h in 0..tensor.horizon() {
        let mut bias = 0.0;
        for (est, truth) in tensor.estimates.iter().zip(&tensor.truths) {
            bias += tensor.component(&est[h], c)? - tensor.component(&truth[h], c)?;
        }
        s += (bias / n).abs();
    }
    Ok(s / tensor.horizon() as f64)
}

/// Average cross-replication variance (divisor `n - 1`) of component `c`.
pub fn mean_variance_component(tensor: &ExperimentTensor, c: usize) -> Result<f64> {
    let n = tensor.replications();
    if n < 2 {
        return Err(domain(format!("variance needs at least two replications, got {n}")));
    }
    let means = tensor.replication_means(c)?;
    let mut total = 0.0;
    for (h, m) in means.iter().enumerate() {
        let mut s = 0.0;
        for est in &tensor.estimates {
            let d = tensor.component(&est[h], c)? - m;
            s += d * d;
        }
        total += s / (n - 1) as f64;
    }
    Ok(total / tensor.horizon() as f64)
}

fn squared_error_sum(tensor: &ExperimentTensor, c: usize) -> Result<f64> {
    let mut total = 0.0;
    for (est, truths) in tensor.estimates.iter().zip(&tensor.truths) {
        for (p, truth) in est.iter().zip(truths) {
            let d = tensor.component(p, c)? - tensor.component(truth, c)?;
            total += d * d;
        }
    }
    Ok(total)
}

/// Mean squared error of component `c`.
pub fn mse_component(tensor: &ExperimentTensor, c: usize) -> Result<f64> {
    Ok(squared_error_sum(tensor, c)? / (tensor.replications() * tensor.horizon()) as f64)
}

/// [`mab_component`] of the first component (mean or VaR).
pub fn mab(tensor: &ExperimentTensor) -> Result<f64> {
    mab_component(tensor, 0)
}

/// [`mean_variance_component`] of the first component.
pub fn mean_variance(tensor: &ExperimentTensor) -> Result<f64> {
    mean_variance_component(tensor, 0)
}

/// [`mse_component`] of the first component.
pub fn mse(tensor: &ExperimentTensor) -> Result<f64> {
    mse_component(tensor, 0)
}

/// Cumulative excess risk of mean forecasts: `(1/n) sum_l sum_t (mu_hat - mu_t)^2`.
pub fn cumulative_risk_mean(tensor: &ExperimentTensor) -> Result<f64> {
    Ok(squared_error_sum(tensor, 0)? / tensor.replications() as f64)
}

/// `-alpha v - E[X 1{X < v}] + v P(X < v)`, the expected pinball score up to
/// a term that does not depend on `v`.
fn pinball_risk(dist: &LossDistribution<'_>, v: f64, alpha: f64) -> f64 {
    -alpha * v - dist.partial_mean_below(v) + v * dist.prob_below(v)
}

/// Excess expected pinball score of `v` over the true VaR at one time point.
pub fn var_excess_risk(dist: &LossDistribution<'_>, v: f64, alpha: Level) -> f64 {
    let a = alpha.get();
    pinball_risk(dist, v, a) - pinball_risk(dist, dist.quantile(a), a)
}

/// Cumulative excess risk of VaR forecasts; `dists[l][h]` is the true loss
/// law of replication `l` at horizon step `h`.
pub fn cumulative_risk_var(
    tensor: &ExperimentTensor,
    dists: &[Vec<LossDistribution<'_>>],
    alpha: Level,
) -> Result<f64> {
    if dists.len() != tensor.replications() || dists.iter().any(|d| d.len() != tensor.horizon()) {
        return Err(domain("truth distributions do not match the tensor shape"));
    }
    let a = alpha.get();
    let mut total = 0.0;
    for (est, ds) in tensor.estimates.iter().zip(dists) {
        for (p, d) in est.iter().zip(ds) {
            total += pinball_risk(d, p.first(), a) - pinball_risk(d, d.quantile(a), a);
        }
    }
    Ok(total / tensor.replications() as f64)
}

/// Average cumulative realized score `(1/n) sum_l sum_t l(x_t, theta_hat_t)`.
pub fn cumulative_loss(tensor: &ExperimentTensor, target: &ForecastTarget) -> Result<f64> {
    let mut total = 0.0;
    for (est, xs) in tensor.estimates.iter().zip(&tensor.realized) {
        for (p, x) in est.iter().zip(xs) {
            total += target.score(*x, p)?;
        }
    }
    Ok(total / tensor.replications() as f64)
}

/// Standard metric set for one method: bias, variance and MSE per parameter
/// component, cumulative risk where defined, and cumulative loss.
pub fn standard_metrics(
    tensor: &ExperimentTensor,
    target: &ForecastTarget,
    dists: Option<&[Vec<LossDistribution<'_>>]>,
) -> Result<Vec<(String, f64)>> {
    let mut out = Vec::new();
    let suffixes: &[&str] = match target {
        ForecastTarget::VarEs { .. } => &["_var", "_es"],
        _ => &[""],
    };
    for (c, suffix) in suffixes.iter().enumerate() {
        out.push((format!("MAB{suffix}"), mab_component(tensor, c)?));
        if tensor.replications() >= 2 {
            out.push((format!("Var{suffix}"), mean_variance_component(tensor, c)?));
        }
        out.push((format!("MSE{suffix}"), mse_component(tensor, c)?));
    }
    match target {
        ForecastTarget::Mean => out.push(("CR".into(), cumulative_risk_mean(tensor)?)),
        ForecastTarget::Var { alpha } => {
            let dists = dists.ok_or_else(|| domain("VaR cumulative risk needs the true loss distributions"))?;
            out.push(("CR".into(), cumulative_risk_var(tensor, dists, *alpha)?));
        }
        ForecastTarget::VarEs { .. } => {}
    }
    out.push(("CL".into(), cumulative_loss(tensor, target)?));
    if let Some(w) = tensor.windows() {
        let total: usize = w.iter().flatten().sum();
        out.push(("mean_window".into(), total as f64 / (tensor.replications() * tensor.horizon()) as f64));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub method: String,
    pub scenario: String,
    pub metric: String,
    pub value: f64,
}

/// Long-format table of metric values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsReport {
    pub rows: Vec<MetricRow>,
}

impl MetricsReport {
    pub fn push(&mut self, method: &str, scenario: &str, metric: &str, value: f64) {
        self.rows.push(MetricRow {
            method: method.into(),
            scenario: scenario.into(),
            metric: metric.into(),
            value,
        });
    }

    pub fn get(&self, method: &str, metric: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.method == method && r.metric == metric).map(|r| r.value)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["method", "scenario", "metric", "value"])?;
        for r in &self.rows {
            w.write_record([r.method.as_str(), &r.scenario, &r.metric, &format_sig(r.value)])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(input);
        let rows = rd.deserialize().collect::<std::result::Result<Vec<MetricRow>, _>>()?;
        Ok(Self { rows })
    }
}
