use rayon::prelude::*;

use crate::error::{parameter, Result};
use crate::metrics::{standard_metrics, ExperimentTensor, MetricsReport};
use crate::rng::derive_seed;
use crate::scenarios::{LossDistribution, Scenario, ScenarioPath};
use crate::scoring::{ForecastTarget, ParamVector};

use super::{run_backtest, BacktestConfig, LossSeries, Method};

/// A replicated simulation study.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    /// Path length `T`; forecasts run from `base.t0` to `T`.
    pub length: usize,
    pub replications: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    /// Shared settings; `method` and the bootstrap seed are overridden.
    pub base: BacktestConfig,
}

impl ExperimentSpec {
    pub fn new(scenario: Scenario, target: ForecastTarget, methods: Vec<Method>, replications: usize, seed: u64) -> Self {
        Self {
            scenario,
            length: 2000,
            replications,
            seed,
            methods,
            base: BacktestConfig::new(Method::Baws, target),
        }
    }

    /// Seed of the simulated path of replication `l`.
    pub fn path_seed(&self, l: usize) -> u64 {
        derive_seed(self.seed, &[l as u64, 0])
    }

    /// Seed of the bootstrap streams of replication `l`.
    pub fn bootstrap_seed(&self, l: usize) -> u64 {
        derive_seed(self.seed, &[l as u64, 1])
    }
}

fn truth_at(path: &ScenarioPath, target: &ForecastTarget, t: usize) -> ParamVector {
    match target {
        ForecastTarget::Mean => ParamVector::Scalar(path.true_mean[t - 1]),
        ForecastTarget::Var { alpha } => ParamVector::Scalar(path.distribution_at(t).quantile(alpha.get())),
        ForecastTarget::VarEs { alpha } => {
            let d = path.distribution_at(t);
            ParamVector::Pair(d.quantile(alpha.get()), d.expected_shortfall(alpha.get()))
        }
    }
}

type ReplicationOutput = (ScenarioPath, Vec<(Vec<ParamVector>, Vec<f64>, Vec<usize>)>);

/// Simulates `n` paths, runs every method on each and aggregates the metrics.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<MetricsReport> {
    if spec.replications == 0 {
        return Err(parameter("experiment needs at least one replication"));
    }
    if spec.methods.is_empty() {
        return Err(parameter("experiment needs at least one method"));
    }
    let target = spec.base.target;
    let t0 = spec.base.t0;
    let reps: Vec<ReplicationOutput> = (0..spec.replications)
        .into_par_iter()
        .map(|l| {
            let path = spec.scenario.generate(spec.length, spec.path_seed(l), target.alpha())?;
            let series = LossSeries::new(path.losses.clone());
            let per_method = spec
                .methods
                .iter()
                .map(|&method| {
                    let mut cfg = spec.base.clone().with_seed(spec.bootstrap_seed(l));
                    cfg.method = method;
                    cfg.keep_traces = false;
                    let recs = run_backtest(&series, &cfg)?;
                    Ok((
                        recs.iter().map(|r| r.theta).collect(),
                        recs.iter().map(|r| r.realized_loss).collect(),
                        recs.iter().map(|r| r.k_hat).collect(),
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((path, per_method))
        })
        .collect::<Result<_>>()?;

    let truths: Vec<Vec<ParamVector>> = reps
        .iter()
        .map(|(path, _)| (t0..=spec.length).map(|t| truth_at(path, &target, t)).collect())
        .collect();
    let dists: Vec<Vec<LossDistribution<'_>>> = reps
        .iter()
        .map(|(path, _)| (t0..=spec.length).map(|t| path.distribution_at(t)).collect())
        .collect();

    let scenario = spec.scenario.to_string();
    let mut report = MetricsReport::default();
    for (m, method) in spec.methods.iter().enumerate() {
        let estimates = reps.iter().map(|(_, pm)| pm[m].0.clone()).collect();
        let realized = reps.iter().map(|(_, pm)| pm[m].1.clone()).collect();
        let windows = reps.iter().map(|(_, pm)| pm[m].2.clone()).collect();
        let tensor =
            ExperimentTensor::with_replication_truths(estimates, truths.clone(), realized)?.with_windows(windows)?;
        let name = method.to_string();
        for (metric, value) in standard_metrics(&tensor, &target, Some(&dists))? {
            report.push(&name, &scenario, &metric, value);
        }
    }
    Ok(report)
}
