//! Monte Carlo ensembles over realizations and their per-experiment summary.

use std::path::Path;

use rayon::prelude::*;

use crate::benchmarks::Benchmark;
use crate::error::Result;

use super::campaign::{run_campaign, CampaignTrace};
use super::config::{Method, RunConfig};
use super::output;

pub const AGGREGATE_HEADER: [&str; 11] = [
    "experiment_index",
    "n_ok",
    "mean_true_cost",
    "se_true_cost",
    "mean_posterior_variance",
    "se_posterior_variance",
    "map_hit_rate",
    "se_map_hit_rate",
    "mean_posterior_mean",
    "mean_map_theta",
    "mean_training_set_size",
];

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub experiment_index: usize,
    pub n_ok: usize,
    pub mean_true_cost: f64,
    pub se_true_cost: f64,
    pub mean_posterior_variance: f64,
    pub se_posterior_variance: f64,
    pub map_hit_rate: f64,
    pub se_map_hit_rate: f64,
    pub mean_posterior_mean: f64,
    pub mean_map_theta: f64,
    pub mean_training_set_size: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleCounts {
    pub realization_id: u64,
    pub coarse: usize,
    pub fine: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodEnsemble {
    pub method: Method,
    /// In realization order.
    pub traces: Vec<CampaignTrace>,
    pub aggregate: Vec<AggregateRow>,
}

impl MethodEnsemble {
    pub fn failures(&self) -> Vec<(u64, String)> {
        self.traces
            .iter()
            .filter_map(|t| t.failure.clone().map(|f| (t.realization_id, f)))
            .collect()
    }

    pub fn oracle_counts(&self) -> Vec<OracleCounts> {
        self.traces
            .iter()
            .map(|t| OracleCounts {
                realization_id: t.realization_id,
                coarse: t.coarse_calls,
                fine: t.fine_calls,
            })
            .collect()
    }
}

/// Mean and standard error (sample standard deviation over √n; 0 for n < 2).
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1) as f64 / n as f64).sqrt())
}

/// Per-experiment summary over the realizations that completed.
pub fn aggregate(traces: &[CampaignTrace], n_experiments: usize, theta_true: usize) -> Vec<AggregateRow> {
    let ok: Vec<&CampaignTrace> = traces
        .iter()
        .filter(|t| t.failure.is_none() && t.rows.len() == n_experiments)
        .collect();
    (0..n_experiments)
        .map(|k| {
            let col = |g: &dyn Fn(&super::campaign::TraceRow) -> f64| -> Vec<f64> {
                ok.iter().map(|t| g(&t.rows[k])).collect()
            };
            let (mean_true_cost, se_true_cost) = mean_se(&col(&|r| r.true_cost));
            let (mean_posterior_variance, se_posterior_variance) =
                mean_se(&col(&|r| r.posterior_variance));
            let (map_hit_rate, se_map_hit_rate) =
                mean_se(&col(&|r| f64::from(u8::from(r.map_theta == theta_true))));
            AggregateRow {
                experiment_index: k + 1,
                n_ok: ok.len(),
                mean_true_cost,
                se_true_cost,
                mean_posterior_variance,
                se_posterior_variance,
                map_hit_rate,
                se_map_hit_rate,
                mean_posterior_mean: mean_se(&col(&|r| r.posterior_mean)).0,
                mean_map_theta: mean_se(&col(&|r| r.map_theta as f64)).0,
                mean_training_set_size: mean_se(&col(&|r| r.training_set_size as f64)).0,
            }
        })
        .collect()
}

/// Runs every realization of one method; order of the result does not
/// depend on scheduling.
pub fn run_method(cfg: &RunConfig, bench: &Benchmark, method: Method) -> MethodEnsemble {
    let traces: Vec<CampaignTrace> = (0..cfg.n_realizations as u64)
        .into_par_iter()
        .map(|r| run_campaign(cfg, bench, method, r))
        .collect();
    let aggregate = aggregate(&traces, cfg.n_experiments, bench.theta_true());
    MethodEnsemble {
        method,
        traces,
        aggregate,
    }
}

pub fn run_ensemble(cfg: &RunConfig) -> Result<Vec<MethodEnsemble>> {
    cfg.validate()?;
    let bench = cfg.build_benchmark()?;
    Ok(cfg
        .methods
        .iter()
        .map(|&m| run_method(cfg, &bench, m))
        .collect())
}

/// Writes traces, aggregates, oracle counts and the resolved config.
pub fn write_ensemble(dir: &Path, cfg: &RunConfig, results: &[MethodEnsemble]) -> Result<()> {
    output::ensure_dir(dir)?;
    std::fs::write(dir.join("resolved-config.txt"), cfg.resolved_text())?;
    for e in results {
        for t in &e.traces {
            output::write_trace(&dir.join(format!("trace_{}_{}.csv", e.method, t.realization_id)), t)?;
        }
        output::write_aggregate(
            &dir.join(format!("aggregate_{}.csv", e.method)),
            &e.aggregate,
            &e.failures(),
        )?;
        output::write_oracle_counts(
            &dir.join(format!("oracle_calls_{}.csv", e.method)),
            &e.oracle_counts(),
        )?;
    }
    Ok(())
}
