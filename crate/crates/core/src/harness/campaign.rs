//! One realization of a sequential design campaign for one method.

use std::sync::atomic::{AtomicUsize, Ordering};

use rand::Rng;
use rayon::prelude::*;

use crate::benchmarks::{Benchmark, BenchmarkKind};
use crate::error::{MocuError, Result};
use crate::gp::{self, GpModel};
use crate::mocu::{run_mocu_step, CampaignState, PolicyTable};
use crate::problem::{
    make_uniform_prior, percentile_interval, CostMatrix, CostOracle, DiscreteDistribution,
    ExperimentModel, Fidelity, IndexGrid, Provenance, TrainingPoint, TrainingSet,
};
use crate::refine::{maybe_refine, RefinementState};

use super::config::{Method, RunConfig};
use super::seed::{child_seed, stream_rng, Stream};

pub const TRACE_HEADER: [&str; 16] = [
    "realization_id",
    "experiment_index",
    "x_selected",
    "y_outcome",
    "psi_selected",
    "true_cost",
    "posterior_variance",
    "posterior_mean",
    "map_theta",
    "p68_lo",
    "p68_hi",
    "p95_lo",
    "p95_hi",
    "training_set_size",
    "refined_this_step",
    "status",
];

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub realization_id: u64,
    /// 1-based.
    pub experiment_index: usize,
    /// Experiment location (grid index of the probe).
    pub x_selected: usize,
    /// Outcome label.
    pub y_outcome: i64,
    pub psi_selected: usize,
    pub true_cost: f64,
    pub posterior_variance: f64,
    pub posterior_mean: f64,
    pub map_theta: usize,
    pub p68: (usize, usize),
    pub p95: (usize, usize),
    /// 0 for full MOCU, which uses no surrogate.
    pub training_set_size: usize,
    pub refined_this_step: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignTrace {
    pub method: Method,
    pub realization_id: u64,
    pub rows: Vec<TraceRow>,
    pub failure: Option<String>,
    pub coarse_calls: usize,
    pub fine_calls: usize,
}

/// Cost oracle that counts calls per fidelity.
pub struct CountingOracle<'a> {
    bench: &'a Benchmark,
    coarse: AtomicUsize,
    fine: AtomicUsize,
}

impl<'a> CountingOracle<'a> {
    pub fn new(bench: &'a Benchmark) -> Self {
        Self {
            bench,
            coarse: AtomicUsize::new(0),
            fine: AtomicUsize::new(0),
        }
    }

    pub fn coarse_calls(&self) -> usize {
        self.coarse.load(Ordering::Relaxed)
    }

    pub fn fine_calls(&self) -> usize {
        self.fine.load(Ordering::Relaxed)
    }
}

impl CostOracle for CountingOracle<'_> {
    fn cost(&self, theta: usize, psi: usize, fidelity: Fidelity) -> Result<f64> {
        match fidelity {
            Fidelity::Coarse => self.coarse.fetch_add(1, Ordering::Relaxed),
            Fidelity::Fine => self.fine.fetch_add(1, Ordering::Relaxed),
        };
        self.bench.cost(theta, psi, fidelity)
    }
}

fn sample_index<R: Rng + ?Sized>(d: &DiscreteDistribution, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    let mut last = 1;
    for (i, &m) in d.mass().iter().enumerate() {
        if m > 0.0 {
            last = i + 1;
        }
        cum += m;
        if u < cum {
            return i + 1;
        }
    }
    last
}

/// `n` distinct locations with θ drawn from `prior` and ψ uniform.
/// Stops early if 100·n draws do not yield enough distinct cells.
pub fn sample_initial_locations<R: Rng + ?Sized>(
    n: usize,
    prior: &DiscreteDistribution,
    grid: IndexGrid,
    rng: &mut R,
) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::with_capacity(n);
    for _ in 0..100 * n {
        if out.len() == n {
            break;
        }
        let t = sample_index(prior, rng);
        let p = rng.random_range(1..=grid.n_psi());
        if !out.contains(&(t, p)) {
            out.push((t, p));
        }
    }
    out
}

/// Runs the realization; errors are caught into `failure` with the rows
/// completed so far kept.
pub fn run_campaign(cfg: &RunConfig, bench: &Benchmark, method: Method, r: u64) -> CampaignTrace {
    let oracle = CountingOracle::new(bench);
    let mut rows = Vec::with_capacity(cfg.n_experiments);
    let failure = drive(cfg, bench, method, r, &oracle, &mut rows)
        .err()
        .map(|e| e.to_string());
    CampaignTrace {
        method,
        realization_id: r,
        rows,
        failure,
        coarse_calls: oracle.coarse_calls(),
        fine_calls: oracle.fine_calls(),
    }
}

fn exact_via_oracle(grid: IndexGrid, oracle: &CountingOracle<'_>) -> Result<CostMatrix> {
    let rows: Vec<Vec<f64>> = (1..=grid.n_theta())
        .into_par_iter()
        .map(|t| {
            (1..=grid.n_psi())
                .map(|p| oracle.cost(t, p, Fidelity::Fine))
                .collect()
        })
        .collect::<Result<_>>()?;
    CostMatrix::new(grid, rows.concat(), Provenance::Exact)
}

struct Surrogate {
    training: TrainingSet,
    model: GpModel,
}

fn drive(
    cfg: &RunConfig,
    bench: &Benchmark,
    method: Method,
    r: u64,
    oracle: &CountingOracle<'_>,
    rows: &mut Vec<TraceRow>,
) -> Result<()> {
    let grid = bench.grid();
    let seed = child_seed(cfg.master_seed, r);
    let em: ExperimentModel = bench.experiment_model()?;
    let theta_true = bench.theta_true();
    // scoring row; not an oracle call
    let truth: Vec<f64> = (1..=grid.n_psi())
        .map(|p| bench.fine_cost(theta_true, p))
        .collect::<Result<_>>()?;
    let prior = make_uniform_prior(grid);

    let mut gp_rng = stream_rng(seed, Stream::GpRestarts);
    let mut surrogate = None;
    let mut table = match method {
        Method::Full => PolicyTable::new(exact_via_oracle(grid, oracle)?),
        Method::StaticSurrogate | Method::AdaptiveSurrogate => {
            // only the adaptive method starts from the cheap model
            let fidelity = if bench.kind() == BenchmarkKind::Multifidelity
                && method == Method::AdaptiveSurrogate
            {
                Fidelity::Coarse
            } else {
                Fidelity::Fine
            };
            let mut init_rng = stream_rng(seed, Stream::InitialSampling);
            let n = cfg.initial_points_for(method);
            let mut ts = TrainingSet::new();
            for (theta, psi) in sample_initial_locations(n, &prior, grid, &mut init_rng) {
                let cost = oracle.cost(theta, psi, fidelity)?;
                ts.push(grid, TrainingPoint { theta, psi, cost, fidelity })?;
            }
            let model = gp::fit(&ts, grid, &cfg.gp, &mut gp_rng)?;
            let table = PolicyTable::new(model.predict_mean(grid)?);
            surrogate = Some(Surrogate { training: ts, model });
            table
        }
    };

    let mut outcome_rng = stream_rng(seed, Stream::Outcomes);
    let mut proposal_rng = stream_rng(seed, Stream::Proposals);
    let mut refine_state = RefinementState::new(prior.stats().variance);
    let mut state = CampaignState::new(prior);
    let score = |psi: usize| truth[psi - 1];

    for _ in 0..cfg.n_experiments {
        let (next, rec) = run_mocu_step(&state, &table, &em, theta_true, score, &mut outcome_rng)?;
        state = next;
        let mut psi = rec.psi_selected;
        let mut refined = false;
        if method == Method::AdaptiveSurrogate {
            let s = surrogate.as_mut().expect("surrogate methods carry a model");
            let (ts, event) = maybe_refine(
                &mut refine_state,
                &s.training,
                &state.posterior,
                &s.model,
                &cfg.refinement,
                grid,
                oracle,
                &mut proposal_rng,
            )?;
            if event.is_some() {
                let model = gp::fit(&ts, grid, &cfg.gp, &mut gp_rng)?;
                table = PolicyTable::new(model.predict_mean(grid)?);
                *s = Surrogate { training: ts, model };
                psi = table.robust_policy(&state.posterior)?.psi_index;
                refined = true;
            }
        }
        let true_cost = score(psi);
        if true_cost.is_nan() || true_cost < 0.0 {
            return Err(MocuError::DimensionMismatch(format!(
                "negative true cost {true_cost} at psi {psi}"
            )));
        }
        let stats = state.posterior.stats();
        rows.push(TraceRow {
            realization_id: r,
            experiment_index: rec.step,
            x_selected: em.experiments()[rec.x_index],
            y_outcome: em.outcomes()[rec.y_index],
            psi_selected: psi,
            true_cost,
            posterior_variance: stats.variance,
            posterior_mean: stats.mean,
            map_theta: stats.map_index,
            p68: percentile_interval(&state.posterior, 0.16, 0.84),
            p95: percentile_interval(&state.posterior, 0.025, 0.975),
            training_set_size: surrogate.as_ref().map_or(0, |s| s.training.len()),
            refined_this_step: refined,
        });
    }
    Ok(())
}
