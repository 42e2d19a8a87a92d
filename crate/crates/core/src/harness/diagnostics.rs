//! Surface diagnostics: exact cost heatmap, Monte Carlo averaged surrogate
//! gradient magnitude and leave-one-out sensitivity maps, and the spring
//! Bode sweep.

use std::path::Path;

use crate::benchmarks::spring::{bode_sweep, state_space};
use crate::benchmarks::SpringSpec;
use crate::error::{MocuError, Result};
use crate::gp::{self, GpConfig, GpModel};
use crate::problem::{make_uniform_prior, CostMatrix, Fidelity, IndexGrid, Provenance, TrainingPoint, TrainingSet};
use crate::refine::loo_sensitivities;

use super::campaign::sample_initial_locations;
use super::config::RunConfig;
use super::output;
use super::seed::{child_seed, stream_rng, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticMaps {
    /// Mean over realizations of |∇ GP mean| by finite differences.
    pub gradient: CostMatrix,
    /// Per cell, mean LOO sensitivity over the realizations that sampled it;
    /// 0 where no realization placed a training point.
    pub sensitivity: CostMatrix,
    /// Realizations whose sample set included each cell.
    pub sample_counts: Vec<usize>,
}

/// Central differences of the GP mean at grid cells, one-sided on the edges.
pub fn gradient_magnitude(model: &GpModel, grid: IndexGrid) -> Result<CostMatrix> {
    let mean = model.predict_mean(grid)?;
    let diff = |lo: f64, hi: f64, steps: usize| if steps == 0 { 0.0 } else { (hi - lo) / steps as f64 };
    CostMatrix::from_fn(grid, Provenance::Surrogate, |t, p| {
        let (t0, t1) = (t.saturating_sub(1).max(1), (t + 1).min(grid.n_theta()));
        let (p0, p1) = (p.saturating_sub(1).max(1), (p + 1).min(grid.n_psi()));
        let gt = diff(mean.get(t0, p), mean.get(t1, p), t1 - t0);
        let gp = diff(mean.get(t, p0), mean.get(t, p1), p1 - p0);
        gt.hypot(gp)
    })
}

/// Averages gradient and sensitivity maps over `realizations` GP fits, each
/// on `n_points` fine samples of `cost` (θ and ψ uniform).
pub fn diagnostic_maps<F>(
    grid: IndexGrid,
    cost: F,
    n_points: usize,
    realizations: usize,
    gp_cfg: &GpConfig,
    master_seed: u64,
) -> Result<DiagnosticMaps>
where
    F: Fn(usize, usize) -> Result<f64>,
{
    if realizations == 0 {
        return Err(MocuError::Config("need at least one realization".into()));
    }
    let prior = make_uniform_prior(grid);
    let cells = grid.len();
    let mut grad_sum = vec![0.0; cells];
    let mut sens_sum = vec![0.0; cells];
    let mut counts = vec![0usize; cells];
    let at = |t: usize, p: usize| (t - 1) * grid.n_psi() + (p - 1);
    for r in 0..realizations as u64 {
        let seed = child_seed(master_seed, r);
        let mut init_rng = stream_rng(seed, Stream::InitialSampling);
        let mut gp_rng = stream_rng(seed, Stream::GpRestarts);
        let mut ts = TrainingSet::new();
        for (theta, psi) in sample_initial_locations(n_points, &prior, grid, &mut init_rng) {
            let c = cost(theta, psi)?;
            ts.push(grid, TrainingPoint { theta, psi, cost: c, fidelity: Fidelity::Fine })?;
        }
        let model = gp::fit(&ts, grid, gp_cfg, &mut gp_rng)?;
        for (s, g) in grad_sum.iter_mut().zip(gradient_magnitude(&model, grid)?.values()) {
            *s += g;
        }
        let all: Vec<usize> = (0..ts.len()).collect();
        let report = loo_sensitivities(&ts, &all, &model, grid)?;
        for (i, s) in report.per_point {
            let p = ts.points()[i];
            sens_sum[at(p.theta, p.psi)] += s;
            counts[at(p.theta, p.psi)] += 1;
        }
    }
    let n = realizations as f64;
    let gradient = CostMatrix::new(grid, grad_sum.iter().map(|g| g / n).collect(), Provenance::Surrogate)?;
    let sensitivity = CostMatrix::new(
        grid,
        sens_sum
            .iter()
            .zip(&counts)
            .map(|(s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
            .collect(),
        Provenance::Surrogate,
    )?;
    Ok(DiagnosticMaps {
        gradient,
        sensitivity,
        sample_counts: counts,
    })
}

/// Writes `cost_heatmap.csv`, `gradient_map.csv` and `sensitivity_map.csv`
/// for the configured benchmark.
pub fn emit_diagnostics(cfg: &RunConfig, dir: &Path) -> Result<()> {
    cfg.validate()?;
    let bench = cfg.build_benchmark()?;
    let grid = bench.grid();
    output::ensure_dir(dir)?;
    std::fs::write(dir.join("resolved-config.txt"), cfg.resolved_text())?;
    output::write_grid(&dir.join("cost_heatmap.csv"), &bench.exact_matrix()?)?;
    let maps = diagnostic_maps(
        grid,
        |t, p| bench.fine_cost(t, p),
        cfg.diagnostics_points,
        cfg.diagnostics_realizations,
        &cfg.gp,
        cfg.master_seed,
    )?;
    output::write_grid(&dir.join("gradient_map.csv"), &maps.gradient)?;
    output::write_grid(&dir.join("sensitivity_map.csv"), &maps.sensitivity)?;
    Ok(())
}

/// `(ω, |H|)` for the spring chain with every stiffness equal to 1.
pub fn bode_unit_chain(count: usize, lo: f64, hi: f64) -> Result<Vec<(f64, f64)>> {
    let spec = SpringSpec::default();
    let ss = state_space(&vec![1.0; spec.n_springs], &spec)?;
    bode_sweep(&ss, lo, hi, count)
}

pub fn emit_bode(cfg: &RunConfig, dir: &Path) -> Result<()> {
    output::ensure_dir(dir)?;
    std::fs::write(dir.join("resolved-config.txt"), cfg.resolved_text())?;
    output::write_bode(&dir.join("bode.csv"), &bode_unit_chain(cfg.bode_points, 1e-2, 1e-1)?)
}
