//! Posterior-triggered surrogate refinement.
//!
//! Once the posterior variance has dropped below a fraction of its reference
//! value, the training points inside the posterior's inner percentile band
//! are ranked by leave-one-out sensitivity and new points are drawn from a
//! Gaussian around the most sensitive one.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::Result;
use crate::gp::{refit_without, GpModel};
use crate::problem::{
    percentile_interval, CostOracle, DiscreteDistribution, Fidelity, IndexGrid, TrainingPoint,
    TrainingSet,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinementConfig {
    pub variance_fraction: f64,
    pub points_per_refinement: usize,
    pub max_refinements: usize,
    pub proposal_std_theta: f64,
    pub proposal_std_psi: f64,
    pub percentile_band: (f64, f64),
}

impl RefinementConfig {
    /// Defaults scaled to the grid: proposal spread of 1/16 of each axis.
    pub fn for_grid(grid: IndexGrid) -> Self {
        Self {
            variance_fraction: 0.25,
            points_per_refinement: 8,
            max_refinements: 2,
            proposal_std_theta: grid.n_theta() as f64 / 16.0,
            proposal_std_psi: grid.n_psi() as f64 / 16.0,
            percentile_band: (0.16, 0.84),
        }
    }

    /// Upper bound on training-set growth from refinements.
    pub fn max_added_points(&self) -> usize {
        self.points_per_refinement * self.max_refinements
    }
}

pub fn converged(initial_variance: f64, current_variance: f64, fraction: f64) -> bool {
    current_variance <= fraction * initial_variance
}

/// Training indices whose θ lies inside the percentile band of `d`.
pub fn select_p68(ts: &TrainingSet, d: &DiscreteDistribution, band: (f64, f64)) -> Vec<usize> {
    let (lo, hi) = percentile_interval(d, band.0, band.1);
    ts.points()
        .iter()
        .enumerate()
        .filter(|(_, p)| (lo..=hi).contains(&p.theta))
        .map(|(i, _)| i)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityReport {
    /// `(training index, L2 change of the full-grid prediction)`, sorted by index.
    pub per_point: Vec<(usize, f64)>,
    /// Training index of the largest sensitivity (lowest index on ties).
    pub argmax: usize,
}

/// Leave-one-out sensitivity of the surrogate to each candidate training
/// point, with hyperparameters frozen at the fitted values.
pub fn loo_sensitivities(
    ts: &TrainingSet,
    candidates: &[usize],
    fitted: &GpModel,
    grid: IndexGrid,
) -> Result<SensitivityReport> {
    let mut idx: Vec<usize> = candidates.to_vec();
    idx.sort_unstable();
    idx.dedup();
    let baseline = fitted.predict_mean(grid)?;
    let params = *fitted.params();
    let per_point: Vec<(usize, f64)> = idx
        .par_iter()
        .map(|&i| {
            let reduced = refit_without(ts, i, &params, grid)?;
            Ok((i, reduced.l2_distance(&baseline)))
        })
        .collect::<Result<_>>()?;
    let mut argmax = per_point.first().map_or(0, |p| p.0);
    let mut best = f64::NEG_INFINITY;
    for &(i, s) in &per_point {
        if s > best {
            best = s;
            argmax = i;
        }
    }
    Ok(SensitivityReport { per_point, argmax })
}

/// Gaussian proposals around `center`, rounded to the grid, clamped, and
/// deduplicated against `existing` and each other. Returns fewer than
/// `points_per_refinement` points when the draw budget runs out.
pub fn propose_points<R: Rng + ?Sized>(
    center: (usize, usize),
    cfg: &RefinementConfig,
    grid: IndexGrid,
    existing: &TrainingSet,
    rng: &mut R,
) -> Vec<(usize, usize)> {
    let want = cfg.points_per_refinement;
    let budget = 100 * want;
    let axis = |std: f64| Normal::new(0.0, std.max(0.0)).expect("finite non-negative std");
    let dt = axis(cfg.proposal_std_theta);
    let dp = axis(cfg.proposal_std_psi);
    let snap = |c: usize, off: f64, n: usize| -> usize {
        let v = (c as f64 + off).round();
        v.clamp(1.0, n as f64) as usize
    };
    let mut accepted: Vec<(usize, usize)> = Vec::with_capacity(want);
    for _ in 0..budget {
        if accepted.len() == want {
            break;
        }
        let t = snap(center.0, dt.sample(rng), grid.n_theta());
        let p = snap(center.1, dp.sample(rng), grid.n_psi());
        if existing.contains_location(t, p) || accepted.contains(&(t, p)) {
            continue;
        }
        accepted.push((t, p));
    }
    accepted
}

/// Trigger bookkeeping carried across a campaign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinementState {
    pub initial_variance: f64,
    /// Variance the trigger compares against: the initial variance, then the
    /// variance recorded at the most recent refinement.
    pub reference_variance: f64,
    pub refinements_used: usize,
}

impl RefinementState {
    pub fn new(initial_variance: f64) -> Self {
        Self {
            initial_variance,
            reference_variance: initial_variance,
            refinements_used: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementEvent {
    /// Training index the proposals were centered on.
    pub center_index: usize,
    pub center: (usize, usize),
    pub candidates: Vec<usize>,
    pub added: Vec<(usize, usize)>,
}

/// Training point whose θ is closest to `map_theta` (lowest index on ties).
fn nearest_to_map(ts: &TrainingSet, map_theta: usize) -> Option<usize> {
    ts.points()
        .iter()
        .enumerate()
        .min_by_key(|(i, p)| (p.theta.abs_diff(map_theta), *i))
        .map(|(i, _)| i)
}

/// Runs at most one refinement. Returns the (possibly augmented) training
/// set and the event when one fired; the caller refits the surrogate.
#[allow(clippy::too_many_arguments)]
pub fn maybe_refine<O, R>(
    state: &mut RefinementState,
    ts: &TrainingSet,
    d: &DiscreteDistribution,
    fitted: &GpModel,
    cfg: &RefinementConfig,
    grid: IndexGrid,
    oracle: &O,
    rng: &mut R,
) -> Result<(TrainingSet, Option<RefinementEvent>)>
where
    O: CostOracle + ?Sized,
    R: Rng + ?Sized,
{
    let stats = d.stats();
    let gate_open = converged(state.reference_variance, stats.variance, cfg.variance_fraction)
        && state.refinements_used < cfg.max_refinements
        && ts.len() >= 2;
    if !gate_open {
        return Ok((ts.clone(), None));
    }
    let mut candidates = select_p68(ts, d, cfg.percentile_band);
    if candidates.is_empty() {
        candidates.extend(nearest_to_map(ts, stats.map_index));
    }
    let report = loo_sensitivities(ts, &candidates, fitted, grid)?;
    let pivot = ts.points()[report.argmax];
    let center = (pivot.theta, pivot.psi);
    let added = propose_points(center, cfg, grid, ts, rng);

    let mut augmented = ts.clone();
    for &(theta, psi) in &added {
        let cost = oracle.cost(theta, psi, Fidelity::Fine)?;
        augmented.push(
            grid,
            TrainingPoint {
                theta,
                psi,
                cost,
                fidelity: Fidelity::Fine,
            },
        )?;
    }
    state.refinements_used += 1;
    state.reference_variance = stats.variance;
    Ok((
        augmented,
        Some(RefinementEvent {
            center_index: report.argmax,
            center,
            candidates,
            added,
        }),
    ))
}
