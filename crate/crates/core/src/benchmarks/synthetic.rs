//! Fabricated cost surface with a ψ≈1 ridge of local minima and an isolated
//! global minimum at `(n_theta/4, 3 n_psi/4)`, plus its cheap coarse model.

use crate::error::{MocuError, Result};
use crate::problem::{ExperimentModel, IndexGrid};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub n_theta: usize,
    pub n_psi: usize,
    pub theta_true: usize,
}

impl SyntheticSpec {
    pub fn new(n_theta: usize, n_psi: usize) -> Result<Self> {
        IndexGrid::new(n_theta, n_psi)?;
        let theta_true = (n_theta / 4).max(1);
        Ok(Self {
            n_theta,
            n_psi,
            theta_true,
        })
    }

    pub fn grid(&self) -> IndexGrid {
        IndexGrid::new(self.n_theta, self.n_psi).expect("validated at construction")
    }
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self::new(64, 64).expect("64x64 grid is valid")
    }
}

fn gaussian_bump(v: f64, center: f64, width: f64) -> f64 {
    let z = (v - center) / width;
    (-0.5 * z * z).exp()
}

/// Ridge term, in `[1, 2]`.
pub fn j1(theta: usize, psi: usize, spec: &SyntheticSpec) -> f64 {
    let nt = spec.n_theta as f64;
    let t = theta as f64;
    let ridge = t * t / (2.0 * nt * nt);
    let width = (spec.n_theta + spec.n_psi) as f64 / 8.0;
    2.0 - gaussian_bump(psi as f64, ridge, width)
}

pub fn j2(psi: usize, spec: &SyntheticSpec) -> f64 {
    let np = spec.n_psi as f64;
    gaussian_bump(psi as f64, 0.75 * np, np / 16.0)
}

pub fn j3(theta: usize, spec: &SyntheticSpec) -> f64 {
    let nt = spec.n_theta as f64;
    gaussian_bump(theta as f64, 0.25 * nt, nt / 8.0)
}

/// Fine (exact) cost `J1 (1 - J2 J3)`.
pub fn synthetic_cost(theta: usize, psi: usize, spec: &SyntheticSpec) -> f64 {
    j1(theta, psi, spec) * (1.0 - j2(psi, spec) * j3(theta, spec))
}

/// Cheap model: the ridge term alone, blind to the isolated minimum.
pub fn coarse_cost(theta: usize, psi: usize, spec: &SyntheticSpec) -> f64 {
    j1(theta, psi, spec)
}

/// Binary-outcome experiments at every fourth θ with a Gaussian detection
/// likelihood of width `n_theta / 8`.
pub fn synthetic_experiment_model(spec: &SyntheticSpec) -> Result<ExperimentModel> {
    gaussian_experiment_model(spec.n_theta)
}

pub(crate) fn gaussian_experiment_model(n_theta: usize) -> Result<ExperimentModel> {
    if n_theta == 0 || !n_theta.is_multiple_of(4) {
        return Err(MocuError::InvalidExperimentModel(format!(
            "n_theta = {n_theta} must be a positive multiple of 4"
        )));
    }
    let experiments: Vec<usize> = (1..=n_theta / 4).map(|k| 4 * k).collect();
    let sigma_x = n_theta as f64 / 8.0;
    let locations = experiments.clone();
    ExperimentModel::from_fn(experiments, vec![0, 1], n_theta, sigma_x, move |x, y, theta| {
        let hit = gaussian_bump(locations[x] as f64, theta as f64, sigma_x);
        if y == 1 {
            hit
        } else {
            1.0 - hit
        }
    })
}
