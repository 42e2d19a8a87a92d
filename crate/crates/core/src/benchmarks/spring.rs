//! Chain of coupled spring-mass-damper units driven at the first mass.
//!
//! Each uncertainty-class member θ is one realization of the spring
//! stiffnesses; each action ψ is a forcing frequency on a log grid. The cost
//! is the shortfall of the mean-displacement amplitude `|H(iω)|` from its
//! per-θ maximum over the action grid.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{MocuError, Result};
use crate::problem::{ExperimentModel, IndexGrid};

#[derive(Debug, Clone, PartialEq)]
pub struct SpringSpec {
    pub n_springs: usize,
    pub mass: f64,
    pub damping: f64,
    pub stiffness_floor: f64,
    pub noise_halfwidth: f64,
    pub n_theta: usize,
    pub n_psi: usize,
    pub omega_min: f64,
    pub omega_max: f64,
    pub theta_true: usize,
    /// `n_theta` rows of `n_springs` stiffness values; empty until built.
    pub stiffness_table: Vec<Vec<f64>>,
}

impl Default for SpringSpec {
    fn default() -> Self {
        Self {
            n_springs: 16,
            mass: 1.0,
            damping: 0.125,
            stiffness_floor: 0.1,
            noise_halfwidth: 0.1,
            n_theta: 64,
            n_psi: 64,
            omega_min: 0.03,
            omega_max: 0.1,
            theta_true: 48,
            stiffness_table: Vec::new(),
        }
    }
}

impl SpringSpec {
    pub fn grid(&self) -> Result<IndexGrid> {
        IndexGrid::new(self.n_theta, self.n_psi)
    }

    /// Stiffness level of class member θ before noise.
    pub fn stiffness_level(&self, theta: usize) -> f64 {
        0.1 + 0.9 * theta as f64 / self.n_theta as f64
    }
}

/// Draws the per-(θ, spring) stiffness table from a seeded stream.
pub fn build_spring_class(spec: &SpringSpec, seed: u64) -> Result<SpringSpec> {
    if spec.n_springs == 0 {
        return Err(MocuError::Config("n_springs must be positive".into()));
    }
    spec.grid()?;
    if !(1..=spec.n_theta).contains(&spec.theta_true) {
        return Err(MocuError::OutOfBounds {
            what: "theta_true",
            index: spec.theta_true,
            max: spec.n_theta,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = spec.noise_halfwidth;
    let table = (1..=spec.n_theta)
        .map(|theta| {
            let level = spec.stiffness_level(theta);
            (0..spec.n_springs)
                .map(|_| {
                    let eta = h * (2.0 * rng.random::<f64>() - 1.0);
                    (level + eta).max(spec.stiffness_floor)
                })
                .collect()
        })
        .collect();
    Ok(SpringSpec {
        stiffness_table: table,
        ..spec.clone()
    })
}

/// First-order form `[x; v]' = A [x; v] + b u`, `y = c^T [x; v]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
}

/// Chain coupling matrix: element `i` couples mass `i-1` and mass `i`
/// (element 1 couples mass 1 to the wall).
fn chain_block(coeffs: &[f64], mass: f64) -> DMatrix<f64> {
    let n = coeffs.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] -= coeffs[i];
        if i + 1 < n {
            m[(i, i)] -= coeffs[i + 1];
            m[(i, i + 1)] += coeffs[i + 1];
            m[(i + 1, i)] += coeffs[i + 1];
        }
    }
    m / mass
}

pub fn state_space(k: &[f64], spec: &SpringSpec) -> Result<StateSpace> {
    let n = spec.n_springs;
    if k.len() != n {
        return Err(MocuError::DimensionMismatch(format!(
            "{} stiffness values for {n} springs",
            k.len()
        )));
    }
    let a2 = chain_block(k, spec.mass);
    let a3 = chain_block(&vec![spec.damping; n], spec.mass);
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    a.view_mut((0, n), (n, n)).fill_with_identity();
    a.view_mut((n, 0), (n, n)).copy_from(&a2);
    a.view_mut((n, n), (n, n)).copy_from(&a3);
    let mut b = DVector::zeros(2 * n);
    b[n] = 1.0;
    let mut c = DVector::zeros(2 * n);
    c.rows_mut(0, n).fill(1.0 / n as f64);
    Ok(StateSpace { a, b, c })
}

/// `|c^T (iω I - A)^{-1} b|` through one complex LU solve.
pub fn transfer_magnitude(ss: &StateSpace, omega: f64) -> Result<f64> {
    let n = ss.a.nrows();
    let m = DMatrix::from_fn(n, n, |i, j| {
        let diag = if i == j { omega } else { 0.0 };
        Complex64::new(-ss.a[(i, j)], diag)
    });
    let rhs = ss.b.map(|v| Complex64::new(v, 0.0));
    let z = m
        .lu()
        .solve(&rhs)
        .ok_or(MocuError::SingularSystem { omega })?;
    let out: Complex64 = ss.c.iter().zip(z.iter()).map(|(c, z)| z * *c).sum();
    let mag = out.norm();
    if mag.is_finite() {
        Ok(mag)
    } else {
        Err(MocuError::SingularSystem { omega })
    }
}

/// Log-spaced forcing frequency for action ψ.
pub fn omega_map(psi: usize, n_psi: usize) -> f64 {
    omega_map_in(psi, n_psi, 0.03, 0.1)
}

pub fn omega_map_in(psi: usize, n_psi: usize, lo: f64, hi: f64) -> f64 {
    if psi <= 1 || n_psi <= 1 {
        return lo;
    }
    if psi >= n_psi {
        return hi;
    }
    let t = (psi - 1) as f64 / (n_psi - 1) as f64;
    lo * (hi / lo).powf(t)
}

/// `(ω, |H|)` pairs on a log grid over `[lo, hi]`.
pub fn bode_sweep(ss: &StateSpace, lo: f64, hi: f64, count: usize) -> Result<Vec<(f64, f64)>> {
    (1..=count)
        .map(|i| {
            let w = omega_map_in(i, count, lo, hi);
            transfer_magnitude(ss, w).map(|m| (w, m))
        })
        .collect()
}

/// Spring benchmark with a frozen stiffness table and cached per-θ maxima.
#[derive(Debug)]
pub struct SpringProblem {
    spec: SpringSpec,
    systems: Vec<StateSpace>,
    row_max: Vec<OnceLock<f64>>,
}

impl SpringProblem {
    pub fn new(spec: SpringSpec) -> Result<Self> {
        if spec.stiffness_table.len() != spec.n_theta {
            return Err(MocuError::Config(
                "stiffness table not built; call build_spring_class first".into(),
            ));
        }
        let systems = spec
            .stiffness_table
            .iter()
            .map(|k| state_space(k, &spec))
            .collect::<Result<Vec<_>>>()?;
        let row_max = (0..spec.n_theta).map(|_| OnceLock::new()).collect();
        Ok(Self {
            spec,
            systems,
            row_max,
        })
    }

    pub fn spec(&self) -> &SpringSpec {
        &self.spec
    }

    pub fn grid(&self) -> IndexGrid {
        self.spec.grid().expect("validated at construction")
    }

    pub fn omega(&self, psi: usize) -> f64 {
        omega_map_in(psi, self.spec.n_psi, self.spec.omega_min, self.spec.omega_max)
    }

    pub fn magnitude(&self, theta: usize, psi: usize) -> Result<f64> {
        self.grid().check_theta(theta)?;
        self.grid().check_psi(psi)?;
        transfer_magnitude(&self.systems[theta - 1], self.omega(psi))
    }

    fn max_magnitude(&self, theta: usize) -> Result<f64> {
        if let Some(v) = self.row_max[theta - 1].get() {
            return Ok(*v);
        }
        let mut best = f64::NEG_INFINITY;
        for psi in 1..=self.spec.n_psi {
            best = best.max(self.magnitude(theta, psi)?);
        }
        Ok(*self.row_max[theta - 1].get_or_init(|| best))
    }

    /// Shortfall of `|H|` from the per-θ maximum over the action grid.
    pub fn spring_cost(&self, theta: usize, psi: usize) -> Result<f64> {
        let m = self.magnitude(theta, psi)?;
        Ok((self.max_magnitude(theta)? - m).max(0.0))
    }

    pub fn experiment_model(&self) -> Result<ExperimentModel> {
        super::synthetic::gaussian_experiment_model(self.spec.n_theta)
    }
}
