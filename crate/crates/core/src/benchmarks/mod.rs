//! Ground-truth cost models and their experiment spaces.

pub mod spring;
pub mod synthetic;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{MocuError, Result};
use crate::problem::{CostMatrix, ExperimentModel, Fidelity, IndexGrid, Provenance};

pub use spring::{SpringProblem, SpringSpec, StateSpace};
pub use synthetic::SyntheticSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BenchmarkKind {
    Synthetic,
    Multifidelity,
    Spring,
}

impl BenchmarkKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BenchmarkKind::Synthetic => "synthetic",
            BenchmarkKind::Multifidelity => "multifidelity",
            BenchmarkKind::Spring => "spring",
        }
    }
}

impl fmt::Display for BenchmarkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BenchmarkKind {
    type Err = MocuError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "synthetic" => Ok(BenchmarkKind::Synthetic),
            "multifidelity" => Ok(BenchmarkKind::Multifidelity),
            "spring" => Ok(BenchmarkKind::Spring),
            other => Err(MocuError::Config(format!("unknown benchmark '{other}'"))),
        }
    }
}

#[derive(Debug)]
pub enum Benchmark {
    Synthetic(SyntheticSpec),
    /// Same fine surface as `Synthetic`, with the ridge-only coarse model.
    Multifidelity(SyntheticSpec),
    Spring(Box<SpringProblem>),
}

impl Benchmark {
    pub fn synthetic(n_theta: usize, n_psi: usize) -> Result<Self> {
        Ok(Benchmark::Synthetic(SyntheticSpec::new(n_theta, n_psi)?))
    }

    pub fn multifidelity(n_theta: usize, n_psi: usize) -> Result<Self> {
        Ok(Benchmark::Multifidelity(SyntheticSpec::new(n_theta, n_psi)?))
    }

    /// Spring chain with the stiffness table drawn from `seed`.
    pub fn spring(spec: &SpringSpec, seed: u64) -> Result<Self> {
        let built = spring::build_spring_class(spec, seed)?;
        Ok(Benchmark::Spring(Box::new(SpringProblem::new(built)?)))
    }

    pub fn kind(&self) -> BenchmarkKind {
        match self {
            Benchmark::Synthetic(_) => BenchmarkKind::Synthetic,
            Benchmark::Multifidelity(_) => BenchmarkKind::Multifidelity,
            Benchmark::Spring(_) => BenchmarkKind::Spring,
        }
    }

    pub fn grid(&self) -> IndexGrid {
        match self {
            Benchmark::Synthetic(s) | Benchmark::Multifidelity(s) => s.grid(),
            Benchmark::Spring(p) => p.grid(),
        }
    }

    pub fn theta_true(&self) -> usize {
        match self {
            Benchmark::Synthetic(s) | Benchmark::Multifidelity(s) => s.theta_true,
            Benchmark::Spring(p) => p.spec().theta_true,
        }
    }

    pub fn experiment_model(&self) -> Result<ExperimentModel> {
        match self {
            Benchmark::Synthetic(s) | Benchmark::Multifidelity(s) => {
                synthetic::synthetic_experiment_model(s)
            }
            Benchmark::Spring(p) => p.experiment_model(),
        }
    }

    pub fn fine_cost(&self, theta: usize, psi: usize) -> Result<f64> {
        let grid = self.grid();
        grid.check_theta(theta)?;
        grid.check_psi(psi)?;
        match self {
            Benchmark::Synthetic(s) | Benchmark::Multifidelity(s) => {
                Ok(synthetic::synthetic_cost(theta, psi, s))
            }
            Benchmark::Spring(p) => p.spring_cost(theta, psi),
        }
    }

    /// Cheap model; identical to the fine model unless the benchmark has a
    /// separate coarse surface.
    pub fn coarse_cost(&self, theta: usize, psi: usize) -> Result<f64> {
        match self {
            Benchmark::Multifidelity(s) => {
                let grid = s.grid();
                grid.check_theta(theta)?;
                grid.check_psi(psi)?;
                Ok(synthetic::coarse_cost(theta, psi, s))
            }
            _ => self.fine_cost(theta, psi),
        }
    }

    pub fn cost(&self, theta: usize, psi: usize, fidelity: Fidelity) -> Result<f64> {
        match fidelity {
            Fidelity::Fine => self.fine_cost(theta, psi),
            Fidelity::Coarse => self.coarse_cost(theta, psi),
        }
    }

    /// Exact fine-model cost matrix, rows built in parallel.
    pub fn exact_matrix(&self) -> Result<CostMatrix> {
        let grid = self.grid();
        let rows: Vec<Vec<f64>> = (1..=grid.n_theta())
            .into_par_iter()
            .map(|t| (1..=grid.n_psi()).map(|p| self.fine_cost(t, p)).collect())
            .collect::<Result<_>>()?;
        CostMatrix::new(grid, rows.concat(), Provenance::Exact)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_global_minimum_by_scan() {
        let b = Benchmark::synthetic(64, 64).unwrap();
        let j = b.exact_matrix().unwrap();
        let (mut best, mut at) = (f64::INFINITY, (0, 0));
        for (t, p) in j.grid().cells() {
            if j.get(t, p) < best {
                best = j.get(t, p);
                at = (t, p);
            }
        }
        assert_eq!(at, (16, 48));
        assert_eq!(best, 0.0);
    }

    #[test]
    fn coarse_argmin_differs_from_fine_at_truth() {
        let b = Benchmark::multifidelity(64, 64).unwrap();
        let argmin = |f: &dyn Fn(usize) -> f64| {
            (1..=64).fold((0, f64::INFINITY), |acc, p| {
                let v = f(p);
                if v < acc.1 {
                    (p, v)
                } else {
                    acc
                }
            })
        };
        let fine = argmin(&|p| b.fine_cost(16, p).unwrap());
        let coarse = argmin(&|p| b.coarse_cost(16, p).unwrap());
        assert_eq!(fine.0, 48);
        assert_ne!(coarse.0, 48);
    }

    #[test]
    fn parse_kind() {
        assert_eq!("spring".parse::<BenchmarkKind>().unwrap(), BenchmarkKind::Spring);
        assert!("other".parse::<BenchmarkKind>().is_err());
    }

    #[test]
    fn out_of_bounds_cost_rejected() {
        let b = Benchmark::synthetic(8, 8).unwrap();
        assert!(b.fine_cost(0, 1).is_err());
        assert!(b.coarse_cost(1, 9).is_err());
    }
}
