//! Sequential optimal experimental design driven by the mean objective cost
//! of uncertainty (MOCU), with a Gaussian-process surrogate for the design
//! cost matrix that is refined as the posterior over the uncertainty class
//! concentrates.
//!
//! * [`problem`]: grids, distributions, cost matrices, experiment models
//! * [`gp`]: Matern-kernel GP regression and hyperparameter fitting
//! * [`mocu`]: policies, MOCU, experiment selection, Bayes updates
//! * [`refine`]: convergence trigger, leave-one-out sensitivity, proposals
//! * [`benchmarks`]: synthetic, multifidelity and spring-chain problems
//! * [`harness`]: campaigns, Monte Carlo ensembles, CSV output

pub mod benchmarks;
pub mod error;
pub mod gp;
pub mod harness;
pub mod mocu;
pub mod problem;
pub mod refine;

pub use error::{MocuError, Result};
