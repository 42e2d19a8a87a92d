//! Campaign orchestration, Monte Carlo ensembles, diagnostics and CSV output.

pub mod campaign;
pub mod config;
pub mod diagnostics;
pub mod ensemble;
pub mod output;
pub mod seed;

pub use campaign::{run_campaign, CampaignTrace, CountingOracle, TraceRow};
pub use config::{Method, RunConfig};
pub use ensemble::{aggregate, run_ensemble, write_ensemble, AggregateRow, MethodEnsemble};
