use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sparse_mocu::harness::config::{parse_methods, RunConfig};
use sparse_mocu::harness::diagnostics::{emit_bode, emit_diagnostics};
use sparse_mocu::harness::{output, run_campaign, run_ensemble, write_ensemble};
use sparse_mocu::Result;

#[derive(Parser)]
#[command(name = "sparse-mocu", version, about = "Sequential experimental design with surrogate MOCU")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single campaign per selected method.
    Run {
        #[command(flatten)]
        common: Common,
        /// Realization id whose seed streams are used.
        #[arg(long, default_value_t = 0)]
        realization: u64,
    },
    /// Monte Carlo study over realizations.
    Ensemble(Common),
    /// Cost heatmap, gradient and sensitivity maps.
    Diagnostics(Common),
    /// Bode magnitude sweep of the unit-stiffness spring chain.
    Bode(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    benchmark: Option<String>,
    /// `all`, or a comma-separated list of full, static_surrogate, adaptive_surrogate.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long)]
    experiments: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        if let Some(b) = &self.benchmark {
            cfg.benchmark = b.parse()?;
        }
        if let Some(m) = &self.method {
            cfg.methods = parse_methods(m)?;
        }
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        if let Some(n) = self.realizations {
            cfg.n_realizations = n;
            cfg.diagnostics_realizations = n;
        }
        if let Some(n) = self.experiments {
            cfg.n_experiments = n;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run { common, realization } => {
            let cfg = common.resolve()?;
            let bench = cfg.build_benchmark()?;
            output::ensure_dir(&cfg.output_dir)?;
            std::fs::write(cfg.output_dir.join("resolved-config.txt"), cfg.resolved_text())?;
            let mut failed = Vec::new();
            for &m in &cfg.methods {
                let trace = run_campaign(&cfg, &bench, m, realization);
                let path = cfg.output_dir.join(format!("trace_{m}_{realization}.csv"));
                output::write_trace(&path, &trace)?;
                if let Some(f) = trace.failure {
                    failed.push(format!("{m}: {f}"));
                }
            }
            if !failed.is_empty() {
                return Err(sparse_mocu::MocuError::Config(failed.join("; ")));
            }
        }
        Command::Ensemble(common) => {
            let cfg = common.resolve()?;
            let results = run_ensemble(&cfg)?;
            write_ensemble(&cfg.output_dir, &cfg, &results)?;
            for e in &results {
                let failures = e.failures();
                if !failures.is_empty() {
                    eprintln!("{}: {} of {} realizations failed", e.method, failures.len(), e.traces.len());
                }
            }
        }
        Command::Diagnostics(common) => {
            let cfg = common.resolve()?;
            emit_diagnostics(&cfg, &cfg.output_dir)?;
        }
        Command::Bode(common) => {
            let cfg = common.resolve()?;
            emit_bode(&cfg, &cfg.output_dir)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
