//! CSV writers. Floats use Rust's shortest round-trip formatting so reruns
//! compare byte for byte.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::Result;
use crate::problem::CostMatrix;

use super::campaign::{CampaignTrace, TRACE_HEADER};
use super::ensemble::{AggregateRow, OracleCounts, AGGREGATE_HEADER};

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn f(v: f64) -> String {
    format!("{v}")
}

pub fn write_trace(path: &Path, trace: &CampaignTrace) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRACE_HEADER)?;
    for r in &trace.rows {
        w.write_record([
            r.realization_id.to_string(),
            r.experiment_index.to_string(),
            r.x_selected.to_string(),
            r.y_outcome.to_string(),
            r.psi_selected.to_string(),
            f(r.true_cost),
            f(r.posterior_variance),
            f(r.posterior_mean),
            r.map_theta.to_string(),
            r.p68.0.to_string(),
            r.p68.1.to_string(),
            r.p95.0.to_string(),
            r.p95.1.to_string(),
            r.training_set_size.to_string(),
            u8::from(r.refined_this_step).to_string(),
            "ok".to_string(),
        ])?;
    }
    if let Some(msg) = &trace.failure {
        let mut rec = vec![String::new(); TRACE_HEADER.len()];
        rec[0] = trace.realization_id.to_string();
        rec[1] = (trace.rows.len() + 1).to_string();
        rec[TRACE_HEADER.len() - 1] = format!("failed: {msg}");
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Aggregate table, followed by `#` comment lines naming failed realizations.
pub fn write_aggregate(path: &Path, rows: &[AggregateRow], failures: &[(u64, String)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(AGGREGATE_HEADER)?;
    for r in rows {
        w.write_record([
            r.experiment_index.to_string(),
            r.n_ok.to_string(),
            f(r.mean_true_cost),
            f(r.se_true_cost),
            f(r.mean_posterior_variance),
            f(r.se_posterior_variance),
            f(r.map_hit_rate),
            f(r.se_map_hit_rate),
            f(r.mean_posterior_mean),
            f(r.mean_map_theta),
            f(r.mean_training_set_size),
        ])?;
    }
    let mut inner = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    if !failures.is_empty() {
        writeln!(inner, "# failed realizations: {}", failures.len())?;
        for (r, msg) in failures {
            writeln!(inner, "# realization {r}: {}", msg.replace('\n', " "))?;
        }
    }
    inner.flush()?;
    Ok(())
}

pub fn write_oracle_counts(path: &Path, counts: &[OracleCounts]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["realization_id", "coarse_calls", "fine_calls"])?;
    for c in counts {
        w.write_record([
            c.realization_id.to_string(),
            c.coarse.to_string(),
            c.fine.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Matrix in `theta,psi_1,...,psi_n` layout, one row per θ.
pub fn write_grid(path: &Path, m: &CostMatrix) -> Result<()> {
    let grid = m.grid();
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["theta".to_string()];
    header.extend((1..=grid.n_psi()).map(|p| format!("psi_{p}")));
    w.write_record(&header)?;
    for t in 1..=grid.n_theta() {
        let mut rec = vec![t.to_string()];
        rec.extend(m.row(t).iter().map(|&v| f(v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_bode(path: &Path, sweep: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["omega", "magnitude"])?;
    for &(omega, mag) in sweep {
        w.write_record([f(omega), f(mag)])?;
    }
    w.flush()?;
    Ok(())
}
