//! Run configuration: a plain-text `key = value` file with `[section]`
//! headers, overridable from the command line.
//!
//! ```text
//! [run]
//! benchmark = synthetic
//! method = full, static_surrogate, adaptive_surrogate
//! n_experiments = 256
//! n_realizations = 128
//! master_seed = 1
//!
//! [refinement]
//! variance_fraction = 0.25
//! ```

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::benchmarks::{Benchmark, BenchmarkKind, SpringSpec};
use crate::error::{MocuError, Result};
use crate::gp::{GpConfig, Nu};
use crate::problem::IndexGrid;
use crate::refine::RefinementConfig;

use super::seed::child_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Full,
    StaticSurrogate,
    AdaptiveSurrogate,
}

impl Method {
    pub const ALL: [Method; 3] = [
        Method::Full,
        Method::StaticSurrogate,
        Method::AdaptiveSurrogate,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Full => "full",
            Method::StaticSurrogate => "static_surrogate",
            Method::AdaptiveSurrogate => "adaptive_surrogate",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = MocuError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Method::Full),
            "static_surrogate" | "static" => Ok(Method::StaticSurrogate),
            "adaptive_surrogate" | "adaptive" => Ok(Method::AdaptiveSurrogate),
            other => Err(MocuError::Config(format!("unknown method '{other}'"))),
        }
    }
}

/// Parses `full`, `all`, or a comma-separated list of methods.
pub fn parse_methods(s: &str) -> Result<Vec<Method>> {
    if s.trim() == "all" {
        return Ok(Method::ALL.to_vec());
    }
    let methods = s
        .split(',')
        .map(|m| m.trim().parse())
        .collect::<Result<Vec<Method>>>()?;
    if methods.is_empty() {
        return Err(MocuError::Config("no method given".into()));
    }
    Ok(methods)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub benchmark: BenchmarkKind,
    pub methods: Vec<Method>,
    pub n_experiments: usize,
    pub n_realizations: usize,
    /// Overrides the per-method default initial training size.
    pub initial_points: Option<usize>,
    /// Training points allowed per surrogate realization (static default).
    pub training_budget: usize,
    pub adaptive_initial_points: usize,
    pub n_theta: usize,
    pub n_psi: usize,
    pub refinement: RefinementConfig,
    pub gp: GpConfig,
    pub master_seed: u64,
    /// Seed of the spring stiffness table; derived from the master seed if unset.
    pub spring_seed: Option<u64>,
    pub output_dir: PathBuf,
    pub diagnostics_realizations: usize,
    pub diagnostics_points: usize,
    pub bode_points: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let grid = IndexGrid::new(64, 64).expect("valid default grid");
        Self {
            benchmark: BenchmarkKind::Synthetic,
            methods: Method::ALL.to_vec(),
            n_experiments: 256,
            n_realizations: 128,
            initial_points: None,
            training_budget: 48,
            adaptive_initial_points: 32,
            n_theta: 64,
            n_psi: 64,
            refinement: RefinementConfig::for_grid(grid),
            gp: GpConfig::default(),
            master_seed: 1,
            spring_seed: None,
            output_dir: PathBuf::from("out"),
            diagnostics_realizations: 64,
            diagnostics_points: 48,
            bode_points: 512,
        }
    }
}

const SECTIONS: [&str; 6] = ["run", "problem", "gp", "refinement", "diagnostics", "output"];

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| MocuError::Config(format!("bad value for '{key}': '{value}'")))
}

impl RunConfig {
    /// Reads a config file on top of the defaults.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| MocuError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        // proposal widths follow the grid unless given explicitly
        let mut std_theta = None;
        let mut std_psi = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split(['#', ';']).next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(section) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let section = section.trim();
                if !SECTIONS.contains(&section) {
                    return Err(MocuError::Config(format!(
                        "line {}: unknown section [{section}]",
                        lineno + 1
                    )));
                }
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                MocuError::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "proposal_std_theta" => std_theta = Some(parse_value(key, value)?),
                "proposal_std_psi" => std_psi = Some(parse_value(key, value)?),
                _ => self.set(key, value)?,
            }
        }
        let grid = IndexGrid::new(self.n_theta, self.n_psi)?;
        let defaults = RefinementConfig::for_grid(grid);
        self.refinement.proposal_std_theta = std_theta.unwrap_or(defaults.proposal_std_theta);
        self.refinement.proposal_std_psi = std_psi.unwrap_or(defaults.proposal_std_psi);
        Ok(())
    }

    /// Sets one key. Unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "benchmark" => self.benchmark = value.parse()?,
            "method" | "methods" => self.methods = parse_methods(value)?,
            "n_experiments" => self.n_experiments = parse_value(key, value)?,
            "n_realizations" => self.n_realizations = parse_value(key, value)?,
            "initial_points" => self.initial_points = Some(parse_value(key, value)?),
            "training_budget" => self.training_budget = parse_value(key, value)?,
            "adaptive_initial_points" => self.adaptive_initial_points = parse_value(key, value)?,
            "n_theta" => self.n_theta = parse_value(key, value)?,
            "n_psi" => self.n_psi = parse_value(key, value)?,
            "master_seed" | "seed" => self.master_seed = parse_value(key, value)?,
            "spring_seed" => self.spring_seed = Some(parse_value(key, value)?),
            "output_dir" => self.output_dir = PathBuf::from(value),
            "nu" => {
                let v: f64 = parse_value(key, value)?;
                self.gp.nu = Nu::from_f64(v)
                    .ok_or_else(|| MocuError::Config(format!("nu must be 0.5, 1.5 or 2.5, got {v}")))?;
            }
            "restarts" => self.gp.restarts = parse_value(key, value)?,
            "max_iters" => self.gp.max_iters = parse_value(key, value)?,
            "grad_tol" => self.gp.grad_tol = parse_value(key, value)?,
            "variance_fraction" => self.refinement.variance_fraction = parse_value(key, value)?,
            "points_per_refinement" => {
                self.refinement.points_per_refinement = parse_value(key, value)?
            }
            "max_refinements" => self.refinement.max_refinements = parse_value(key, value)?,
            "proposal_std_theta" => self.refinement.proposal_std_theta = parse_value(key, value)?,
            "proposal_std_psi" => self.refinement.proposal_std_psi = parse_value(key, value)?,
            "percentile_lo" => self.refinement.percentile_band.0 = parse_value(key, value)?,
            "percentile_hi" => self.refinement.percentile_band.1 = parse_value(key, value)?,
            "diagnostics_realizations" => self.diagnostics_realizations = parse_value(key, value)?,
            "diagnostics_points" => self.diagnostics_points = parse_value(key, value)?,
            "bode_points" => self.bode_points = parse_value(key, value)?,
            other => return Err(MocuError::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<IndexGrid> {
        IndexGrid::new(self.n_theta, self.n_psi)
    }

    /// Initial training size for a method; zero for full MOCU.
    pub fn initial_points_for(&self, method: Method) -> usize {
        match method {
            Method::Full => 0,
            Method::StaticSurrogate => self.initial_points.unwrap_or(self.training_budget),
            Method::AdaptiveSurrogate => self.initial_points.unwrap_or(self.adaptive_initial_points),
        }
    }

    pub fn spring_table_seed(&self) -> u64 {
        self.spring_seed
            .unwrap_or_else(|| child_seed(self.master_seed, u64::MAX))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(MocuError::Config(m));
        self.grid()?;
        if !self.n_theta.is_multiple_of(4) {
            return bad(format!("n_theta = {} must be a multiple of 4", self.n_theta));
        }
        if self.n_experiments == 0 || self.n_realizations == 0 {
            return bad("n_experiments and n_realizations must be positive".into());
        }
        if self.methods.is_empty() {
            return bad("no method selected".into());
        }
        let r = &self.refinement;
        if !(r.variance_fraction > 0.0 && r.variance_fraction <= 1.0) {
            return bad(format!("variance_fraction {} outside (0, 1]", r.variance_fraction));
        }
        if r.points_per_refinement == 0 {
            return bad("points_per_refinement must be at least 1".into());
        }
        if !(r.proposal_std_theta >= 0.0 && r.proposal_std_psi >= 0.0)
            || !r.proposal_std_theta.is_finite()
            || !r.proposal_std_psi.is_finite()
        {
            return bad("proposal widths must be finite and non-negative".into());
        }
        let (lo, hi) = r.percentile_band;
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return bad(format!("percentile band ({lo}, {hi}) invalid"));
        }
        if self.gp.restarts == 0 {
            return bad("restarts must be at least 1".into());
        }
        for &m in &self.methods {
            let init = self.initial_points_for(m);
            if m != Method::Full && init < 2 {
                return bad(format!("{m}: need at least 2 initial training points"));
            }
            if m != Method::Full && init > self.n_theta * self.n_psi {
                return bad(format!("{m}: more initial points than grid cells"));
            }
        }
        if self.methods.contains(&Method::AdaptiveSurrogate) {
            let total = self.initial_points_for(Method::AdaptiveSurrogate) + r.max_added_points();
            if total > self.training_budget {
                return bad(format!(
                    "adaptive budget {total} exceeds training budget {}",
                    self.training_budget
                ));
            }
        }
        if self.diagnostics_points < 3 || self.diagnostics_realizations == 0 || self.bode_points < 2 {
            return bad("diagnostics need >= 3 points, >= 1 realization, >= 2 bode points".into());
        }
        Ok(())
    }

    pub fn build_benchmark(&self) -> Result<Benchmark> {
        match self.benchmark {
            BenchmarkKind::Synthetic => Benchmark::synthetic(self.n_theta, self.n_psi),
            BenchmarkKind::Multifidelity => Benchmark::multifidelity(self.n_theta, self.n_psi),
            BenchmarkKind::Spring => {
                let spec = self.spring_spec();
                Benchmark::spring(&spec, self.spring_table_seed())
            }
        }
    }

    pub fn spring_spec(&self) -> SpringSpec {
        SpringSpec {
            n_theta: self.n_theta,
            n_psi: self.n_psi,
            theta_true: (3 * self.n_theta / 4).max(1),
            ..SpringSpec::default()
        }
    }

    /// Every setting, in the file format, for provenance.
    pub fn resolved_text(&self) -> String {
        let methods: Vec<&str> = self.methods.iter().map(Method::as_str).collect();
        let r = &self.refinement;
        let mut s = String::new();
        let _ = writeln!(s, "[run]");
        let _ = writeln!(s, "benchmark = {}", self.benchmark);
        let _ = writeln!(s, "method = {}", methods.join(","));
        let _ = writeln!(s, "n_experiments = {}", self.n_experiments);
        let _ = writeln!(s, "n_realizations = {}", self.n_realizations);
        let _ = writeln!(s, "master_seed = {}", self.master_seed);
        let _ = writeln!(s, "training_budget = {}", self.training_budget);
        let _ = writeln!(s, "adaptive_initial_points = {}", self.adaptive_initial_points);
        if let Some(n) = self.initial_points {
            let _ = writeln!(s, "initial_points = {n}");
        }
        let _ = writeln!(s, "\n[problem]");
        let _ = writeln!(s, "n_theta = {}", self.n_theta);
        let _ = writeln!(s, "n_psi = {}", self.n_psi);
        let _ = writeln!(s, "spring_seed = {}", self.spring_table_seed());
        let _ = writeln!(s, "\n[gp]");
        let _ = writeln!(s, "nu = {}", self.gp.nu.as_f64());
        let _ = writeln!(s, "restarts = {}", self.gp.restarts);
        let _ = writeln!(s, "max_iters = {}", self.gp.max_iters);
        let _ = writeln!(s, "grad_tol = {:e}", self.gp.grad_tol);
        let _ = writeln!(s, "\n[refinement]");
        let _ = writeln!(s, "variance_fraction = {}", r.variance_fraction);
        let _ = writeln!(s, "points_per_refinement = {}", r.points_per_refinement);
        let _ = writeln!(s, "max_refinements = {}", r.max_refinements);
        let _ = writeln!(s, "proposal_std_theta = {}", r.proposal_std_theta);
        let _ = writeln!(s, "proposal_std_psi = {}", r.proposal_std_psi);
        let _ = writeln!(s, "percentile_lo = {}", r.percentile_band.0);
        let _ = writeln!(s, "percentile_hi = {}", r.percentile_band.1);
        let _ = writeln!(s, "\n[diagnostics]");
        let _ = writeln!(s, "diagnostics_realizations = {}", self.diagnostics_realizations);
        let _ = writeln!(s, "diagnostics_points = {}", self.diagnostics_points);
        let _ = writeln!(s, "bode_points = {}", self.bode_points);
        let _ = writeln!(s, "\n[output]");
        let _ = writeln!(s, "output_dir = {}", self.output_dir.display());
        s
    }
}
