//! Gaussian-process regression over the 2-D `(theta, psi)` index grid.
//!
//! Inputs are the raw grid indices, targets are centered by their mean, and
//! the covariance is an anisotropic Matern kernel plus white noise. Exact
//! inference is done through a Cholesky factorization with jitter
//! escalation; hyperparameters are tuned by projected gradient ascent on the
//! log marginal likelihood in log-parameter space.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;

use crate::error::{MocuError, Result};
use crate::problem::{CostMatrix, IndexGrid, Provenance, TrainingSet};

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-4;
/// Absolute floor on the white-noise variance.
pub const NOISE_FLOOR: f64 = 1e-10;

/// Matern smoothness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Nu {
    Half,
    ThreeHalves,
    FiveHalves,
}

impl Nu {
    pub fn from_f64(v: f64) -> Option<Self> {
        if v == 0.5 {
            Some(Nu::Half)
        } else if v == 1.5 {
            Some(Nu::ThreeHalves)
        } else if v == 2.5 {
            Some(Nu::FiveHalves)
        } else {
            None
        }
    }

    pub fn as_f64(&self) -> f64 {
        match self {
            Nu::Half => 0.5,
            Nu::ThreeHalves => 1.5,
            Nu::FiveHalves => 2.5,
        }
    }

    /// Unit-variance correlation at scaled distance `r`.
    fn correlation(&self, r: f64) -> f64 {
        match self {
            Nu::Half => (-r).exp(),
            Nu::ThreeHalves => {
                let a = 3f64.sqrt() * r;
                (1.0 + a) * (-a).exp()
            }
            Nu::FiveHalves => {
                let a = 5f64.sqrt() * r;
                (1.0 + a + a * a / 3.0) * (-a).exp()
            }
        }
    }

    /// `-rho'(r) / r`, the common factor of the lengthscale derivatives.
    fn neg_dcorr_over_r(&self, r: f64) -> f64 {
        match self {
            Nu::Half => {
                if r == 0.0 {
                    0.0
                } else {
                    (-r).exp() / r
                }
            }
            Nu::ThreeHalves => 3.0 * (-(3f64.sqrt()) * r).exp(),
            Nu::FiveHalves => {
                let a = 5f64.sqrt() * r;
                5.0 / 3.0 * (1.0 + a) * (-a).exp()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub signal_variance: f64,
    pub lengthscale_theta: f64,
    pub lengthscale_psi: f64,
    pub nu: Nu,
    pub noise_variance: f64,
}

impl KernelParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.signal_variance > 0.0
            && self.lengthscale_theta > 0.0
            && self.lengthscale_psi > 0.0
            && self.noise_variance >= NOISE_FLOOR
            && [
                self.signal_variance,
                self.lengthscale_theta,
                self.lengthscale_psi,
                self.noise_variance,
            ]
            .iter()
            .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(MocuError::Config(format!("invalid kernel parameters {self:?}")))
        }
    }

    /// `[ln s2, ln l_theta, ln l_psi, ln noise]`.
    pub fn to_log(&self) -> [f64; 4] {
        [
            self.signal_variance.ln(),
            self.lengthscale_theta.ln(),
            self.lengthscale_psi.ln(),
            self.noise_variance.ln(),
        ]
    }

    pub fn from_log(log: &[f64; 4], nu: Nu) -> Self {
        Self {
            signal_variance: log[0].exp(),
            lengthscale_theta: log[1].exp(),
            lengthscale_psi: log[2].exp(),
            nu,
            noise_variance: log[3].exp(),
        }
    }

    /// Anisotropic scaled distance between two grid locations.
    pub fn scaled_distance(&self, a: (f64, f64), b: (f64, f64)) -> f64 {
        let st = (a.0 - b.0) / self.lengthscale_theta;
        let sp = (a.1 - b.1) / self.lengthscale_psi;
        (st * st + sp * sp).sqrt()
    }

    fn covariance(&self, a: (f64, f64), b: (f64, f64)) -> f64 {
        matern_kernel(self.scaled_distance(a, b), self)
    }
}

/// Matern covariance at scaled distance `r`, times the signal variance.
pub fn matern_kernel(r: f64, p: &KernelParams) -> f64 {
    p.signal_variance * p.nu.correlation(r)
}

/// Settings for hyperparameter optimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpConfig {
    pub nu: Nu,
    pub restarts: usize,
    pub max_iters: usize,
    pub grad_tol: f64,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            nu: Nu::FiveHalves,
            restarts: 4,
            max_iters: 200,
            grad_tol: 1e-5,
        }
    }
}

fn inputs_of(ts: &TrainingSet) -> Vec<(f64, f64)> {
    ts.points()
        .iter()
        .map(|p| (p.theta as f64, p.psi as f64))
        .collect()
}

fn target_mean(ts: &TrainingSet) -> f64 {
    let n = ts.len().max(1) as f64;
    ts.points().iter().map(|p| p.cost).sum::<f64>() / n
}

fn centered_targets(ts: &TrainingSet) -> (f64, DVector<f64>) {
    let mean = target_mean(ts);
    (mean, targets_about(ts, mean))
}

fn targets_about(ts: &TrainingSet, mean: f64) -> DVector<f64> {
    DVector::from_iterator(ts.len(), ts.points().iter().map(|p| p.cost - mean))
}

/// Correlation matrix (unit signal variance, no noise).
fn correlation_matrix(x: &[(f64, f64)], p: &KernelParams) -> DMatrix<f64> {
    let n = x.len();
    let mut r = DMatrix::zeros(n, n);
    for i in 0..n {
        r[(i, i)] = 1.0;
        for j in 0..i {
            let v = p.nu.correlation(p.scaled_distance(x[i], x[j]));
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    r
}

struct Factorized {
    chol: Cholesky<f64, Dyn>,
    jitter: f64,
}

/// Factorizes `s2 * (R + j I) + noise I`, escalating the relative jitter `j`.
fn factorize(corr: &DMatrix<f64>, p: &KernelParams) -> Result<Factorized> {
    let n = corr.nrows();
    let mut jitter = JITTER_START;
    loop {
        let mut k = corr * p.signal_variance;
        for i in 0..n {
            k[(i, i)] += p.signal_variance * jitter + p.noise_variance;
        }
        if let Some(chol) = Cholesky::new(k) {
            return Ok(Factorized { chol, jitter });
        }
        if jitter >= JITTER_MAX {
            return Err(MocuError::SingularKernel {
                jitter: jitter * p.signal_variance,
            });
        }
        jitter *= 10.0;
    }
}

fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    let l = chol.l_dirty();
    2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
}

/// Log marginal likelihood value and gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmlEvaluation {
    pub value: f64,
    /// With respect to `[ln s2, ln l_theta, ln l_psi, ln noise]`.
    pub gradient: [f64; 4],
}

/// Log marginal likelihood of the mean-centered targets and its gradient
/// with respect to the log-transformed hyperparameters.
pub fn log_marginal_likelihood(ts: &TrainingSet, p: &KernelParams) -> Result<LmlEvaluation> {
    if ts.is_empty() {
        return Err(MocuError::InsufficientTraining { needed: 1, have: 0 });
    }
    let x = inputs_of(ts);
    let (_, y) = centered_targets(ts);
    lml_with(&x, &y, p)
}

fn lml_with(x: &[(f64, f64)], y: &DVector<f64>, p: &KernelParams) -> Result<LmlEvaluation> {
    let n = x.len();
    let corr = correlation_matrix(x, p);
    let f = factorize(&corr, p)?;
    let alpha = f.chol.solve(y);
    let value = -0.5 * y.dot(&alpha) - 0.5 * log_det(&f.chol) - 0.5 * n as f64 * LN_2PI;

    // W = alpha alpha^T - K^{-1}; dLML/dp = 0.5 tr(W dK/dp)
    let k_inv = f.chol.inverse();
    let mut w = &alpha * alpha.transpose();
    w -= &k_inv;

    let s2 = p.signal_variance;
    let mut g_signal = 0.0;
    let mut g_lt = 0.0;
    let mut g_lp = 0.0;
    let mut g_noise = 0.0;
    for i in 0..n {
        let wii = w[(i, i)];
        g_signal += wii * s2 * (1.0 + f.jitter);
        g_noise += wii * p.noise_variance;
        for j in 0..i {
            let wij = w[(i, j)];
            let st = (x[i].0 - x[j].0) / p.lengthscale_theta;
            let sp = (x[i].1 - x[j].1) / p.lengthscale_psi;
            let r = (st * st + sp * sp).sqrt();
            // symmetric off-diagonal pairs counted twice
            g_signal += 2.0 * wij * s2 * corr[(i, j)];
            let common = 2.0 * wij * s2 * p.nu.neg_dcorr_over_r(r);
            g_lt += common * st * st;
            g_lp += common * sp * sp;
        }
    }
    Ok(LmlEvaluation {
        value,
        gradient: [0.5 * g_signal, 0.5 * g_lt, 0.5 * g_lp, 0.5 * g_noise],
    })
}

/// Box constraints in log-parameter space.
#[derive(Debug, Clone, Copy)]
struct LogBounds {
    lo: [f64; 4],
    hi: [f64; 4],
}

impl LogBounds {
    fn new(grid: IndexGrid, target_var: f64) -> Self {
        let lo = [
            (1e-6 * target_var).max(1e-12).ln(),
            0.1f64.ln(),
            0.1f64.ln(),
            // nudged up so exp(ln(floor)) cannot round below the floor
            (1e-10 * target_var).max(NOISE_FLOOR).ln() + 1e-9,
        ];
        let mut hi = [
            (1e3 * target_var).max(1e-12).ln(),
            (10.0 * grid.n_theta() as f64).ln(),
            (10.0 * grid.n_psi() as f64).ln(),
            target_var.max(NOISE_FLOOR).ln(),
        ];
        hi[3] = hi[3].max(lo[3]);
        Self { lo, hi }
    }

    fn clamp(&self, v: &mut [f64; 4]) {
        for i in 0..4 {
            v[i] = v[i].clamp(self.lo[i], self.hi[i]);
        }
    }

    fn projected_gradient(&self, x: &[f64; 4], g: &[f64; 4]) -> [f64; 4] {
        let mut pg = *g;
        for i in 0..4 {
            if (x[i] <= self.lo[i] && g[i] < 0.0) || (x[i] >= self.hi[i] && g[i] > 0.0) {
                pg[i] = 0.0;
            }
        }
        pg
    }
}

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let (a, b) = (lo.ln(), hi.ln());
    if b <= a {
        return a;
    }
    rng.random_range(a..b)
}

/// Projected gradient ascent with Armijo backtracking, from one start.
fn ascend(
    x: &[(f64, f64)],
    y: &DVector<f64>,
    start: [f64; 4],
    bounds: &LogBounds,
    cfg: &GpConfig,
) -> Result<(KernelParams, f64)> {
    let mut pos = start;
    bounds.clamp(&mut pos);
    let mut cur = lml_with(x, y, &KernelParams::from_log(&pos, cfg.nu))?;
    let mut step = 1.0;
    for _ in 0..cfg.max_iters {
        let g = bounds.projected_gradient(&pos, &cur.gradient);
        if g.iter().fold(0.0f64, |m, v| m.max(v.abs())) <= cfg.grad_tol {
            break;
        }
        let mut accepted = false;
        while step > 1e-12 {
            let mut cand = pos;
            for i in 0..4 {
                cand[i] += step * g[i];
            }
            bounds.clamp(&mut cand);
            let moved: f64 = (0..4).map(|i| g[i] * (cand[i] - pos[i])).sum();
            if let Ok(eval) = lml_with(x, y, &KernelParams::from_log(&cand, cfg.nu)) {
                if eval.value.is_finite() && eval.value >= cur.value + 1e-4 * moved {
                    pos = cand;
                    cur = eval;
                    accepted = true;
                    step *= 2.0;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok((KernelParams::from_log(&pos, cfg.nu), cur.value))
}

/// A fitted GP with cached factorization and weights.
#[derive(Debug, Clone)]
pub struct GpModel {
    training: TrainingSet,
    inputs: Vec<(f64, f64)>,
    target_mean: f64,
    params: KernelParams,
    jitter: f64,
    chol: Cholesky<f64, Dyn>,
    weights: DVector<f64>,
    lml: f64,
}

impl GpModel {
    /// Exact inference with fixed hyperparameters.
    pub fn with_params(ts: &TrainingSet, params: KernelParams) -> Result<Self> {
        Self::with_params_and_mean(ts, params, target_mean(ts))
    }

    /// Exact inference with fixed hyperparameters and a fixed prior mean.
    pub fn with_params_and_mean(ts: &TrainingSet, params: KernelParams, target_mean: f64) -> Result<Self> {
        if ts.is_empty() {
            return Err(MocuError::InsufficientTraining { needed: 1, have: 0 });
        }
        params.validate()?;
        let inputs = inputs_of(ts);
        let y = targets_about(ts, target_mean);
        let corr = correlation_matrix(&inputs, &params);
        let f = factorize(&corr, &params)?;
        let weights = f.chol.solve(&y);
        let lml = -0.5 * y.dot(&weights) - 0.5 * log_det(&f.chol) - 0.5 * y.len() as f64 * LN_2PI;
        Ok(Self {
            training: ts.clone(),
            inputs,
            target_mean,
            params,
            jitter: f.jitter,
            chol: f.chol,
            weights,
            lml,
        })
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn training(&self) -> &TrainingSet {
        &self.training
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        self.lml
    }

    pub fn target_mean(&self) -> f64 {
        self.target_mean
    }

    /// Relative jitter that made the Gram matrix factorizable.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn predict_at(&self, theta: f64, psi: f64) -> f64 {
        let q = (theta, psi);
        let dot: f64 = self
            .inputs
            .iter()
            .zip(self.weights.iter())
            .map(|(&xi, w)| self.params.covariance(q, xi) * w)
            .sum();
        self.target_mean + dot
    }

    /// Posterior predictive variance of the latent function.
    pub fn predict_variance_at(&self, theta: f64, psi: f64) -> f64 {
        let q = (theta, psi);
        let k = DVector::from_iterator(
            self.inputs.len(),
            self.inputs.iter().map(|&xi| self.params.covariance(q, xi)),
        );
        let v = self.chol.solve(&k);
        (self.params.signal_variance - k.dot(&v)).max(0.0)
    }

    /// Surrogate cost matrix from the predictive mean at every grid cell.
    pub fn predict_mean(&self, grid: IndexGrid) -> Result<CostMatrix> {
        CostMatrix::from_fn(grid, Provenance::Surrogate, |t, p| {
            self.predict_at(t as f64, p as f64)
        })
    }
}

/// Optimizes hyperparameters over `cfg.restarts` random log-uniform starts
/// drawn from `rng` and returns the model with the best log marginal
/// likelihood.
pub fn fit<R: Rng + ?Sized>(
    ts: &TrainingSet,
    grid: IndexGrid,
    cfg: &GpConfig,
    rng: &mut R,
) -> Result<GpModel> {
    if ts.len() < 2 {
        return Err(MocuError::InsufficientTraining {
            needed: 2,
            have: ts.len(),
        });
    }
    let restarts = cfg.restarts.max(1);
    let x = inputs_of(ts);
    let (_, y) = centered_targets(ts);
    let var = y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
    let target_var = if var > 0.0 { var } else { 1.0 };
    let bounds = LogBounds::new(grid, target_var);

    let mut best: Option<(KernelParams, f64)> = None;
    let mut last_err = None;
    for _ in 0..restarts {
        // draws happen unconditionally so restart k always sees the same stream prefix
        let start = [
            log_uniform(rng, 0.01 * target_var, 10.0 * target_var),
            log_uniform(rng, 1.0, (grid.n_theta() as f64 / 2.0).max(1.0)),
            log_uniform(rng, 1.0, (grid.n_psi() as f64 / 2.0).max(1.0)),
            log_uniform(rng, 1e-8 * target_var, 1e-2 * target_var),
        ];
        match ascend(&x, &y, start, &bounds, cfg) {
            Ok((params, value)) => {
                if best.as_ref().is_none_or(|(_, b)| value > *b) {
                    best = Some((params, value));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match best {
        Some((params, _)) => GpModel::with_params(ts, params),
        None => Err(last_err.unwrap_or(MocuError::SingularKernel { jitter: JITTER_MAX })),
    }
}

/// Full-grid mean prediction of a GP fit on `ts` minus the point at
/// `omit_index` (0-based). Hyperparameters and the prior mean stay at the
/// full-set values.
pub fn refit_without(
    ts: &TrainingSet,
    omit_index: usize,
    frozen: &KernelParams,
    grid: IndexGrid,
) -> Result<CostMatrix> {
    let reduced = ts.without(omit_index)?;
    GpModel::with_params_and_mean(&reduced, *frozen, target_mean(ts))?.predict_mean(grid)
}
