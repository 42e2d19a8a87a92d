//! Discrete problem definition shared by every other module.
//!
//! Uncertainty-class members θ and actions ψ are 1-based grid indices
//! (`1..=n_theta`, `1..=n_psi`). Experiments and outcomes are 0-based
//! positions into [`ExperimentModel::experiments`] and
//! [`ExperimentModel::outcomes`].

use crate::error::{MocuError, Result};

const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct IndexGrid {
    n_theta: usize,
    n_psi: usize,
}

impl IndexGrid {
    pub fn new(n_theta: usize, n_psi: usize) -> Result<Self> {
        if n_theta == 0 || n_psi == 0 {
            return Err(MocuError::InvalidGrid { n_theta, n_psi });
        }
        Ok(Self { n_theta, n_psi })
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_psi(&self) -> usize {
        self.n_psi
    }

    pub fn len(&self) -> usize {
        self.n_theta * self.n_psi
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn check_theta(&self, theta: usize) -> Result<()> {
        if theta == 0 || theta > self.n_theta {
            return Err(MocuError::OutOfBounds {
                what: "theta",
                index: theta,
                max: self.n_theta,
            });
        }
        Ok(())
    }

    pub fn check_psi(&self, psi: usize) -> Result<()> {
        if psi == 0 || psi > self.n_psi {
            return Err(MocuError::OutOfBounds {
                what: "psi",
                index: psi,
                max: self.n_psi,
            });
        }
        Ok(())
    }

    /// All `(theta, psi)` pairs in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (1..=self.n_theta).flat_map(move |t| (1..=self.n_psi).map(move |p| (t, p)))
    }
}

/// Probability mass function over the uncertainty class.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    mass: Vec<f64>,
}

impl DiscreteDistribution {
    /// Builds a distribution from non-negative weights, normalizing them.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(MocuError::InvalidDistribution("empty support".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(MocuError::InvalidDistribution(
                "weights must be finite and non-negative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(MocuError::InvalidDistribution("zero total mass".into()));
        }
        let mass = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { mass })
    }

    pub fn uniform(grid: IndexGrid) -> Self {
        make_uniform_prior(grid)
    }

    pub fn point_mass(n_theta: usize, theta: usize) -> Result<Self> {
        if theta == 0 || theta > n_theta {
            return Err(MocuError::OutOfBounds {
                what: "theta",
                index: theta,
                max: n_theta,
            });
        }
        let mut mass = vec![0.0; n_theta];
        mass[theta - 1] = 1.0;
        Ok(Self { mass })
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Probability of the 1-based class member `theta`.
    pub fn prob(&self, theta: usize) -> f64 {
        self.mass[theta - 1]
    }

    pub fn is_normalized(&self) -> bool {
        let total: f64 = self.mass.iter().sum();
        (total - 1.0).abs() <= NORMALIZATION_TOL && self.mass.iter().all(|m| *m >= 0.0)
    }

    pub fn stats(&self) -> DistributionStats {
        distribution_stats(self)
    }
}

/// Uniform prior over the uncertainty class.
pub fn make_uniform_prior(grid: IndexGrid) -> DiscreteDistribution {
    let n = grid.n_theta();
    DiscreteDistribution {
        mass: vec![1.0 / n as f64; n],
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributionStats {
    pub mean: f64,
    pub variance: f64,
    pub map_index: usize,
}

/// Index-space moments and the MAP index (lowest index wins ties).
pub fn distribution_stats(d: &DiscreteDistribution) -> DistributionStats {
    let mut mean = 0.0;
    let mut second = 0.0;
    let mut map_index = 1;
    let mut best = f64::NEG_INFINITY;
    for (i, &p) in d.mass.iter().enumerate() {
        let idx = (i + 1) as f64;
        mean += idx * p;
        second += idx * idx * p;
        if p > best {
            best = p;
            map_index = i + 1;
        }
    }
    // second - mean^2 can round slightly below zero for point masses
    let variance = (second - mean * mean).max(0.0);
    DistributionStats {
        mean,
        variance,
        map_index,
    }
}

/// Returns `(lo, hi)`: the smallest indices whose CDF reaches `lower_q`
/// and `upper_q` respectively.
pub fn percentile_interval(d: &DiscreteDistribution, lower_q: f64, upper_q: f64) -> (usize, usize) {
    debug_assert!((0.0..=1.0).contains(&lower_q) && lower_q < upper_q && upper_q <= 1.0);
    let n = d.mass.len();
    // absorb accumulated rounding so that q = 1.0 resolves to the last supported index
    let eps = 1e-12;
    let mut lo = None;
    let mut hi = None;
    let mut cdf = 0.0;
    for (i, &p) in d.mass.iter().enumerate() {
        cdf += p;
        if lo.is_none() && cdf + eps >= lower_q {
            lo = Some(i + 1);
        }
        if hi.is_none() && cdf + eps >= upper_q {
            hi = Some(i + 1);
        }
        if lo.is_some() && hi.is_some() {
            break;
        }
    }
    let hi = hi.unwrap_or(n);
    let lo = lo.unwrap_or(hi).min(hi);
    (lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Exact,
    Surrogate,
}

/// Row-major `n_theta x n_psi` matrix of design costs.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    grid: IndexGrid,
    values: Vec<f64>,
    provenance: Provenance,
}

impl CostMatrix {
    pub fn new(grid: IndexGrid, values: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(MocuError::DimensionMismatch(format!(
                "cost matrix has {} values, grid needs {}",
                values.len(),
                grid.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(MocuError::DimensionMismatch(format!(
                "non-finite cost at row-major offset {pos}"
            )));
        }
        Ok(Self {
            grid,
            values,
            provenance,
        })
    }

    /// Tabulates `f(theta, psi)` over the whole grid.
    pub fn from_fn<F>(grid: IndexGrid, provenance: Provenance, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> f64,
    {
        let values = grid.cells().map(|(t, p)| f(t, p)).collect();
        Self::new(grid, values, provenance)
    }

    pub fn from_rows(rows: &[Vec<f64>], provenance: Provenance) -> Result<Self> {
        let n_theta = rows.len();
        let n_psi = rows.first().map_or(0, Vec::len);
        let grid = IndexGrid::new(n_theta, n_psi)?;
        if rows.iter().any(|r| r.len() != n_psi) {
            return Err(MocuError::DimensionMismatch("ragged cost rows".into()));
        }
        Self::new(grid, rows.concat(), provenance)
    }

    pub fn grid(&self) -> IndexGrid {
        self.grid
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, theta: usize, psi: usize) -> f64 {
        self.values[(theta - 1) * self.grid.n_psi() + (psi - 1)]
    }

    pub fn row(&self, theta: usize) -> &[f64] {
        let n = self.grid.n_psi();
        &self.values[(theta - 1) * n..theta * n]
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v * alpha).collect(),
            provenance: self.provenance,
        }
    }

    /// Euclidean norm of the entrywise difference.
    pub fn l2_distance(&self, other: &CostMatrix) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs_difference(&self, other: &CostMatrix) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Finite experiment set with a tabulated likelihood `rho(y | x, theta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentModel {
    experiments: Vec<usize>,
    outcomes: Vec<i64>,
    n_theta: usize,
    sigma_x: f64,
    // [x][y][theta-1]
    table: Vec<f64>,
}

impl ExperimentModel {
    /// Tabulates `likelihood(x_pos, y_pos, theta)` and validates that it is
    /// a conditional distribution over outcomes for every `(x, theta)`.
    pub fn from_fn<F>(
        experiments: Vec<usize>,
        outcomes: Vec<i64>,
        n_theta: usize,
        sigma_x: f64,
        likelihood: F,
    ) -> Result<Self>
    where
        F: Fn(usize, usize, usize) -> f64,
    {
        if experiments.is_empty() || outcomes.is_empty() || n_theta == 0 {
            return Err(MocuError::InvalidExperimentModel(
                "experiments, outcomes and n_theta must be non-empty".into(),
            ));
        }
        let n_y = outcomes.len();
        let mut table = Vec::with_capacity(experiments.len() * n_y * n_theta);
        for x in 0..experiments.len() {
            for y in 0..n_y {
                for theta in 1..=n_theta {
                    table.push(likelihood(x, y, theta));
                }
            }
        }
        let model = Self {
            experiments,
            outcomes,
            n_theta,
            sigma_x,
            table,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        for x in 0..self.n_experiments() {
            for theta in 1..=self.n_theta {
                let mut total = 0.0;
                for y in 0..self.n_outcomes() {
                    let l = self.likelihood(x, y, theta);
                    if !(0.0..=1.0).contains(&l) {
                        return Err(MocuError::InvalidExperimentModel(format!(
                            "likelihood({x}, {y}, {theta}) = {l} outside [0, 1]"
                        )));
                    }
                    total += l;
                }
                if (total - 1.0).abs() > NORMALIZATION_TOL {
                    return Err(MocuError::InvalidExperimentModel(format!(
                        "outcome probabilities for x={x}, theta={theta} sum to {total}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn experiments(&self) -> &[usize] {
        &self.experiments
    }

    pub fn outcomes(&self) -> &[i64] {
        &self.outcomes
    }

    pub fn n_experiments(&self) -> usize {
        self.experiments.len()
    }

    pub fn n_outcomes(&self) -> usize {
        self.outcomes.len()
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn sigma_x(&self) -> f64 {
        self.sigma_x
    }

    pub fn likelihood(&self, x: usize, y: usize, theta: usize) -> f64 {
        self.table[(x * self.outcomes.len() + y) * self.n_theta + (theta - 1)]
    }

    /// Likelihood of outcome `y` for experiment `x` across all class members.
    pub fn likelihood_row(&self, x: usize, y: usize) -> &[f64] {
        let start = (x * self.outcomes.len() + y) * self.n_theta;
        &self.table[start..start + self.n_theta]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Fidelity {
    Coarse,
    Fine,
}

impl Fidelity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Fidelity::Coarse => "coarse",
            Fidelity::Fine => "fine",
        }
    }
}

/// Evaluates the design cost at a grid cell for a requested fidelity.
pub trait CostOracle {
    fn cost(&self, theta: usize, psi: usize, fidelity: Fidelity) -> Result<f64>;
}

impl<F> CostOracle for F
where
    F: Fn(usize, usize, Fidelity) -> Result<f64>,
{
    fn cost(&self, theta: usize, psi: usize, fidelity: Fidelity) -> Result<f64> {
        self(theta, psi, fidelity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingPoint {
    pub theta: usize,
    pub psi: usize,
    pub cost: f64,
    pub fidelity: Fidelity,
}

/// Sampled cost evaluations feeding the surrogate.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingSet {
    points: Vec<TrainingPoint>,
}

impl TrainingSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_points(grid: IndexGrid, points: Vec<TrainingPoint>) -> Result<Self> {
        let mut ts = Self::new();
        for p in points {
            ts.push(grid, p)?;
        }
        Ok(ts)
    }

    pub fn push(&mut self, grid: IndexGrid, point: TrainingPoint) -> Result<()> {
        grid.check_theta(point.theta)?;
        grid.check_psi(point.psi)?;
        if !point.cost.is_finite() {
            return Err(MocuError::DimensionMismatch(format!(
                "non-finite training cost at ({}, {})",
                point.theta, point.psi
            )));
        }
        self.points.push(point);
        Ok(())
    }

    pub fn points(&self) -> &[TrainingPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains_location(&self, theta: usize, psi: usize) -> bool {
        self.points.iter().any(|p| p.theta == theta && p.psi == psi)
    }

    /// Copy of the set with the point at `index` removed.
    pub fn without(&self, index: usize) -> Result<Self> {
        if index >= self.points.len() {
            return Err(MocuError::OutOfBounds {
                what: "training index",
                index,
                max: self.points.len().saturating_sub(1),
            });
        }
        let mut points = self.points.clone();
        points.remove(index);
        Ok(Self { points })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> IndexGrid {
        IndexGrid::new(n, 1).unwrap()
    }

    #[test]
    fn uniform_prior_values() {
        assert_eq!(make_uniform_prior(grid(4)).mass(), &[0.25; 4]);
        assert_eq!(make_uniform_prior(grid(1)).mass(), &[1.0]);
        let d = make_uniform_prior(grid(64));
        assert!(d.mass().iter().all(|&m| m == 1.0 / 64.0));
        assert!(d.is_normalized());
    }

    #[test]
    fn zero_sized_grid_rejected() {
        assert!(IndexGrid::new(0, 3).is_err());
        assert!(IndexGrid::new(3, 0).is_err());
    }

    #[test]
    fn stats_of_uniform_four() {
        let s = distribution_stats(&make_uniform_prior(grid(4)));
        // direct summation: mean = (1+2+3+4)/4, E[i^2] = 30/4
        assert!((s.mean - 2.5).abs() < 1e-15);
        assert!((s.variance - (7.5 - 6.25)).abs() < 1e-15);
        assert_eq!(s.map_index, 1);
    }

    #[test]
    fn stats_of_point_mass_and_pair() {
        let s = distribution_stats(&DiscreteDistribution::point_mass(64, 16).unwrap());
        assert_eq!((s.mean, s.variance, s.map_index), (16.0, 0.0, 16));

        let d = DiscreteDistribution::from_weights(vec![0.5, 0.5]).unwrap();
        let s = distribution_stats(&d);
        assert_eq!((s.mean, s.variance, s.map_index), (1.5, 0.25, 1));
    }

    #[test]
    fn percentile_examples() {
        let u = make_uniform_prior(grid(64));
        // CDF(i) = i/64: first i with i/64 >= 0.16 is 11 (10.24), >= 0.84 is 54 (53.76)
        assert_eq!(percentile_interval(&u, 0.16, 0.84), (11, 54));
        let delta = DiscreteDistribution::point_mass(64, 16).unwrap();
        assert_eq!(percentile_interval(&delta, 0.16, 0.84), (16, 16));
        assert_eq!(percentile_interval(&make_uniform_prior(grid(4)), 0.0, 1.0), (1, 4));
    }

    #[test]
    fn percentile_upper_one_stops_at_last_supported_index() {
        let d = DiscreteDistribution::from_weights(vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(percentile_interval(&d, 0.0, 1.0), (1, 3));
        assert_eq!(percentile_interval(&d, 0.5, 1.0), (2, 3));
    }

    #[test]
    fn from_weights_rejects_bad_input() {
        assert!(DiscreteDistribution::from_weights(vec![]).is_err());
        assert!(DiscreteDistribution::from_weights(vec![0.0, 0.0]).is_err());
        assert!(DiscreteDistribution::from_weights(vec![-1.0, 2.0]).is_err());
        assert!(DiscreteDistribution::from_weights(vec![f64::NAN]).is_err());
    }

    #[test]
    fn experiment_model_rejects_unnormalized_likelihood() {
        let err = ExperimentModel::from_fn(vec![1], vec![0, 1], 3, 1.0, |_, _, _| 0.4);
        assert!(matches!(err, Err(MocuError::InvalidExperimentModel(_))));
        let err = ExperimentModel::from_fn(vec![1], vec![0], 3, 1.0, |_, _, _| 1.5);
        assert!(err.is_err());
    }

    #[test]
    fn training_set_bounds_and_without() {
        let g = IndexGrid::new(4, 4).unwrap();
        let mut ts = TrainingSet::new();
        let p = |t, s| TrainingPoint {
            theta: t,
            psi: s,
            cost: 1.0,
            fidelity: Fidelity::Fine,
        };
        assert!(ts.push(g, p(5, 1)).is_err());
        assert!(ts.push(g, p(1, 0)).is_err());
        ts.push(g, p(1, 1)).unwrap();
        ts.push(g, p(2, 3)).unwrap();
        assert!(ts.contains_location(2, 3));
        assert_eq!(ts.without(0).unwrap().points()[0].theta, 2);
        assert!(ts.without(2).is_err());
    }

    #[test]
    fn cost_matrix_accessors() {
        let j = CostMatrix::from_rows(&[vec![0.0, 1.0], vec![2.0, 3.0]], Provenance::Exact).unwrap();
        assert_eq!(j.get(2, 1), 2.0);
        assert_eq!(j.row(1), &[0.0, 1.0]);
        assert!(CostMatrix::from_rows(&[vec![f64::INFINITY]], Provenance::Exact).is_err());
    }
}
