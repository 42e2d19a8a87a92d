//! Mean objective cost of uncertainty: θ-specific and robust policies,
//! expected-MOCU experiment selection and Bayesian posterior updates.

use rand::Rng;

use crate::error::{MocuError, Result};
use crate::problem::{CostMatrix, DiscreteDistribution, ExperimentModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyResult {
    pub psi_index: usize,
    pub expected_cost: f64,
}

/// Outcome-averaged MOCU of one candidate experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentChoice {
    /// 0-based position in the experiment model.
    pub x_index: usize,
    pub expected_mocu: f64,
    /// Indexed by 0-based outcome position.
    pub outcome_probabilities: Vec<f64>,
    /// `None` for outcomes with zero probability.
    pub per_outcome_posteriors: Vec<Option<DiscreteDistribution>>,
}

fn argmin_lowest(values: impl Iterator<Item = f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, v) in values.enumerate() {
        if v < best.1 {
            best = (i, v);
        }
    }
    best
}

/// Cost matrix together with its per-θ optimal policies.
#[derive(Debug, Clone)]
pub struct PolicyTable {
    costs: CostMatrix,
    theta_policies: Vec<usize>,
    row_min: Vec<f64>,
}

impl PolicyTable {
    pub fn new(costs: CostMatrix) -> Self {
        let grid = costs.grid();
        let (theta_policies, row_min) = (1..=grid.n_theta())
            .map(|t| {
                let (i, v) = argmin_lowest(costs.row(t).iter().copied());
                (i + 1, v)
            })
            .unzip();
        Self {
            costs,
            theta_policies,
            row_min,
        }
    }

    pub fn costs(&self) -> &CostMatrix {
        &self.costs
    }

    pub fn theta_policies(&self) -> &[usize] {
        &self.theta_policies
    }

    fn check_distribution(&self, d: &DiscreteDistribution) -> Result<()> {
        if d.len() != self.costs.grid().n_theta() {
            return Err(MocuError::DimensionMismatch(format!(
                "distribution over {} members, cost matrix has {} rows",
                d.len(),
                self.costs.grid().n_theta()
            )));
        }
        Ok(())
    }

    fn check_model(&self, em: &ExperimentModel) -> Result<()> {
        if em.n_theta() != self.costs.grid().n_theta() {
            return Err(MocuError::DimensionMismatch(format!(
                "experiment model over {} members, cost matrix has {} rows",
                em.n_theta(),
                self.costs.grid().n_theta()
            )));
        }
        Ok(())
    }

    pub fn robust_policy(&self, d: &DiscreteDistribution) -> Result<PolicyResult> {
        self.check_distribution(d)?;
        Ok(self.robust_unchecked(d.mass()))
    }

    fn robust_unchecked(&self, mass: &[f64]) -> PolicyResult {
        let n_psi = self.costs.grid().n_psi();
        let mut expected = vec![0.0; n_psi];
        for (t, &w) in mass.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (e, c) in expected.iter_mut().zip(self.costs.row(t + 1)) {
                *e += w * c;
            }
        }
        let (i, v) = argmin_lowest(expected.into_iter());
        PolicyResult {
            psi_index: i + 1,
            expected_cost: v,
        }
    }

    pub fn mocu(&self, d: &DiscreteDistribution) -> Result<f64> {
        self.check_distribution(d)?;
        Ok(self.mocu_unchecked(d.mass()))
    }

    fn mocu_unchecked(&self, mass: &[f64]) -> f64 {
        let psi = self.robust_unchecked(mass).psi_index;
        mass.iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(t, w)| w * (self.costs.get(t + 1, psi) - self.row_min[t]))
            .sum()
    }

    pub fn expected_mocu_of_experiment(
        &self,
        d: &DiscreteDistribution,
        em: &ExperimentModel,
        x: usize,
    ) -> Result<ExperimentChoice> {
        self.check_distribution(d)?;
        self.check_model(em)?;
        if x >= em.n_experiments() {
            return Err(MocuError::OutOfBounds {
                what: "experiment",
                index: x,
                max: em.n_experiments().saturating_sub(1),
            });
        }
        let n_y = em.n_outcomes();
        let mut outcome_probabilities = Vec::with_capacity(n_y);
        let mut per_outcome_posteriors = Vec::with_capacity(n_y);
        let mut expected_mocu = 0.0;
        for y in 0..n_y {
            let weights: Vec<f64> = em
                .likelihood_row(x, y)
                .iter()
                .zip(d.mass())
                .map(|(l, p)| l * p)
                .collect();
            let evidence: f64 = weights.iter().sum();
            outcome_probabilities.push(evidence);
            if evidence > 0.0 {
                let post = DiscreteDistribution::from_weights(weights)?;
                expected_mocu += evidence * self.mocu_unchecked(post.mass());
                per_outcome_posteriors.push(Some(post));
            } else {
                per_outcome_posteriors.push(None);
            }
        }
        Ok(ExperimentChoice {
            x_index: x,
            expected_mocu,
            outcome_probabilities,
            per_outcome_posteriors,
        })
    }

    pub fn select_experiment(
        &self,
        d: &DiscreteDistribution,
        em: &ExperimentModel,
    ) -> Result<ExperimentChoice> {
        let mut best: Option<ExperimentChoice> = None;
        for x in 0..em.n_experiments() {
            let choice = self.expected_mocu_of_experiment(d, em, x)?;
            if best
                .as_ref()
                .is_none_or(|b| choice.expected_mocu < b.expected_mocu)
            {
                best = Some(choice);
            }
        }
        best.ok_or_else(|| MocuError::InvalidExperimentModel("no experiments".into()))
    }
}

/// Row-wise argmin of `J`, lowest ψ on ties.
pub fn theta_specific_policies(j: &CostMatrix) -> Vec<usize> {
    PolicyTable::new(j.clone()).theta_policies
}

pub fn robust_policy(j: &CostMatrix, d: &DiscreteDistribution) -> Result<PolicyResult> {
    PolicyTable::new(j.clone()).robust_policy(d)
}

pub fn mocu(j: &CostMatrix, d: &DiscreteDistribution) -> Result<f64> {
    PolicyTable::new(j.clone()).mocu(d)
}

pub fn expected_mocu_of_experiment(
    j: &CostMatrix,
    d: &DiscreteDistribution,
    em: &ExperimentModel,
    x: usize,
) -> Result<ExperimentChoice> {
    PolicyTable::new(j.clone()).expected_mocu_of_experiment(d, em, x)
}

pub fn select_experiment(
    j: &CostMatrix,
    d: &DiscreteDistribution,
    em: &ExperimentModel,
) -> Result<ExperimentChoice> {
    PolicyTable::new(j.clone()).select_experiment(d, em)
}

/// Bayes rule for the observed outcome `y` of experiment `x`.
pub fn posterior_update(
    d: &DiscreteDistribution,
    em: &ExperimentModel,
    x: usize,
    y: usize,
) -> Result<DiscreteDistribution> {
    if d.len() != em.n_theta() {
        return Err(MocuError::DimensionMismatch(format!(
            "distribution over {} members, experiment model over {}",
            d.len(),
            em.n_theta()
        )));
    }
    if x >= em.n_experiments() || y >= em.n_outcomes() {
        return Err(MocuError::OutOfBounds {
            what: if x >= em.n_experiments() {
                "experiment"
            } else {
                "outcome"
            },
            index: if x >= em.n_experiments() { x } else { y },
            max: if x >= em.n_experiments() {
                em.n_experiments() - 1
            } else {
                em.n_outcomes() - 1
            },
        });
    }
    let weights: Vec<f64> = em
        .likelihood_row(x, y)
        .iter()
        .zip(d.mass())
        .map(|(l, p)| l * p)
        .collect();
    if weights.iter().sum::<f64>() <= 0.0 {
        return Err(MocuError::ImpossibleOutcome { x, y });
    }
    DiscreteDistribution::from_weights(weights)
}

/// Draws an outcome of experiment `x` when the truth is `theta_true`.
pub fn simulate_outcome<R: Rng + ?Sized>(
    em: &ExperimentModel,
    x: usize,
    theta_true: usize,
    rng: &mut R,
) -> usize {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    let mut last_possible = 0;
    for y in 0..em.n_outcomes() {
        let l = em.likelihood(x, y, theta_true);
        if l > 0.0 {
            last_possible = y;
        }
        cum += l;
        if u < cum {
            return y;
        }
    }
    last_possible
}

/// Posterior carried between steps of a sequential campaign.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignState {
    pub posterior: DiscreteDistribution,
    /// Number of experiments performed so far.
    pub step: usize,
}

impl CampaignState {
    pub fn new(prior: DiscreteDistribution) -> Self {
        Self {
            posterior: prior,
            step: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// 1-based experiment counter.
    pub step: usize,
    pub x_index: usize,
    pub y_index: usize,
    pub psi_selected: usize,
    pub true_cost: f64,
    pub posterior_variance: f64,
    pub map_theta: usize,
}

/// One select / observe / update iteration.
///
/// `true_cost(psi)` scores the robust policy against the ground truth.
pub fn run_mocu_step<R, F>(
    state: &CampaignState,
    table: &PolicyTable,
    em: &ExperimentModel,
    theta_true: usize,
    true_cost: F,
    rng: &mut R,
) -> Result<(CampaignState, StepRecord)>
where
    R: Rng + ?Sized,
    F: Fn(usize) -> f64,
{
    let choice = table.select_experiment(&state.posterior, em)?;
    let x = choice.x_index;
    let y = simulate_outcome(em, x, theta_true, rng);
    let posterior = match choice.per_outcome_posteriors.get(y).cloned().flatten() {
        Some(p) => p,
        None => posterior_update(&state.posterior, em, x, y)?,
    };
    let policy = table.robust_policy(&posterior)?;
    let stats = posterior.stats();
    let record = StepRecord {
        step: state.step + 1,
        x_index: x,
        y_index: y,
        psi_selected: policy.psi_index,
        true_cost: true_cost(policy.psi_index),
        posterior_variance: stats.variance,
        map_theta: stats.map_index,
    };
    Ok((
        CampaignState {
            posterior,
            step: state.step + 1,
        },
        record,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::Provenance;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn swap_matrix() -> CostMatrix {
        CostMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]], Provenance::Exact).unwrap()
    }

    fn dist(w: &[f64]) -> DiscreteDistribution {
        DiscreteDistribution::from_weights(w.to_vec()).unwrap()
    }

    /// x0 perfectly informative, x1 uninformative, over two class members.
    fn two_experiments() -> ExperimentModel {
        ExperimentModel::from_fn(vec![1, 2], vec![0, 1], 2, 0.0, |x, y, t| match x {
            0 => {
                if (y == 1) == (t == 1) {
                    1.0
                } else {
                    0.0
                }
            }
            _ => 0.5,
        })
        .unwrap()
    }

    #[test]
    fn theta_policies_rowwise_argmin() {
        assert_eq!(theta_specific_policies(&swap_matrix()), vec![1, 2]);
        let c = CostMatrix::from_rows(&[vec![2.0; 3], vec![2.0; 3]], Provenance::Exact).unwrap();
        assert_eq!(theta_specific_policies(&c), vec![1, 1]);
    }

    #[test]
    fn robust_policy_examples() {
        let j = swap_matrix();
        let r = robust_policy(&j, &dist(&[0.5, 0.5])).unwrap();
        assert_eq!((r.psi_index, r.expected_cost), (1, 0.5));
        let r = robust_policy(&j, &dist(&[0.9, 0.1])).unwrap();
        assert_eq!(r.psi_index, 1);
        assert!((r.expected_cost - 0.1).abs() < 1e-15);
        let r = robust_policy(&j, &DiscreteDistribution::point_mass(2, 2).unwrap()).unwrap();
        assert_eq!(r.psi_index, 2);
    }

    #[test]
    fn robust_policy_dimension_mismatch() {
        assert!(matches!(
            robust_policy(&swap_matrix(), &dist(&[1.0, 1.0, 1.0])),
            Err(MocuError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn mocu_examples() {
        let j = swap_matrix();
        assert_eq!(mocu(&j, &dist(&[0.5, 0.5])).unwrap(), 0.5);
        assert_eq!(mocu(&j, &DiscreteDistribution::point_mass(2, 1).unwrap()).unwrap(), 0.0);
        let c = CostMatrix::from_rows(&[vec![3.0; 2], vec![3.0; 2]], Provenance::Exact).unwrap();
        assert_eq!(mocu(&c, &dist(&[0.3, 0.7])).unwrap(), 0.0);
    }

    #[test]
    fn posterior_update_hand_bayes() {
        let em = ExperimentModel::from_fn(vec![2], vec![0, 1], 4, 1.0, |_, y, t| {
            let l1 = (-((2.0 - t as f64).powi(2)) / 2.0).exp();
            if y == 1 {
                l1
            } else {
                1.0 - l1
            }
        })
        .unwrap();
        let post = posterior_update(&dist(&[1.0; 4]), &em, 0, 1).unwrap();
        let expected = [0.2583, 0.4258, 0.2583, 0.0576];
        for (a, b) in post.mass().iter().zip(expected) {
            assert!((a - b).abs() < 1e-3, "{a} vs {b}");
        }
        assert!(post.is_normalized());
    }

    #[test]
    fn uninformative_and_absorbing_updates() {
        let em = two_experiments();
        let prior = dist(&[0.3, 0.7]);
        assert_eq!(posterior_update(&prior, &em, 1, 0).unwrap(), prior);
        let delta = DiscreteDistribution::point_mass(2, 2).unwrap();
        assert_eq!(posterior_update(&delta, &em, 1, 1).unwrap(), delta);
    }

    #[test]
    fn impossible_outcome_errors() {
        let em = two_experiments();
        let delta = DiscreteDistribution::point_mass(2, 1).unwrap();
        // theta=1 always yields y=1 under x0
        assert_eq!(
            posterior_update(&delta, &em, 0, 0),
            Err(MocuError::ImpossibleOutcome { x: 0, y: 0 })
        );
    }

    #[test]
    fn expected_mocu_examples() {
        let j = swap_matrix();
        let em = two_experiments();
        let u = dist(&[0.5, 0.5]);
        let informative = expected_mocu_of_experiment(&j, &u, &em, 0).unwrap();
        assert_eq!(informative.expected_mocu, 0.0);
        assert_eq!(informative.outcome_probabilities, vec![0.5, 0.5]);
        let flat = expected_mocu_of_experiment(&j, &u, &em, 1).unwrap();
        assert_eq!(flat.expected_mocu, 0.5);
        let delta = DiscreteDistribution::point_mass(2, 1).unwrap();
        for x in 0..2 {
            let c = expected_mocu_of_experiment(&j, &delta, &em, x).unwrap();
            assert_eq!(c.expected_mocu, 0.0);
            // the impossible outcome carries no posterior
            if x == 0 {
                assert!(c.per_outcome_posteriors[0].is_none());
            }
        }
    }

    #[test]
    fn select_experiment_examples() {
        let j = swap_matrix();
        let u = dist(&[0.5, 0.5]);
        assert_eq!(select_experiment(&j, &u, &two_experiments()).unwrap().x_index, 0);

        let flat = ExperimentModel::from_fn(vec![1, 2, 3], vec![0, 1], 2, 0.0, |_, _, _| 0.5).unwrap();
        assert_eq!(select_experiment(&j, &u, &flat).unwrap().x_index, 0);

        let single = ExperimentModel::from_fn(vec![7], vec![0, 1], 2, 0.0, |_, _, _| 0.5).unwrap();
        assert_eq!(select_experiment(&j, &u, &single).unwrap().x_index, 0);
    }

    #[test]
    fn deterministic_likelihood_forces_outcome() {
        let table = PolicyTable::new(swap_matrix());
        let em = two_experiments();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let state = CampaignState::new(dist(&[0.5, 0.5]));
            run_mocu_step(&state, &table, &em, 2, |psi| table.costs().get(2, psi), &mut rng).unwrap()
        };
        let (s1, r1) = run(1);
        let (s2, r2) = run(99);
        assert_eq!(r1, r2);
        assert_eq!(s1, s2);
        assert_eq!(r1.y_index, 0);
        assert_eq!(r1.map_theta, 2);
        assert_eq!(r1.true_cost, 0.0);
        assert_eq!(s1.step, 1);
    }
}
