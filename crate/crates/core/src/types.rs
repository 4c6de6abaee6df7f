//! Domain types for a single task: state space, objective, beliefs.

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::num::{rat_one, Rat};
use crate::partition::KnowledgePartition;

/// A task's finite state space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpace {
    pub task_id: usize,
    labels: Vec<String>,
}

impl StateSpace {
    pub fn new(task_id: usize, labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidDistribution("state space must be non-empty".into()));
        }
        let mut seen = labels.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != labels.len() {
            return Err(Error::InvalidPartition("state labels must be unique".into()));
        }
        Ok(Self { task_id, labels })
    }

    /// Space with labels `s0..s{size-1}`.
    pub fn indexed(task_id: usize, size: usize) -> Result<Self> {
        Self::new(task_id, (0..size).map(|i| format!("s{i}")).collect())
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// Bounded objective values, one per state, each in [0, 1].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Objective {
    values: Vec<Rat>,
}

impl Objective {
    pub fn new(values: Vec<Rat>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidDistribution("objective must be non-empty".into()));
        }
        for v in &values {
            if v < &Rat::zero() || v > &rat_one() {
                return Err(Error::ParameterOutOfRange(format!(
                    "objective value {v} outside [0,1]"
                )));
            }
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, state: usize) -> &Rat {
        &self.values[state]
    }

    pub fn values(&self) -> &[Rat] {
        &self.values
    }
}

/// An exact probability distribution over a task's states.
///
/// Masses are non-negative rationals summing to exactly one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeliefDistribution {
    mass: Vec<Rat>,
}

impl BeliefDistribution {
    pub fn new(mass: Vec<Rat>) -> Result<Self> {
        if mass.is_empty() {
            return Err(Error::InvalidDistribution("empty distribution".into()));
        }
        let mut total = Rat::zero();
        for m in &mass {
            if m < &Rat::zero() {
                return Err(Error::InvalidDistribution(format!("negative mass {m}")));
            }
            total += m;
        }
        if !total.is_one() {
            return Err(Error::InvalidDistribution(format!(
                "masses sum to {total}, expected 1"
            )));
        }
        Ok(Self { mass })
    }

    /// Normalizes non-negative weights into a distribution.
    pub fn from_weights(weights: Vec<Rat>) -> Result<Self> {
        let total: Rat = weights.iter().cloned().sum();
        if total <= Rat::zero() {
            return Err(Error::InvalidDistribution("weights sum to zero".into()));
        }
        Self::new(weights.into_iter().map(|w| w / total.clone()).collect())
    }

    pub fn uniform(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidDistribution("empty distribution".into()));
        }
        let m = Rat::new(1.into(), (size as i64).into());
        Self::new(vec![m; size])
    }

    /// Point mass on one state.
    pub fn point(size: usize, state: usize) -> Result<Self> {
        let mut mass = vec![Rat::zero(); size];
        mass[state] = rat_one();
        Self::new(mass)
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn mass(&self, state: usize) -> &Rat {
        &self.mass[state]
    }

    pub fn masses(&self) -> &[Rat] {
        &self.mass
    }

    pub fn cell_mass(&self, cell: &[usize]) -> Rat {
        cell.iter().map(|&s| self.mass[s].clone()).sum()
    }

    pub fn is_full_support(&self) -> bool {
        self.mass.iter().all(|m| m > &Rat::zero())
    }

    /// Precomputed cumulative sampler for bulk Monte-Carlo draws.
    pub fn sampler(&self) -> StateSampler {
        let mut cdf = Vec::with_capacity(self.len());
        let mut acc = 0.0f64;
        for m in &self.mass {
            acc += num_traits::ToPrimitive::to_f64(m).unwrap_or(0.0);
            cdf.push(acc);
        }
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        StateSampler { cdf }
    }

    /// Conditional distribution given a cell, or `ZeroMassCell`.
    pub fn condition_on(&self, cell: &[usize]) -> Result<BeliefDistribution> {
        let total = self.cell_mass(cell);
        if total <= Rat::zero() {
            return Err(Error::ZeroMassCell);
        }
        let mut mass = vec![Rat::zero(); self.len()];
        for &s in cell {
            mass[s] = self.mass[s].clone() / total.clone();
        }
        BeliefDistribution::new(mass)
    }
}

/// Cumulative-distribution sampler over state indices; draws cost one
/// uniform variate and a binary search.
#[derive(Debug, Clone)]
pub struct StateSampler {
    cdf: Vec<f64>,
}

impl StateSampler {
    pub fn draw<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }
}

/// One task: state space, objective, per-agent priors, tolerances.
#[derive(Debug, Clone)]
pub struct TaskSpec {
    pub space: StateSpace,
    pub objective: Objective,
    pub priors: Vec<BeliefDistribution>,
    pub epsilon: Rat,
    pub delta: Rat,
}

impl TaskSpec {
    pub fn new(
        space: StateSpace,
        objective: Objective,
        priors: Vec<BeliefDistribution>,
        epsilon: Rat,
        delta: Rat,
    ) -> Result<Self> {
        let d = space.size();
        if objective.len() != d {
            return Err(Error::DimensionMismatch { left: objective.len(), right: d });
        }
        if priors.is_empty() {
            return Err(Error::ConfigInvalid("task needs at least one prior".into()));
        }
        for p in &priors {
            if p.len() != d {
                return Err(Error::DimensionMismatch { left: p.len(), right: d });
            }
        }
        for (name, v) in [("epsilon", &epsilon), ("delta", &delta)] {
            if v <= &Rat::zero() || v >= &rat_one() {
                return Err(Error::ParameterOutOfRange(format!("{name} = {v} not in (0,1)")));
            }
        }
        Ok(Self { space, objective, priors, epsilon, delta })
    }

    pub fn num_agents(&self) -> usize {
        self.priors.len()
    }

    pub fn num_states(&self) -> usize {
        self.space.size()
    }
}

/// All agents' cell-conditional posterior beliefs at some round.
///
/// For each agent, one optional distribution per partition cell, aligned
/// with the cell order of that agent's partition. `None` marks a zero-mass
/// cell whose conditional is undefined; such cells contribute no
/// constraints anywhere.
#[derive(Debug, Clone)]
pub struct TypeProfile {
    pub cell_posteriors: Vec<Vec<Option<BeliefDistribution>>>,
}

impl TypeProfile {
    /// Induces the profile from per-agent priors by exact conditioning.
    pub fn from_priors(
        partitions: &[KnowledgePartition],
        priors: &[BeliefDistribution],
    ) -> Result<Self> {
        if partitions.len() != priors.len() {
            return Err(Error::DimensionMismatch { left: partitions.len(), right: priors.len() });
        }
        let mut cell_posteriors = Vec::with_capacity(priors.len());
        for (part, prior) in partitions.iter().zip(priors) {
            let mut per_cell = Vec::with_capacity(part.num_cells());
            for cell in part.cells() {
                if prior.cell_mass(cell) > Rat::zero() {
                    per_cell.push(Some(prior.condition_on(cell)?));
                } else {
                    per_cell.push(None);
                }
            }
            cell_posteriors.push(per_cell);
        }
        Ok(Self { cell_posteriors })
    }

    /// Checks each posterior's support lies inside its cell and sums to 1.
    pub fn validate(&self, partitions: &[KnowledgePartition]) -> Result<()> {
        if partitions.len() != self.cell_posteriors.len() {
            return Err(Error::DimensionMismatch {
                left: partitions.len(),
                right: self.cell_posteriors.len(),
            });
        }
        for (agent, (part, cells)) in partitions.iter().zip(&self.cell_posteriors).enumerate() {
            if part.num_cells() != cells.len() {
                return Err(Error::MalformedPosterior(format!(
                    "agent {agent}: {} posteriors for {} cells",
                    cells.len(),
                    part.num_cells()
                )));
            }
            for (k, post) in cells.iter().enumerate() {
                let Some(post) = post else { continue };
                let cell = &part.cells()[k];
                for (s, m) in post.masses().iter().enumerate() {
                    if m > &Rat::zero() && !cell.contains(&s) {
                        return Err(Error::MalformedPosterior(format!(
                            "agent {agent} cell {k}: mass on state s{s} outside the cell"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::rat;

    #[test]
    fn distribution_must_sum_to_one() {
        assert!(BeliefDistribution::new(vec![rat(1, 2), rat(1, 2)]).is_ok());
        assert!(BeliefDistribution::new(vec![rat(1, 2), rat(1, 3)]).is_err());
        assert!(BeliefDistribution::new(vec![rat(3, 2), rat(-1, 2)]).is_err());
    }

    #[test]
    fn conditioning_zero_mass_cell_fails() {
        let p = BeliefDistribution::new(vec![rat_one(), rat(0, 1)]).unwrap();
        assert!(matches!(p.condition_on(&[1]), Err(Error::ZeroMassCell)));
        let cond = p.condition_on(&[0, 1]).unwrap();
        assert_eq!(cond, p);
    }

    #[test]
    fn objective_rejects_out_of_range() {
        assert!(Objective::new(vec![rat(3, 2)]).is_err());
        assert!(Objective::new(vec![rat(0, 1), rat_one()]).is_ok());
    }

    #[test]
    fn state_space_labels_unique() {
        assert!(StateSpace::new(0, vec!["a".into(), "a".into()]).is_err());
        let sp = StateSpace::indexed(3, 4).unwrap();
        assert_eq!(sp.size(), 4);
        assert_eq!(sp.labels()[2], "s2");
    }

    #[test]
    fn task_spec_validates_tolerances() {
        let space = StateSpace::indexed(0, 2).unwrap();
        let f = Objective::new(vec![rat(0, 1), rat_one()]).unwrap();
        let p = BeliefDistribution::uniform(2).unwrap();
        assert!(TaskSpec::new(space.clone(), f.clone(), vec![p.clone()], rat(1, 10), rat(1, 1))
            .is_err());
        assert!(TaskSpec::new(space, f, vec![p], rat(1, 10), rat(1, 10)).is_ok());
    }
}
