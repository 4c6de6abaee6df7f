//! Offline sampling trees: precomputed unconditional draws that let a
//! bounded agent approximate conditional expectations by reweighting the
//! subtree consistent with the observed messages.

use num_traits::ToPrimitive;
use rand::Rng;

use crate::error::{Error, Result};
use crate::num::{round_to_grid, to_f64, Rat};
use crate::protocol::ChannelSpec;
use crate::types::TaskSpec;

use super::cost::{AgentClass, CostLedger};

/// One tree level: node states and their objective values, in level order.
/// Node `i` at level `l+1` has parent `i / branching` at level `l`.
#[derive(Debug, Clone)]
struct Level {
    states: Vec<usize>,
    values: Vec<f64>,
}

/// Sampling tree of height `R`: level `l` holds `B^l` i.i.d. draws from the
/// unconditional prior of the agent active at message `l`.
#[derive(Debug, Clone)]
pub struct SamplingTree {
    branching: u64,
    height: u32,
    active_agents: Vec<usize>,
    levels: Vec<Level>,
}

/// Closed-form node count `B + B^2 + ... + B^R`.
pub fn sampling_tree_node_count(branching: u64, height: u32) -> u128 {
    let b = branching as u128;
    let mut total = 0u128;
    let mut level = b;
    for _ in 0..height {
        total += level;
        level = level.saturating_mul(b);
    }
    total
}

impl SamplingTree {
    pub fn branching(&self) -> u64 {
        self.branching
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn active_agents(&self) -> &[usize] {
        &self.active_agents
    }

    pub fn node_count(&self) -> u128 {
        self.levels.iter().map(|l| l.states.len() as u128).sum()
    }

    /// Weighted mean of the objective over level `h+1` nodes passing `keep`,
    /// where `weights` came from [`Self::history_weights`] at depth `h`.
    pub fn filtered_expectation(
        &self,
        depth: usize,
        weights: &[f64],
        keep: impl Fn(usize) -> bool,
    ) -> Option<f64> {
        let level = self.levels.get(depth)?;
        let b = self.branching as usize;
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for (i, (&s, &v)) in level.states.iter().zip(&level.values).enumerate() {
            if !keep(s) {
                continue;
            }
            let w = if depth == 0 { 1.0 } else { weights[i / b] };
            num += w * v;
            den += w;
        }
        (den > 0.0).then_some(num / den)
    }

    pub fn level_states(&self, depth: usize) -> &[usize] {
        &self.levels[depth].states
    }
}

fn grid_index(value: &Rat, bits: u32) -> Result<i64> {
    let scaled = value.clone() * crate::num::pow2(bits);
    if !scaled.is_integer() {
        return Err(Error::InvalidChannel(format!(
            "payload {value} is not a multiple of 2^-{bits}"
        )));
    }
    scaled
        .to_integer()
        .to_i64()
        .ok_or_else(|| Error::InstanceTooLarge("grid index overflow".into()))
}

fn grid_index_of_rounded(value: &Rat, bits: u32) -> i64 {
    let rounded = round_to_grid(value, bits);
    (rounded * crate::num::pow2(bits))
        .to_integer()
        .to_i64()
        .expect("grid index fits i64")
}

/// Per-message integer encodings of the objective values, used to weigh
/// observed messages against the encoding a node's state predicts.
pub struct GridEncoder {
    by_state: Vec<i64>,
    bits: u32,
}

impl GridEncoder {
    pub fn new(task: &TaskSpec, bits: u32) -> Self {
        let by_state = task
            .objective
            .values()
            .iter()
            .map(|v| grid_index_of_rounded(v, bits))
            .collect();
        Self { by_state, bits }
    }

    pub fn message_index(&self, message: &Rat) -> Result<i64> {
        grid_index(message, self.bits)
    }

    pub fn state_index(&self, state: usize) -> i64 {
        self.by_state[state]
    }
}

/// Builds an agent's sampling tree. Every node costs one unconditional
/// sample and one objective evaluation, charged to the builder's class.
pub fn build_sampling_tree<R: Rng + ?Sized>(
    task: &TaskSpec,
    active_agents: &[usize],
    branching: u64,
    height: u32,
    builder_class: AgentClass,
    node_budget: u64,
    rng: &mut R,
) -> Result<(SamplingTree, CostLedger)> {
    if branching < 2 {
        return Err(Error::ParameterOutOfRange("branching factor must be >= 2".into()));
    }
    if height == 0 {
        return Err(Error::ParameterOutOfRange("tree height must be >= 1".into()));
    }
    if active_agents.len() < height as usize {
        return Err(Error::ParameterOutOfRange(format!(
            "need {height} active agents, got {}",
            active_agents.len()
        )));
    }
    let nodes = sampling_tree_node_count(branching, height);
    if nodes > node_budget as u128 {
        return Err(Error::BudgetExceeded(format!(
            "tree needs {nodes} nodes, budget is {node_budget}"
        )));
    }
    let mut ledger = CostLedger::default();
    let mut levels = Vec::with_capacity(height as usize);
    let mut level_size = branching as usize;
    let value_table: Vec<f64> = task.objective.values().iter().map(to_f64).collect();
    for depth in 0..height as usize {
        let agent = active_agents[depth];
        let prior = task
            .priors
            .get(agent)
            .ok_or_else(|| Error::ParameterOutOfRange(format!("active agent {agent} unknown")))?;
        let sampler = prior.sampler();
        let mut states = Vec::with_capacity(level_size);
        let mut values = Vec::with_capacity(level_size);
        for _ in 0..level_size {
            let s = sampler.draw(rng);
            states.push(s);
            values.push(value_table[s]);
        }
        ledger.charge_samples(builder_class, level_size as u64);
        ledger.charge_evals(builder_class, level_size as u64);
        levels.push(Level { states, values });
        level_size = level_size.saturating_mul(branching as usize);
    }
    Ok((
        SamplingTree {
            branching,
            height,
            active_agents: active_agents[..height as usize].to_vec(),
            levels,
        },
        ledger,
    ))
}

/// Weighted average of objective values over the subtree consistent with
/// the observed history: the empirical estimate of the next expectation.
pub fn tree_expectation(
    tree: &SamplingTree,
    task: &TaskSpec,
    history: &[Rat],
    channel: &ChannelSpec,
) -> Result<f64> {
    if history.len() >= tree.height as usize {
        return Err(Error::InstanceTooLarge(format!(
            "history of {} messages needs tree height > {}",
            history.len(),
            tree.height
        )));
    }
    let weights = history_weights_encoded(tree, task, history, channel)?;
    tree.filtered_expectation(history.len(), &weights, |_| true)
        .ok_or(Error::DegenerateSubtree)
}

/// Like [`tree_expectation`], restricted to states inside `cell`.
pub fn tree_conditional_expectation(
    tree: &SamplingTree,
    task: &TaskSpec,
    history: &[Rat],
    channel: &ChannelSpec,
    cell: &[usize],
) -> Result<f64> {
    if history.len() >= tree.height as usize {
        return Err(Error::InstanceTooLarge(format!(
            "history of {} messages needs tree height > {}",
            history.len(),
            tree.height
        )));
    }
    let weights = history_weights_encoded(tree, task, history, channel)?;
    tree.filtered_expectation(history.len(), &weights, |s| cell.binary_search(&s).is_ok())
        .ok_or(Error::DegenerateSubtree)
}

/// History weights using per-state grid encodings (integer arithmetic on
/// the hot path).
pub fn history_weights_encoded(
    tree: &SamplingTree,
    task: &TaskSpec,
    history: &[Rat],
    channel: &ChannelSpec,
) -> Result<Vec<f64>> {
    let ChannelSpec::Smoothed { bits, offset_range } = channel else {
        return Err(Error::InvalidChannel(
            "sampling-tree reweighting is defined for the smoothed channel".into(),
        ));
    };
    let encoder = GridEncoder::new(task, *bits);
    let l = *offset_range as i64;
    let scale = (l * l) as f64;
    let b = tree.branching as usize;
    let mut weights = vec![1.0f64];
    for (depth, message) in history.iter().enumerate() {
        let m_idx = encoder.message_index(message)?;
        let level = &tree.levels[depth];
        let next: Vec<f64> = level
            .states
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let parent = if depth == 0 { 1.0 } else { weights[i / b] };
                if parent == 0.0 {
                    return 0.0;
                }
                let offset = m_idx - encoder.state_index(s);
                if offset.abs() > l {
                    0.0
                } else {
                    parent * ((l - offset.abs()) as f64 / scale)
                }
            })
            .collect();
        weights = next;
    }
    Ok(weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{rat, rat_one};
    use crate::types::{BeliefDistribution, Objective, StateSpace};
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn toy_task(values: Vec<Rat>, priors: Vec<BeliefDistribution>) -> TaskSpec {
        let d = values.len();
        TaskSpec::new(
            StateSpace::indexed(0, d).unwrap(),
            Objective::new(values).unwrap(),
            priors,
            rat(1, 2),
            rat(1, 2),
        )
        .unwrap()
    }

    #[test]
    fn node_counts_match_closed_form() {
        assert_eq!(sampling_tree_node_count(2, 3), 14);
        assert_eq!(sampling_tree_node_count(3, 1), 3);
        for (b, r) in [(2u64, 1u32), (2, 5), (3, 3), (5, 2), (7, 2)] {
            let direct: u128 = (1..=r).map(|k| (b as u128).pow(k)).sum();
            assert_eq!(sampling_tree_node_count(b, r), direct);
        }
    }

    #[test]
    fn build_charges_one_sample_and_eval_per_node() {
        let task = toy_task(
            vec![rat(0, 1), rat_one()],
            vec![BeliefDistribution::uniform(2).unwrap(); 2],
        );
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let (tree, ledger) =
            build_sampling_tree(&task, &[0, 1, 0], 2, 3, AgentClass::Human, 1 << 20, &mut rng)
                .unwrap();
        assert_eq!(tree.node_count(), 14);
        assert_eq!(ledger.samples_human, 14);
        assert_eq!(ledger.evals_human, 14);
        assert_eq!(ledger.samples_ai + ledger.evals_ai, 0);
    }

    #[test]
    fn budget_is_enforced() {
        let task = toy_task(
            vec![rat(0, 1), rat_one()],
            vec![BeliefDistribution::uniform(2).unwrap(); 2],
        );
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        assert!(matches!(
            build_sampling_tree(&task, &[0, 1, 0], 4, 3, AgentClass::Ai, 10, &mut rng),
            Err(Error::BudgetExceeded(_))
        ));
    }

    #[test]
    fn empty_history_returns_root_level_mean() {
        let task = toy_task(
            vec![rat(0, 1), rat_one()],
            vec![BeliefDistribution::uniform(2).unwrap(); 2],
        );
        let channel = ChannelSpec::smoothed(7, 2).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let (tree, _) =
            build_sampling_tree(&task, &[0, 1], 64, 2, AgentClass::Ai, 1 << 20, &mut rng).unwrap();
        let est = tree_expectation(&tree, &task, &[], &channel).unwrap();
        let direct: f64 = tree.level_states(0).iter().map(|&s| to_f64(task.objective.value(s))).sum::<f64>()
            / 64.0;
        assert!((est - direct).abs() < 1e-12);
    }

    #[test]
    fn constant_objective_is_constant_regardless_of_history() {
        let task = toy_task(
            vec![rat(1, 3), rat(1, 3), rat(1, 3)],
            vec![BeliefDistribution::uniform(3).unwrap(); 2],
        );
        let channel = ChannelSpec::smoothed(6, 2).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let (tree, _) =
            build_sampling_tree(&task, &[0, 1, 0], 4, 3, AgentClass::Ai, 1 << 20, &mut rng)
                .unwrap();
        let m = round_to_grid(&rat(1, 3), 6);
        for history in [vec![], vec![m.clone()], vec![m.clone(), m.clone()]] {
            let est = tree_expectation(&tree, &task, &history, &channel).unwrap();
            assert!((est - 1.0 / 3.0).abs() < 1e-9, "history {history:?} gave {est}");
        }
    }

    #[test]
    fn tight_noise_concentrates_on_matching_branch() {
        // Two states with far-apart values; a message exactly at state 1's
        // encoding kills every state-0 branch.
        let task = toy_task(
            vec![rat(0, 1), rat_one()],
            vec![BeliefDistribution::uniform(2).unwrap(); 2],
        );
        let channel = ChannelSpec::smoothed(7, 1).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let (tree, _) =
            build_sampling_tree(&task, &[0, 1], 32, 2, AgentClass::Ai, 1 << 20, &mut rng).unwrap();
        let est = tree_expectation(&tree, &task, &[rat_one()], &channel).unwrap();
        // Conditioned on the level-1 draw being state 1, the level-2 mean
        // stays the unconditional mean of agent 1's prior; the weights must
        // be concentrated, not shifted.
        let weights = history_weights_encoded(&tree, &task, &[rat_one()], &channel).unwrap();
        for (i, &s) in tree.level_states(0).iter().enumerate() {
            if s == 0 {
                assert_eq!(weights[i], 0.0);
            } else {
                assert!(weights[i] > 0.0);
            }
        }
        assert!((0.0..=1.0).contains(&est));
    }

    #[test]
    fn degenerate_history_is_reported() {
        let task = toy_task(
            vec![rat(0, 1), rat(0, 1)],
            vec![BeliefDistribution::uniform(2).unwrap(); 2],
        );
        let channel = ChannelSpec::smoothed(7, 1).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let (tree, _) =
            build_sampling_tree(&task, &[0, 1], 4, 2, AgentClass::Ai, 1 << 20, &mut rng).unwrap();
        // A message far from every encoding zeroes all weights.
        let err = tree_expectation(&tree, &task, &[rat_one()], &channel);
        assert!(matches!(err, Err(Error::DegenerateSubtree)));
    }
}
