//! Full bounded-agent protocol runs: offline trees, smoothed exchange with
//! surprise-triggered refinement, common-prior construction from sampled
//! posteriors, and a post-conditioning agreement phase on fresh trees.

use num_traits::Zero;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::bayes::conditional_expectation;
use crate::common_prior::{construct_common_prior_with, ConstructOptions};
use crate::error::{Error, Result};
use crate::num::{pow2_neg, rat, round_to_grid, to_f64, Rat};
use crate::partition::KnowledgePartition;
use crate::protocol::{
    build_spanning_schedule, check_agreement, smoothed_offset, BitCost, ChannelKind, ChannelSpec,
    CommGraph, Message, Payload, Transcript,
};
use crate::seeding::derive_seed;
use crate::types::{BeliefDistribution, TaskSpec, TypeProfile};

use super::cost::{CostModel, PhaseCosts};
use super::params::required_sample_size;
use super::tree::{
    build_sampling_tree, history_weights_encoded, sampling_tree_node_count, SamplingTree,
};

#[derive(Debug, Clone)]
pub struct BoundedRunOptions {
    pub initial_partitions: Option<Vec<KnowledgePartition>>,
    /// Height of the first-phase trees; the phase exchanges this many
    /// messages.
    pub tree_height: u32,
    /// Height of the fresh post-conditioning trees.
    pub post_prior_height: u32,
    /// Hard cap on nodes per tree.
    pub node_budget: u64,
    /// Samples per agent for posterior estimation; derived from the task
    /// tolerances when absent.
    pub posterior_sample_size: Option<u64>,
    /// Ratio-consistency band for the sampled-posterior feasibility pass;
    /// derived from the sample count when absent.
    pub lp_tolerance: Option<Rat>,
    pub construct: ConstructOptions,
    pub true_state: Option<usize>,
}

impl Default for BoundedRunOptions {
    fn default() -> Self {
        Self {
            initial_partitions: None,
            tree_height: 3,
            post_prior_height: 3,
            node_budget: 1 << 22,
            posterior_sample_size: None,
            lp_tolerance: None,
            construct: ConstructOptions::default(),
            true_state: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BoundedRunResult {
    pub task: usize,
    pub true_state: usize,
    pub agreed: bool,
    pub found_common_prior: bool,
    /// Final maximum pairwise expectation gap under the agents' current
    /// beliefs, measured exactly.
    pub final_gap: f64,
    pub messages_sent: u64,
    /// Messages whose realized payload fell outside some receiver's
    /// predicted window for the sender's actual cell.
    pub surprises: u64,
    /// Messages landing more than the noise half-width away from some
    /// receiver's own current estimate: the sender considered the payload
    /// likely, the receiver would almost never have sent it itself.
    pub disagreement_surprises: u64,
    /// Message index of the first disagreement surprise, if any.
    pub first_disagreement_message: Option<u64>,
    pub refinements: u64,
    pub degenerate_estimates: u64,
    /// Per agent: |first transmitted estimate - exact expectation| at the
    /// moment of that agent's first send.
    pub first_estimate_errors: Vec<Option<f64>>,
    pub tree_nodes_per_agent: u128,
    pub posterior_samples_per_agent: u64,
    pub costs: PhaseCosts,
    pub channel: ChannelSpec,
    pub transcript: Transcript,
}

struct BoundedTaskRun<'a> {
    task: &'a TaskSpec,
    task_index: usize,
    cost_model: &'a CostModel,
    options: &'a BoundedRunOptions,
    channel: ChannelSpec,
    alpha: Rat,
    bits: u32,
    offset_range: u32,
    senders: Vec<usize>,
    true_state: usize,
    rng: ChaCha12Rng,

    partitions: Vec<KnowledgePartition>,
    priors: Vec<BeliefDistribution>,
    trees: Vec<SamplingTree>,
    history: Vec<Rat>,
    first_sent: Vec<Option<f64>>,

    costs: PhaseCosts,
    transcript: Transcript,
    messages_sent: u64,
    surprises: u64,
    disagreement_surprises: u64,
    first_disagreement_message: Option<u64>,
    refinements: u64,
    degenerate_estimates: u64,
    found_common_prior: bool,
    posterior_samples: u64,
    branching: u64,
}

impl<'a> BoundedTaskRun<'a> {
    fn block_len(&self) -> usize {
        self.senders.len()
    }

    /// Tree-backed estimate of an agent's own expectation: the weighted
    /// mean over history-consistent nodes inside the agent's current cell.
    fn own_estimate(&mut self, agent: usize) -> Result<f64> {
        let cell = self.partitions[agent]
            .cell_of(self.true_state)
            .ok_or(Error::InconsistentObservation)?
            .to_vec();
        let weights =
            history_weights_encoded(&self.trees[agent], self.task, &self.history, &self.channel)?;
        let depth = self.history.len();
        let tree = &self.trees[agent];
        if let Some(v) =
            tree.filtered_expectation(depth, &weights, |s| cell.binary_search(&s).is_ok())
        {
            return Ok(v);
        }
        self.degenerate_estimates += 1;
        if let Some(v) = tree.filtered_expectation(depth, &weights, |_| true) {
            return Ok(v);
        }
        self.degenerate_estimates += 1;
        Ok(0.5)
    }

    /// One smoothed message: the sender transmits its estimate plus
    /// triangular noise; every agent re-partitions states by whether its own
    /// tree predicts the payload as plausible for the sender's cell there.
    fn send_message(&mut self, slot: usize) -> Result<()> {
        let sender = self.senders[slot % self.block_len()];
        let est = self.own_estimate(sender)?;
        let est_rat = Rat::from_float(est.clamp(0.0, 1.0))
            .unwrap_or_else(|| rat(1, 2));
        if self.first_sent[sender].is_none() {
            let exact = self
                .exact_expectation(sender)
                .map(|e| to_f64(&e))
                .unwrap_or(f64::NAN);
            self.first_sent[sender] = Some((est - exact).abs());
        }
        let offset = smoothed_offset(self.offset_range, &mut self.rng)?;
        let payload = round_to_grid(&est_rat, self.bits)
            + Rat::from_integer(offset.into()) * pow2_neg(self.bits);

        // Disagreement check: a receiver finds the payload surprising when
        // it sits outside the window around what the receiver itself would
        // have sent right now.
        let n = self.task.num_agents();
        for agent in 0..n {
            if agent == sender {
                continue;
            }
            let own = self.own_estimate(agent)?;
            let own_grid = round_to_grid(
                &Rat::from_float(own.clamp(0.0, 1.0)).unwrap_or_else(|| rat(1, 2)),
                self.bits,
            );
            let gap = if payload > own_grid {
                payload.clone() - own_grid
            } else {
                own_grid - payload.clone()
            };
            if gap > self.alpha {
                self.disagreement_surprises += 1;
                if self.first_disagreement_message.is_none() {
                    self.first_disagreement_message = Some(self.messages_sent + 1);
                }
            }
        }

        // Each agent predicts, per sender cell, the payload window it finds
        // plausible, then splits its partition by window membership.
        let sender_partition = self.partitions[sender].clone();
        let depth = self.history.len();
        let mut any_refined = false;
        for agent in 0..n {
            let weights = history_weights_encoded(
                &self.trees[agent],
                self.task,
                &self.history,
                &self.channel,
            )?;
            let tree = &self.trees[agent];
            let centers: Vec<Option<Rat>> = sender_partition
                .cells()
                .iter()
                .map(|cell| {
                    tree.filtered_expectation(depth, &weights, |s| {
                        cell.binary_search(&s).is_ok()
                    })
                    .and_then(Rat::from_float)
                    .map(|e| round_to_grid(&e, self.bits))
                })
                .collect();
            let in_window = |s: usize| -> Option<bool> {
                let center = sender_partition.cell_index_of(s).and_then(|k| centers[k].clone())?;
                let gap = if payload > center {
                    payload.clone() - center
                } else {
                    center - payload.clone()
                };
                Some(gap <= self.alpha)
            };
            if agent != sender {
                // A surprise: the receiver deems the sender's actual cell
                // implausible for this payload.
                if in_window(self.true_state) == Some(false) {
                    self.surprises += 1;
                }
            }
            let split = self.partitions[agent].split_by_classes(&in_window);
            if split != self.partitions[agent] {
                any_refined = true;
                self.partitions[agent] = split;
            }
        }
        if any_refined {
            self.refinements += 1;
        }

        self.history.push(payload.clone());
        self.messages_sent += 1;
        self.transcript.messages.push(Message {
            round: (self.messages_sent - 1) / self.block_len() as u64 + 1,
            index: self.messages_sent,
            sender,
            task: self.task_index,
            payload: Payload::Grid(payload),
            bit_cost: BitCost::Bits(self.bits),
            channel: ChannelKind::Smoothed,
        });
        Ok(())
    }

    fn exact_expectation(&self, agent: usize) -> Result<Rat> {
        let cell = self.partitions[agent]
            .cell_of(self.true_state)
            .ok_or(Error::InconsistentObservation)?;
        conditional_expectation(&self.priors[agent], &self.task.objective, cell)
    }

    fn exact_gaps_within_epsilon(&self) -> Result<bool> {
        let expectations: Result<Vec<Rat>> =
            (0..self.task.num_agents()).map(|i| self.exact_expectation(i)).collect();
        Ok(check_agreement(&expectations?, &self.task.epsilon))
    }

    /// Draws fresh unconditional samples per agent, snaps the empirical
    /// cell-conditionals to exact rationals, and runs the tolerance-banded
    /// feasibility pass.
    fn construct_from_samples(&mut self) -> Result<()> {
        let n = self.task.num_agents();
        let d = self.task.num_states();
        let quarter_eps = self.task.epsilon.clone() / rat(4, 1);
        let third_delta = self.task.delta.clone() / rat(3, 1);
        let samples = match self.options.posterior_sample_size {
            Some(s) => s.max(1),
            None => required_sample_size(&quarter_eps, &third_delta)?,
        };
        self.posterior_samples = samples;
        let mut cell_posteriors = Vec::with_capacity(n);
        for agent in 0..n {
            let mut counts = vec![0u64; d];
            let sampler = self.priors[agent].sampler();
            for _ in 0..samples {
                counts[sampler.draw(&mut self.rng)] += 1;
            }
            self.costs
                .construct_cp
                .charge_samples(self.cost_model.class_of(agent), samples);
            let mut per_cell = Vec::new();
            for cell in self.partitions[agent].cells() {
                let total: u64 = cell.iter().map(|&s| counts[s]).sum();
                if total == 0 {
                    per_cell.push(None);
                    continue;
                }
                let mut mass = vec![Rat::zero(); d];
                for &s in cell {
                    mass[s] = rat(counts[s] as i64, total as i64);
                }
                per_cell.push(Some(BeliefDistribution::new(mass)?));
            }
            cell_posteriors.push(per_cell);
        }
        let profile = TypeProfile { cell_posteriors };
        let tolerance = match &self.options.lp_tolerance {
            Some(t) => t.clone(),
            None => {
                // Sampling error scale for ratio estimates, floored at 1e-6.
                let band = Rat::from_float(4.0 / (samples as f64).sqrt())
                    .unwrap_or_else(|| rat(1, 1_000_000));
                band.max(rat(1, 1_000_000))
            }
        };
        let mut construct = self.options.construct.clone();
        construct.tolerance = tolerance;
        let result = construct_common_prior_with(&self.partitions, &profile, &construct)?;
        if let Some(p) = result.prior() {
            // Only condition on a prior that leaves every agent's live cell
            // possible; a feasible solution may zero a conflicted component,
            // and beliefs that exclude an agent's own information are
            // unusable.
            let usable = (0..n).all(|agent| {
                self.partitions[agent]
                    .cell_of(self.true_state)
                    .map(|cell| p.cell_mass(cell) > Rat::zero())
                    .unwrap_or(false)
            });
            if usable {
                self.found_common_prior = true;
                self.priors = vec![p.clone(); n];
            }
        }
        Ok(())
    }

    fn build_trees(&mut self, height: u32, phase_find: bool) -> Result<()> {
        let n = self.task.num_agents();
        let active: Vec<usize> = (0..height as usize)
            .map(|slot| self.senders[slot % self.block_len()])
            .collect();
        // Trees draw from the agents' current unconditional beliefs, which
        // are the constructed common prior after conditioning.
        let task_now = TaskSpec::new(
            self.task.space.clone(),
            self.task.objective.clone(),
            self.priors.clone(),
            self.task.epsilon.clone(),
            self.task.delta.clone(),
        )?;
        let mut trees = Vec::with_capacity(n);
        for agent in 0..n {
            let (tree, ledger) = build_sampling_tree(
                &task_now,
                &active,
                self.branching,
                height,
                self.cost_model.class_of(agent),
                self.options.node_budget,
                &mut self.rng,
            )?;
            if phase_find {
                self.costs.find_cp.merge(&ledger);
            } else {
                self.costs.agree_cp.merge(&ledger);
            }
            trees.push(tree);
        }
        self.trees = trees;
        self.history.clear();
        Ok(())
    }
}

/// Runs the bounded-agent protocol on every task.
///
/// `branching` is the sampling-tree fan-out `B`; the convergence analysis
/// assumes `B >= 1/alpha`, but smaller trees run fine and simply estimate
/// more coarsely. `alpha_target` guides the realized noise half-width,
/// which must land in `[eps/50, eps/40]` on the payload grid.
pub fn run_bounded_agreement(
    tasks: &[TaskSpec],
    graph: &CommGraph,
    cost_model: &CostModel,
    branching: u64,
    alpha_target: &Rat,
    seed: u64,
    options: &BoundedRunOptions,
) -> Result<Vec<BoundedRunResult>> {
    if tasks.is_empty() {
        return Err(Error::ConfigInvalid("no tasks to run".into()));
    }
    let mut results = Vec::with_capacity(tasks.len());
    for (j, task) in tasks.iter().enumerate() {
        let task_seed = derive_seed(seed, 0x626f756e, j as u64);
        results.push(run_one(task, j, graph, cost_model, branching, alpha_target, task_seed, options)?);
    }
    Ok(results)
}

#[allow(clippy::too_many_arguments)]
fn run_one(
    task: &TaskSpec,
    task_index: usize,
    graph: &CommGraph,
    cost_model: &CostModel,
    branching: u64,
    alpha_target: &Rat,
    seed: u64,
    options: &BoundedRunOptions,
) -> Result<BoundedRunResult> {
    let n = task.num_agents();
    cost_model.validate(n)?;
    if graph.num_agents() != n {
        return Err(Error::DimensionMismatch { left: graph.num_agents(), right: n });
    }
    let channel = ChannelSpec::smoothed_for_epsilon(&task.epsilon, Some(alpha_target))?;
    let (bits, offset_range) = match &channel {
        ChannelSpec::Smoothed { bits, offset_range } => (*bits, *offset_range),
        _ => unreachable!(),
    };
    for height in [options.tree_height, options.post_prior_height] {
        let nodes = sampling_tree_node_count(branching, height);
        if nodes > options.node_budget as u128 {
            return Err(Error::BudgetExceeded(format!(
                "trees of branching {branching} and height {height} need {nodes} nodes, \
                 budget is {}",
                options.node_budget
            )));
        }
    }
    let schedule = build_spanning_schedule(graph)?;
    let senders: Vec<usize> = schedule.block().iter().map(|e| e.0).collect();
    let partitions = match &options.initial_partitions {
        Some(p) => {
            if p.len() != n {
                return Err(Error::DimensionMismatch { left: p.len(), right: n });
            }
            p.clone()
        }
        None => vec![KnowledgePartition::trivial(task.num_states()); n],
    };
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let true_state = match options.true_state {
        Some(s) if s < task.num_states() => s,
        Some(s) => {
            return Err(Error::ParameterOutOfRange(format!("true state s{s} outside space")))
        }
        None => crate::protocol::sample_state(&task.priors[0], &mut rng),
    };

    let mut run = BoundedTaskRun {
        task,
        task_index,
        cost_model,
        options,
        channel: channel.clone(),
        alpha: channel.alpha().expect("smoothed channel"),
        bits,
        offset_range,
        senders,
        true_state,
        rng,
        partitions,
        priors: task.priors.clone(),
        trees: Vec::new(),
        history: Vec::new(),
        first_sent: vec![None; n],
        costs: PhaseCosts::default(),
        transcript: Transcript { task: task_index, ..Transcript::default() },
        messages_sent: 0,
        surprises: 0,
        disagreement_surprises: 0,
        first_disagreement_message: None,
        refinements: 0,
        degenerate_estimates: 0,
        found_common_prior: false,
        posterior_samples: 0,
        branching,
    };

    let mut agreed = run.exact_gaps_within_epsilon()?;
    if !agreed && !run.senders.is_empty() {
        // Phase one: offline trees, then one message per tree level.
        run.build_trees(options.tree_height, true)?;
        for slot in 0..options.tree_height as usize {
            run.send_message(slot)?;
            if (slot + 1) % run.block_len() == 0 && run.exact_gaps_within_epsilon()? {
                agreed = true;
                break;
            }
        }
        if !agreed {
            run.construct_from_samples()?;
            agreed = run.exact_gaps_within_epsilon()?;
        }
        if !agreed {
            // Post-conditioning phase on fresh trees.
            run.build_trees(options.post_prior_height, false)?;
            for slot in 0..options.post_prior_height as usize {
                run.send_message(slot)?;
                if (slot + 1) % run.block_len() == 0 && run.exact_gaps_within_epsilon()? {
                    agreed = true;
                    break;
                }
            }
        }
        if !agreed {
            agreed = run.exact_gaps_within_epsilon()?;
        }
    }

    let final_gap = {
        let exps: Result<Vec<Rat>> = (0..n).map(|i| run.exact_expectation(i)).collect();
        match exps {
            Ok(exps) => {
                let max = exps.iter().max().cloned().unwrap_or_else(Rat::zero);
                let min = exps.iter().min().cloned().unwrap_or_else(Rat::zero);
                to_f64(&(max - min))
            }
            Err(_) => f64::NAN,
        }
    };
    Ok(BoundedRunResult {
        task: task_index,
        true_state: run.true_state,
        agreed,
        found_common_prior: run.found_common_prior,
        final_gap,
        messages_sent: run.messages_sent,
        surprises: run.surprises,
        disagreement_surprises: run.disagreement_surprises,
        first_disagreement_message: run.first_disagreement_message,
        refinements: run.refinements,
        degenerate_estimates: run.degenerate_estimates,
        first_estimate_errors: run.first_sent,
        tree_nodes_per_agent: sampling_tree_node_count(branching, options.tree_height),
        posterior_samples_per_agent: run.posterior_samples,
        costs: run.costs,
        channel,
        transcript: run.transcript,
    })
}
