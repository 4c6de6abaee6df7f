//! The agreement meta-protocol: scheduled message exchange with partition
//! refinement, per-round common-prior construction, and conditioning.

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::bayes::{conditional_expectation, posterior_tv_distance};
use crate::common_prior::{construct_common_prior_with, ConstructOptions};
use crate::error::{Error, Result};
use crate::instances::canonical_chain_gap;
use crate::num::{pow2_neg, rat, round_to_grid, to_f64, Rat};
use crate::partition::KnowledgePartition;
use crate::seeding::derive_seed;
use crate::types::{BeliefDistribution, TaskSpec, TypeProfile};

use super::channel::{
    bbf_channel, bbf_likelihood, check_agreement, discretize_bucket, smoothed_offset, BitCost,
    Bucket, ChannelKind, ChannelSpec,
};
use super::graph::{build_spanning_schedule, CommGraph, SpanningSchedule};
use super::transcript::{
    AgreementOutcome, Message, Payload, RoundSnapshot, TaskRunResult, Termination, Transcript,
};

/// Bound on protocol rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundCap {
    Explicit(u64),
    /// `ceil(16 (N^2 D + N^7 / (eps delta)^2) / scale_down)`; the formula
    /// cap is far beyond desk scale, so experiments scale it down.
    Formula { scale_down: u64 },
}

impl RoundCap {
    pub fn resolve(&self, n: usize, d: usize, epsilon: &Rat, delta: &Rat) -> u64 {
        match self {
            RoundCap::Explicit(cap) => *cap,
            RoundCap::Formula { scale_down } => {
                let n = n as f64;
                let d = d as f64;
                let eps = to_f64(epsilon);
                let del = to_f64(delta);
                let raw = 16.0 * (n * n * d + n.powi(7) / (eps * del).powi(2));
                let scaled = (raw / (*scale_down).max(1) as f64).ceil();
                (scaled as u64).max(1)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub round_cap: RoundCap,
    /// Initial knowledge partitions, one per agent; trivial by default.
    pub initial_partitions: Option<Vec<KnowledgePartition>>,
    /// Mediator belief for the bucket channels; defaults to the average of
    /// the agents' priors.
    pub mediator_prior: Option<BeliefDistribution>,
    pub construct: ConstructOptions,
    /// Realized task state; drawn from agent 0's prior when absent.
    pub true_state: Option<usize>,
    /// Stop recording per-round snapshots beyond this many rounds.
    pub snapshot_cap: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            round_cap: RoundCap::Formula { scale_down: 256 },
            initial_partitions: None,
            mediator_prior: None,
            construct: ConstructOptions::default(),
            true_state: None,
            snapshot_cap: 4096,
        }
    }
}

/// One task's protocol execution.
pub struct AgreementRun {
    task: TaskSpec,
    task_index: usize,
    schedule: SpanningSchedule,
    channel: ChannelSpec,
    construct: ConstructOptions,
    snapshot_cap: u64,
    cap: u64,
    rng: ChaCha12Rng,
    true_state: usize,

    priors: Vec<BeliefDistribution>,
    partitions: Vec<KnowledgePartition>,
    mediator_prior: Option<BeliefDistribution>,
    mediator_partition: Option<KnowledgePartition>,
    /// Public soft posteriors on the likelihood-bounded channel, one per
    /// agent plus the mediator last.
    soft: Option<Vec<BeliefDistribution>>,

    common_prior: Option<BeliefDistribution>,
    cp_round: Option<u64>,
    agreed_round: Option<u64>,
    profile_dirty: bool,

    round: u64,
    message_index: u64,
    transcript: Transcript,
    refinement_indices: Vec<u64>,
    coarsening_violations: u64,
    chain_gap_increments: Vec<(u32, f64)>,
    termination: Termination,
}

impl AgreementRun {
    pub fn new(
        task: &TaskSpec,
        task_index: usize,
        graph: &CommGraph,
        channel: &ChannelSpec,
        options: &RunOptions,
        seed: u64,
    ) -> Result<Self> {
        let n = task.num_agents();
        let d = task.num_states();
        if graph.num_agents() != n {
            return Err(Error::DimensionMismatch { left: graph.num_agents(), right: n });
        }
        if let ChannelSpec::Smoothed { .. } = channel {
            let alpha = channel.alpha().expect("smoothed channel has alpha");
            let lo = task.epsilon.clone() / rat(50, 1);
            let hi = task.epsilon.clone() / rat(40, 1);
            if alpha < lo || alpha > hi {
                return Err(Error::InvalidChannel(format!(
                    "noise half-width {alpha} outside [eps/50, eps/40]"
                )));
            }
        }
        let schedule = build_spanning_schedule(graph)?;
        let partitions = match &options.initial_partitions {
            Some(parts) => {
                if parts.len() != n {
                    return Err(Error::DimensionMismatch { left: parts.len(), right: n });
                }
                for p in parts {
                    if p.num_states() != d {
                        return Err(Error::DimensionMismatch { left: p.num_states(), right: d });
                    }
                    if !p.covers_fully() {
                        return Err(Error::InvalidPartition(
                            "initial partitions must cover the space".into(),
                        ));
                    }
                }
                parts.clone()
            }
            None => vec![KnowledgePartition::trivial(d); n],
        };
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let true_state = match options.true_state {
            Some(s) if s < d => s,
            Some(s) => {
                return Err(Error::ParameterOutOfRange(format!("true state s{s} outside space")))
            }
            None => sample_state(&task.priors[0], &mut rng),
        };
        let needs_mediator = matches!(
            channel.kind(),
            ChannelKind::Discretized | ChannelKind::BbfDiscretized
        );
        let mediator_prior = if needs_mediator {
            Some(match &options.mediator_prior {
                Some(p) => {
                    if p.len() != d {
                        return Err(Error::DimensionMismatch { left: p.len(), right: d });
                    }
                    p.clone()
                }
                None => average_prior(&task.priors)?,
            })
        } else {
            None
        };
        let mediator_partition = needs_mediator.then(|| KnowledgePartition::trivial(d));
        let soft = matches!(channel.kind(), ChannelKind::BbfDiscretized).then(|| {
            let mut all = task.priors.clone();
            all.push(mediator_prior.clone().expect("bbf channel has a mediator"));
            all
        });
        let cap = options.round_cap.resolve(n, d, &task.epsilon, &task.delta);
        Ok(Self {
            task: task.clone(),
            task_index,
            schedule,
            channel: channel.clone(),
            construct: options.construct.clone(),
            snapshot_cap: options.snapshot_cap,
            cap,
            rng,
            true_state,
            priors: task.priors.clone(),
            partitions,
            mediator_prior,
            mediator_partition,
            soft,
            common_prior: None,
            cp_round: None,
            agreed_round: None,
            profile_dirty: true,
            round: 0,
            message_index: 0,
            transcript: Transcript { task: task_index, ..Transcript::default() },
            refinement_indices: Vec::new(),
            coarsening_violations: 0,
            chain_gap_increments: Vec::new(),
            termination: Termination::RoundCapExceeded,
        })
    }

    /// Belief the agent currently reasons from: conditioned prior, or the
    /// public soft posterior on the likelihood-bounded channel.
    fn agent_belief(&self, agent: usize) -> &BeliefDistribution {
        match &self.soft {
            Some(soft) => &soft[agent],
            None => &self.priors[agent],
        }
    }

    fn mediator_belief(&self) -> Option<&BeliefDistribution> {
        match &self.soft {
            Some(soft) => soft.last(),
            None => self.mediator_prior.as_ref(),
        }
    }

    /// Expectation per cell of a partition under a belief; `None` marks a
    /// zero-mass cell whose conditional is undefined.
    fn cell_expectations(
        &self,
        belief: &BeliefDistribution,
        partition: &KnowledgePartition,
    ) -> Vec<Option<Rat>> {
        partition
            .cells()
            .iter()
            .map(|cell| {
                if belief.cell_mass(cell) > Rat::zero() {
                    Some(
                        conditional_expectation(belief, &self.task.objective, cell)
                            .expect("positive-mass cell"),
                    )
                } else {
                    None
                }
            })
            .collect()
    }

    fn expectation_at(&self, agent: usize, state: usize) -> Result<Rat> {
        let cell = self.partitions[agent]
            .cell_of(state)
            .ok_or(Error::InconsistentObservation)?;
        conditional_expectation(self.agent_belief(agent), &self.task.objective, cell)
    }

    fn expectations_at_true_state(&self) -> Result<Vec<Rat>> {
        (0..self.task.num_agents())
            .map(|i| self.expectation_at(i, self.true_state))
            .collect()
    }

    fn record_snapshot(&mut self) {
        if self.round > self.snapshot_cap {
            return;
        }
        let expectations: Vec<f64> = (0..self.task.num_agents())
            .map(|i| self.expectation_at(i, self.true_state).map(|e| to_f64(&e)).unwrap_or(f64::NAN))
            .collect();
        let partition_sizes: Vec<usize> =
            self.partitions.iter().map(|p| p.num_cells()).collect();
        self.transcript.snapshots.push(RoundSnapshot {
            round: self.round,
            expectations,
            partition_sizes,
        });
    }

    /// Splits every participant's partition by a per-state message class.
    /// Returns true when someone properly refined.
    fn refine_all<K: Ord>(&mut self, class_of: &dyn Fn(usize) -> K) -> bool {
        let mut refined = false;
        for part in self.partitions.iter_mut() {
            let split = part.split_by_classes(class_of);
            if &split != part {
                refined = true;
                *part = split;
            }
        }
        if let Some(med) = self.mediator_partition.as_mut() {
            let split = med.split_by_classes(class_of);
            if &split != med {
                refined = true;
                *med = split;
            }
        }
        if refined {
            self.refinement_indices.push(self.message_index);
            self.profile_dirty = true;
        }
        refined
    }

    fn assert_mediator_coarsening(&mut self) {
        if let Some(med) = &self.mediator_partition {
            let ok = self.partitions.iter().all(|p| p.refines(med));
            if !ok {
                self.coarsening_violations += 1;
            }
        }
    }

    fn send_message(&mut self, sender: usize) -> Result<()> {
        self.message_index += 1;
        let (payload, bit_cost) = match self.channel.clone() {
            ChannelSpec::Continuous => {
                let cells = self.cell_expectations(self.agent_belief(sender), &self.partitions[sender]);
                let part = self.partitions[sender].clone();
                let class = move |s: usize| part.cell_index_of(s).and_then(|k| cells[k].clone());
                let realized = class(self.true_state).ok_or(Error::ZeroMassCell)?;
                self.refine_all(&class);
                (Payload::Exact(realized), BitCost::Unbounded)
            }
            ChannelSpec::Discretized => {
                let class = self.bucket_class(sender)?;
                let realized = class(self.true_state).ok_or(Error::ZeroMassCell)?;
                self.refine_all(&class);
                self.assert_mediator_coarsening();
                (Payload::Bucket(realized), BitCost::Bits(2))
            }
            ChannelSpec::BbfDiscretized { theta } => {
                let class = self.bucket_class(sender)?;
                let intended = class(self.true_state).ok_or(Error::ZeroMassCell)?;
                let codeword = bbf_channel(intended, &theta, &mut self.rng)?;
                self.apply_bbf_update(sender, codeword, &theta, &class)?;
                (Payload::Codeword(codeword), BitCost::Bits(2))
            }
            ChannelSpec::Smoothed { bits, offset_range } => {
                let alpha = self.channel.alpha().expect("smoothed alpha");
                let exact = self.expectation_at(sender, self.true_state)?;
                let offset = smoothed_offset(offset_range, &mut self.rng)?;
                let payload = round_to_grid(&exact, bits)
                    + Rat::from_integer(offset.into()) * pow2_neg(bits);
                let cells = self.cell_expectations(self.agent_belief(sender), &self.partitions[sender]);
                let grid_cells: Vec<Option<Rat>> = cells
                    .iter()
                    .map(|e| e.as_ref().map(|v| round_to_grid(v, bits)))
                    .collect();
                let part = self.partitions[sender].clone();
                let observed = payload.clone();
                let class = move |s: usize| -> Option<bool> {
                    let center = part.cell_index_of(s).and_then(|k| grid_cells[k].clone())?;
                    let gap = if observed > center {
                        observed.clone() - center
                    } else {
                        center - observed.clone()
                    };
                    Some(gap <= alpha)
                };
                self.refine_all(&class);
                (Payload::Grid(payload), BitCost::Bits(bits))
            }
        };
        self.transcript.messages.push(Message {
            round: self.round,
            index: self.message_index,
            sender,
            task: self.task_index,
            payload,
            bit_cost,
            channel: self.channel.kind(),
        });
        Ok(())
    }

    /// Bucket the sender would produce at each hypothetical state, judged
    /// against the mediator's expectation there. Common knowledge, so every
    /// participant can refine by it.
    fn bucket_class(&self, sender: usize) -> Result<impl Fn(usize) -> Option<Bucket>> {
        let sender_cells =
            self.cell_expectations(self.agent_belief(sender), &self.partitions[sender]);
        let med_partition = self
            .mediator_partition
            .clone()
            .ok_or_else(|| Error::InvalidChannel("bucket channel needs a mediator".into()))?;
        let med_cells = self.cell_expectations(
            self.mediator_belief().expect("mediator belief"),
            &med_partition,
        );
        let sender_partition = self.partitions[sender].clone();
        let epsilon = self.task.epsilon.clone();
        Ok(move |s: usize| -> Option<Bucket> {
            let e_s = sender_partition.cell_index_of(s).and_then(|k| sender_cells[k].clone())?;
            let e_m = med_partition.cell_index_of(s).and_then(|k| med_cells[k].clone())?;
            Some(discretize_bucket(&e_s, &e_m, &epsilon))
        })
    }

    /// Soft Bayesian update for the likelihood-bounded channel: everyone but
    /// the sender multiplies by the realized codeword's likelihood.
    fn apply_bbf_update(
        &mut self,
        sender: usize,
        codeword: Bucket,
        theta: &Rat,
        class: &dyn Fn(usize) -> Option<Bucket>,
    ) -> Result<()> {
        let d = self.task.num_states();
        let n = self.task.num_agents();
        let chain: Vec<usize> = (0..d).collect();
        let soft = self.soft.as_mut().expect("bbf channel keeps soft posteriors");
        let gap_before = if n >= 2 {
            canonical_chain_gap(&soft[0], &soft[1], &chain).ok()
        } else {
            None
        };
        let likelihood: Vec<Rat> = (0..d)
            .map(|s| match class(s) {
                Some(intended) => bbf_likelihood(intended, codeword, theta),
                // States where the bucket is undefined carry no evidence.
                None => Rat::from_integer(1.into()),
            })
            .collect();
        for (idx, belief) in soft.iter_mut().enumerate() {
            if idx == sender {
                continue;
            }
            let weights: Vec<Rat> = belief
                .masses()
                .iter()
                .zip(&likelihood)
                .map(|(m, l)| m.clone() * l.clone())
                .collect();
            *belief = BeliefDistribution::from_weights(weights)?;
        }
        if let Some(before) = gap_before {
            if let Ok(after) = canonical_chain_gap(&soft[0], &soft[1], &chain) {
                self.chain_gap_increments.push((2, (after - before).abs()));
            }
        }
        Ok(())
    }

    /// One schedule block: every tree edge's tail transmits once.
    pub fn exchange_round(&mut self) -> Result<()> {
        self.round += 1;
        let block: Vec<usize> = self.schedule.block().iter().map(|e| e.0).collect();
        for sender in block {
            self.send_message(sender)?;
        }
        self.record_snapshot();
        Ok(())
    }

    fn attempt_common_prior(&mut self) -> Result<()> {
        if self.common_prior.is_some() || !self.profile_dirty {
            return Ok(());
        }
        self.profile_dirty = matches!(self.channel.kind(), ChannelKind::BbfDiscretized);
        let beliefs: Vec<BeliefDistribution> =
            (0..self.task.num_agents()).map(|i| self.agent_belief(i).clone()).collect();
        let profile = TypeProfile::from_priors(&self.partitions, &beliefs)?;
        let result = construct_common_prior_with(&self.partitions, &profile, &self.construct)?;
        if let Some(p) = result.prior() {
            // A feasible solution may zero out a conflicted component; only
            // adopt it when every agent's live cell keeps positive mass, so
            // conditioning stays defined for everyone.
            let usable = (0..self.task.num_agents()).all(|agent| {
                self.partitions[agent]
                    .cell_of(self.true_state)
                    .map(|cell| p.cell_mass(cell) > Rat::zero())
                    .unwrap_or(false)
            });
            if !usable {
                return Ok(());
            }
            self.common_prior = Some(p.clone());
            self.cp_round = Some(self.round);
            self.priors = vec![p.clone(); self.task.num_agents()];
            if self.mediator_prior.is_some() {
                self.mediator_prior = Some(p.clone());
            }
            if let Some(soft) = self.soft.as_mut() {
                for belief in soft.iter_mut() {
                    *belief = p.clone();
                }
            }
            self.profile_dirty = true;
        }
        Ok(())
    }

    fn check_agreement_now(&mut self) -> Result<bool> {
        let expectations = self.expectations_at_true_state()?;
        if check_agreement(&expectations, &self.task.epsilon) {
            if self.agreed_round.is_none() {
                self.agreed_round = Some(self.round);
            }
            return Ok(true);
        }
        Ok(false)
    }

    /// Runs the protocol to agreement, stall, or the round cap.
    pub fn run(&mut self) -> Result<()> {
        self.record_snapshot();
        self.attempt_common_prior()?;
        if self.check_agreement_now()? {
            self.termination = Termination::Agreed;
            return Ok(());
        }
        let deterministic = matches!(
            self.channel.kind(),
            ChannelKind::Continuous | ChannelKind::Discretized
        );
        while self.round < self.cap {
            let refinements_before = self.refinement_indices.len();
            let had_cp = self.common_prior.is_some();
            self.exchange_round()?;
            self.attempt_common_prior()?;
            if self.check_agreement_now()? {
                self.termination = Termination::Agreed;
                return Ok(());
            }
            let progressed = self.refinement_indices.len() > refinements_before
                || (!had_cp && self.common_prior.is_some());
            if deterministic && !progressed {
                // Nothing can change from here on: the channel is a
                // deterministic function of a state we just saw repeat.
                self.termination = Termination::Stalled;
                return Ok(());
            }
        }
        self.termination = Termination::RoundCapExceeded;
        Ok(())
    }

    pub fn into_result(self) -> TaskRunResult {
        let agreed = matches!(self.termination, Termination::Agreed);
        let window = 2 * self.schedule.block().len() as u64;
        let cadence_violations = if window == 0 {
            0
        } else {
            let mut violations = 0;
            let complete = self.message_index / window;
            for w in 0..complete {
                let lo = w * window + 1;
                let hi = (w + 1) * window;
                let refined = self
                    .refinement_indices
                    .iter()
                    .any(|&i| i >= lo && i <= hi);
                if !refined {
                    violations += 1;
                }
            }
            violations
        };
        let final_max_tv = {
            let mut best = 0.0f64;
            let n = self.task.num_agents();
            for i in 0..n {
                for k in (i + 1)..n {
                    let pi = posterior_at(&self, i);
                    let pk = posterior_at(&self, k);
                    if let (Some(pi), Some(pk)) = (pi, pk) {
                        if let Ok(tv) = posterior_tv_distance(&pi, &pk) {
                            best = best.max(to_f64(&tv));
                        }
                    }
                }
            }
            best
        };
        let bits_sent = self.transcript.total_bits();
        TaskRunResult {
            outcome: AgreementOutcome {
                agreed,
                termination: self.termination,
                true_state: self.true_state,
                rounds_to_common_prior: self.cp_round,
                rounds_to_agreement: self.agreed_round,
                rounds_run: self.round,
                messages_sent: self.message_index,
                bits_sent,
                refinement_indices: self.refinement_indices,
                cadence_violations,
                coarsening_violations: self.coarsening_violations,
                chain_gap_increments: self.chain_gap_increments,
                final_max_tv,
            },
            transcript: self.transcript,
        }
    }

    pub fn common_prior(&self) -> Option<&BeliefDistribution> {
        self.common_prior.as_ref()
    }

    pub fn true_state(&self) -> usize {
        self.true_state
    }
}

fn posterior_at(run: &AgreementRun, agent: usize) -> Option<BeliefDistribution> {
    let cell = run.partitions[agent].cell_of(run.true_state)?;
    run.agent_belief(agent).condition_on(cell).ok()
}

/// Runs the meta-protocol on every task independently.
pub fn run_agreement(
    tasks: &[TaskSpec],
    graph: &CommGraph,
    channel: &ChannelSpec,
    seed: u64,
    options: &RunOptions,
) -> Result<Vec<TaskRunResult>> {
    if tasks.is_empty() {
        return Err(Error::ConfigInvalid("no tasks to run".into()));
    }
    let mut results = Vec::with_capacity(tasks.len());
    for (j, task) in tasks.iter().enumerate() {
        let task_seed = derive_seed(seed, 0x7461736b, j as u64);
        let mut run = AgreementRun::new(task, j, graph, channel, options, task_seed)?;
        run.run()?;
        results.push(run.into_result());
    }
    Ok(results)
}

/// Which distribution the realized task state is drawn from when
/// estimating the agreement probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    /// Draw from one agent's own prior.
    OwnPrior(usize),
    /// Draw from the common prior constructed on the initial profile.
    CommonPrior,
    /// Report the minimum estimate across all agents' own priors.
    WorstCase,
}

#[derive(Debug, Clone)]
pub struct ProbabilityEstimate {
    pub task: usize,
    pub measure: String,
    pub agent: Option<usize>,
    pub successes: u64,
    pub trials: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Wilson score interval at 95%.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054f64;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = (z / denom) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Monte-Carlo estimate of the agreement-event frequency, drawing the true
/// state from the chosen measure.
pub fn estimate_agreement_probability(
    tasks: &[TaskSpec],
    graph: &CommGraph,
    channel: &ChannelSpec,
    trials: u64,
    measure: Measure,
    seed: u64,
    options: &RunOptions,
) -> Result<Vec<ProbabilityEstimate>> {
    if trials == 0 {
        return Err(Error::ConfigInvalid("trials must be at least 1".into()));
    }
    let mut out = Vec::new();
    for (j, task) in tasks.iter().enumerate() {
        match measure {
            Measure::OwnPrior(agent) => {
                out.push(estimate_one(task, j, graph, channel, trials, agent, seed, options)?);
            }
            Measure::WorstCase => {
                let mut worst: Option<ProbabilityEstimate> = None;
                for agent in 0..task.num_agents() {
                    let est =
                        estimate_one(task, j, graph, channel, trials, agent, seed, options)?;
                    worst = Some(match worst {
                        Some(cur) if cur.p_hat <= est.p_hat => cur,
                        _ => est,
                    });
                }
                let mut worst = worst.expect("at least one agent");
                worst.measure = "worst_case".into();
                out.push(worst);
            }
            Measure::CommonPrior => {
                let parts = options
                    .initial_partitions
                    .clone()
                    .unwrap_or_else(|| vec![KnowledgePartition::trivial(task.num_states()); task.num_agents()]);
                let profile = TypeProfile::from_priors(&parts, &task.priors)?;
                let result = construct_common_prior_with(&parts, &profile, &options.construct)?;
                let Some(cp) = result.prior() else {
                    return Err(Error::ConfigInvalid(
                        "common-prior measure requested but the initial profile is infeasible"
                            .into(),
                    ));
                };
                let mut est = estimate_with_draws(
                    task, j, graph, channel, trials, cp, seed, options,
                )?;
                est.measure = "common_prior".into();
                est.agent = None;
                out.push(est);
            }
        }
    }
    Ok(out)
}

fn estimate_one(
    task: &TaskSpec,
    task_index: usize,
    graph: &CommGraph,
    channel: &ChannelSpec,
    trials: u64,
    agent: usize,
    seed: u64,
    options: &RunOptions,
) -> Result<ProbabilityEstimate> {
    if agent >= task.num_agents() {
        return Err(Error::ParameterOutOfRange(format!("agent {agent} out of range")));
    }
    let mut est = estimate_with_draws(
        task,
        task_index,
        graph,
        channel,
        trials,
        &task.priors[agent],
        derive_seed(seed, 0x6d656173, agent as u64),
        options,
    )?;
    est.measure = "own_prior".into();
    est.agent = Some(agent);
    Ok(est)
}

fn estimate_with_draws(
    task: &TaskSpec,
    task_index: usize,
    graph: &CommGraph,
    channel: &ChannelSpec,
    trials: u64,
    draw_from: &BeliefDistribution,
    seed: u64,
    options: &RunOptions,
) -> Result<ProbabilityEstimate> {
    let mut successes = 0u64;
    let mut draw_rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, 0x64726177, 0));
    for trial in 0..trials {
        let state = sample_state(draw_from, &mut draw_rng);
        let mut opts = options.clone();
        opts.true_state = Some(state);
        let run_seed = derive_seed(seed, 0x7472696c, trial);
        let mut run = AgreementRun::new(task, task_index, graph, channel, &opts, run_seed)?;
        run.run()?;
        if run.into_result().outcome.agreed {
            successes += 1;
        }
    }
    let (ci_low, ci_high) = wilson_interval(successes, trials);
    Ok(ProbabilityEstimate {
        task: task_index,
        measure: String::new(),
        agent: None,
        successes,
        trials,
        p_hat: successes as f64 / trials as f64,
        ci_low,
        ci_high,
    })
}

/// Exact inverse-CDF draw with 64-bit resolution.
pub fn sample_state<R: Rng + ?Sized>(dist: &BeliefDistribution, rng: &mut R) -> usize {
    let u = Rat::new(rng.random_range(0..u64::MAX).into(), num_bigint::BigInt::from(u64::MAX));
    let mut acc = Rat::zero();
    for (s, m) in dist.masses().iter().enumerate() {
        acc += m;
        if u < acc {
            return s;
        }
    }
    dist.len() - 1
}

fn average_prior(priors: &[BeliefDistribution]) -> Result<BeliefDistribution> {
    let d = priors[0].len();
    let mut mass = vec![Rat::zero(); d];
    for p in priors {
        for (s, m) in p.masses().iter().enumerate() {
            mass[s] += m;
        }
    }
    let n = Rat::from_integer((priors.len() as i64).into());
    BeliefDistribution::new(mass.into_iter().map(|m| m / n.clone()).collect())
}
