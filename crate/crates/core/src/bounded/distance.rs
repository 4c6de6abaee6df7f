//! Statistical distance between bounded and exact protocol transcripts,
//! estimated over an explicit finite predicate family. The reported value
//! lower-bounds the true distance, which quantifies over all Boolean tests.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::bayes::conditional_expectation;
use crate::error::{Error, Result};
use crate::num::{fmt_rat, pow2_neg, rat, round_to_grid, Rat};
use crate::partition::KnowledgePartition;
use crate::protocol::{sample_state, smoothed_offset, ChannelSpec};
use crate::seeding::derive_seed;
use crate::types::TaskSpec;

use super::cost::AgentClass;
use super::tree::{build_sampling_tree, sampling_tree_node_count, tree_conditional_expectation};

/// How a sender turns its information into a transmitted estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolVariant {
    /// Exact conditional expectations.
    Exact,
    /// Sampling-tree estimates with this branching factor.
    Tree { branching: u64 },
}

/// Boolean tests over (state, transcript) pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredicateFamily {
    /// Constant tests only; the distance is identically zero.
    Constants,
    /// Indicators of the realized state.
    StateIndicators,
    /// Indicators of (state, first message value) pairs.
    StateAndFirstMessage,
}

#[derive(Debug, Clone)]
pub struct DistanceEstimate {
    pub max_gap: f64,
    /// 95% half-width of the frequency difference at the maximizing test.
    pub ci_half_width: f64,
    pub predicate_count: usize,
    pub trials: u64,
}

const MAX_DISTANCE_STATES: usize = 4;
const MAX_DISTANCE_ROUNDS: u32 = 4;

/// Monte-Carlo estimate of the largest frequency gap, over the predicate
/// family, between the two variants' (state, transcript) distributions.
/// Both variants consume identical noise and state draws per trial.
#[allow(clippy::too_many_arguments)]
pub fn transcript_statistical_distance(
    task: &TaskSpec,
    partitions: &[KnowledgePartition],
    channel: &ChannelSpec,
    rounds: u32,
    variant_a: ProtocolVariant,
    variant_b: ProtocolVariant,
    trials: u64,
    family: PredicateFamily,
    seed: u64,
    node_budget: u64,
) -> Result<DistanceEstimate> {
    if task.num_states() > MAX_DISTANCE_STATES || rounds > MAX_DISTANCE_ROUNDS {
        return Err(Error::InstanceTooLarge(format!(
            "distance estimation is guarded to D <= {MAX_DISTANCE_STATES}, rounds <= {MAX_DISTANCE_ROUNDS}"
        )));
    }
    if trials == 0 {
        return Err(Error::ConfigInvalid("trials must be at least 1".into()));
    }
    if task.num_agents() < 2 || partitions.len() != task.num_agents() {
        return Err(Error::DimensionMismatch {
            left: partitions.len(),
            right: task.num_agents(),
        });
    }
    for variant in [variant_a, variant_b] {
        if let ProtocolVariant::Tree { branching } = variant {
            let nodes = sampling_tree_node_count(branching, rounds.max(1));
            if nodes > node_budget as u128 {
                return Err(Error::BudgetExceeded(format!(
                    "variant needs {nodes} tree nodes, budget is {node_budget}"
                )));
            }
        }
    }

    if matches!(family, PredicateFamily::Constants) {
        return Ok(DistanceEstimate {
            max_gap: 0.0,
            ci_half_width: 0.0,
            predicate_count: 1,
            trials,
        });
    }

    // Tally keys: state alone, or state plus the first message's label.
    let mut counts_a: BTreeMap<String, u64> = BTreeMap::new();
    let mut counts_b: BTreeMap<String, u64> = BTreeMap::new();
    for trial in 0..trials {
        let trial_seed = derive_seed(seed, 0x64697374, trial);
        let mut draw_rng = ChaCha12Rng::seed_from_u64(derive_seed(trial_seed, 0x73746174, 0));
        let state = sample_state(&task.priors[0], &mut draw_rng);
        let run = |variant: ProtocolVariant| -> Result<Vec<Rat>> {
            run_transcript(task, partitions, channel, rounds, variant, state, trial_seed)
        };
        let ta = run(variant_a)?;
        let tb = run(variant_b)?;
        let key = |transcript: &[Rat]| -> String {
            match family {
                PredicateFamily::Constants => unreachable!(),
                PredicateFamily::StateIndicators => format!("s{state}"),
                PredicateFamily::StateAndFirstMessage => {
                    let first = transcript.first().map(fmt_rat).unwrap_or_default();
                    format!("s{state}|{first}")
                }
            }
        };
        *counts_a.entry(key(&ta)).or_default() += 1;
        *counts_b.entry(key(&tb)).or_default() += 1;
    }

    let mut keys: Vec<&String> = counts_a.keys().chain(counts_b.keys()).collect();
    keys.sort();
    keys.dedup();
    let predicate_count = keys.len();
    let n = trials as f64;
    let mut max_gap = 0.0f64;
    let mut ci_half_width = 0.0f64;
    for key in keys {
        let pa = *counts_a.get(key).unwrap_or(&0) as f64 / n;
        let pb = *counts_b.get(key).unwrap_or(&0) as f64 / n;
        let gap = (pa - pb).abs();
        if gap >= max_gap {
            max_gap = gap;
            let z = 1.959_963_984_540_054f64;
            ci_half_width =
                z * ((pa * (1.0 - pa) / n) + (pb * (1.0 - pb) / n)).sqrt();
        }
    }
    Ok(DistanceEstimate { max_gap, ci_half_width, predicate_count, trials })
}

/// Tiny two-agent alternating exchange on the smoothed channel, emitting
/// the sequence of payloads. The noise stream depends only on the trial
/// seed, so matched variants differ only through their estimates.
fn run_transcript(
    task: &TaskSpec,
    partitions: &[KnowledgePartition],
    channel: &ChannelSpec,
    rounds: u32,
    variant: ProtocolVariant,
    state: usize,
    seed: u64,
) -> Result<Vec<Rat>> {
    let ChannelSpec::Smoothed { bits, offset_range } = channel else {
        return Err(Error::InvalidChannel(
            "transcript distance runs on the smoothed channel".into(),
        ));
    };
    let mut noise_rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, 0x6e6f6973, 0));
    let mut tree_rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, 0x74726565, 0));
    let trees = match variant {
        ProtocolVariant::Exact => None,
        ProtocolVariant::Tree { branching } => {
            let active: Vec<usize> = (0..rounds.max(1)).map(|t| (t as usize) % 2).collect();
            let mut trees = Vec::new();
            for _agent in 0..2 {
                let (tree, _) = build_sampling_tree(
                    task,
                    &active,
                    branching,
                    rounds.max(1),
                    AgentClass::Ai,
                    u64::MAX,
                    &mut tree_rng,
                )?;
                trees.push(tree);
            }
            Some(trees)
        }
    };

    let mut parts = partitions.to_vec();
    let mut history: Vec<Rat> = Vec::new();
    for t in 0..rounds {
        let sender = (t as usize) % 2;
        let cell = parts[sender].cell_of(state).ok_or(Error::InconsistentObservation)?;
        let estimate: Rat = match &trees {
            None => conditional_expectation(&task.priors[sender], &task.objective, cell)?,
            Some(trees) => {
                let est =
                    tree_conditional_expectation(&trees[sender], task, &history, channel, cell)
                        .unwrap_or(0.5);
                Rat::from_float(est.clamp(0.0, 1.0)).unwrap_or_else(|| rat(1, 2))
            }
        };
        let offset = smoothed_offset(*offset_range, &mut noise_rng)?;
        let payload =
            round_to_grid(&estimate, *bits) + Rat::from_integer(offset.into()) * pow2_neg(*bits);
        // Window refinement exactly as in the full protocol, with exact
        // centers; the bounded variant shares it so transcripts differ only
        // through the transmitted values.
        let alpha = channel.alpha().expect("smoothed");
        let sender_part = parts[sender].clone();
        let centers: Vec<Option<Rat>> = sender_part
            .cells()
            .iter()
            .map(|c| {
                if task.priors[sender].cell_mass(c) > Rat::from_integer(0.into()) {
                    conditional_expectation(&task.priors[sender], &task.objective, c)
                        .ok()
                        .map(|e| round_to_grid(&e, *bits))
                } else {
                    None
                }
            })
            .collect();
        let class = |s: usize| -> Option<bool> {
            let center = sender_part.cell_index_of(s).and_then(|k| centers[k].clone())?;
            let gap =
                if payload > center { payload.clone() - center } else { center - payload.clone() };
            Some(gap <= alpha)
        };
        for part in parts.iter_mut() {
            *part = part.split_by_classes(&class);
        }
        history.push(payload);
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{BeliefDistribution, Objective, StateSpace};

    fn tiny_task() -> (TaskSpec, Vec<KnowledgePartition>) {
        let task = TaskSpec::new(
            StateSpace::indexed(0, 2).unwrap(),
            Objective::new(vec![rat(0, 1), rat(1, 1)]).unwrap(),
            vec![
                BeliefDistribution::new(vec![rat(1, 4), rat(3, 4)]).unwrap(),
                BeliefDistribution::new(vec![rat(1, 2), rat(1, 2)]).unwrap(),
            ],
            rat(1, 2),
            rat(1, 2),
        )
        .unwrap();
        let parts = vec![KnowledgePartition::trivial(2); 2];
        (task, parts)
    }

    /// Objective values close together keep the estimator's sampling error
    /// well inside one payload grid step, so the bounded transcript
    /// distribution converges onto the exact one as the tree grows.
    fn clustered_task() -> (TaskSpec, Vec<KnowledgePartition>) {
        let task = TaskSpec::new(
            StateSpace::indexed(0, 2).unwrap(),
            Objective::new(vec![rat(52, 100), rat(61, 100)]).unwrap(),
            vec![
                BeliefDistribution::new(vec![rat(1, 4), rat(3, 4)]).unwrap(),
                BeliefDistribution::new(vec![rat(1, 2), rat(1, 2)]).unwrap(),
            ],
            rat(16, 25),
            rat(1, 2),
        )
        .unwrap();
        let parts = vec![KnowledgePartition::trivial(2); 2];
        (task, parts)
    }

    #[test]
    fn identical_variants_have_zero_distance() {
        let (task, parts) = tiny_task();
        let channel = ChannelSpec::smoothed_for_epsilon(&task.epsilon, None).unwrap();
        let est = transcript_statistical_distance(
            &task,
            &parts,
            &channel,
            2,
            ProtocolVariant::Exact,
            ProtocolVariant::Exact,
            200,
            PredicateFamily::StateAndFirstMessage,
            7,
            1 << 22,
        )
        .unwrap();
        assert_eq!(est.max_gap, 0.0);
    }

    #[test]
    fn constants_family_is_always_zero() {
        let (task, parts) = tiny_task();
        let channel = ChannelSpec::smoothed_for_epsilon(&task.epsilon, None).unwrap();
        let est = transcript_statistical_distance(
            &task,
            &parts,
            &channel,
            1,
            ProtocolVariant::Exact,
            ProtocolVariant::Tree { branching: 8 },
            50,
            PredicateFamily::Constants,
            7,
            1 << 22,
        )
        .unwrap();
        assert_eq!(est.max_gap, 0.0);
    }

    #[test]
    fn large_trees_approach_the_exact_protocol() {
        let (task, parts) = clustered_task();
        let channel = ChannelSpec::smoothed_for_epsilon(&task.epsilon, None).unwrap();
        let gap_at = |branching: u64| {
            transcript_statistical_distance(
                &task,
                &parts,
                &channel,
                1,
                ProtocolVariant::Exact,
                ProtocolVariant::Tree { branching },
                400,
                PredicateFamily::StateAndFirstMessage,
                13,
                1 << 23,
            )
            .unwrap()
            .max_gap
        };
        let coarse = gap_at(8);
        let fine = gap_at(4096);
        assert!(fine <= 0.05, "gap {fine} too large at branching 4096");
        assert!(fine <= coarse, "gap should shrink with branching: {coarse} -> {fine}");
    }

    #[test]
    fn guards_reject_large_instances() {
        let (task, parts) = tiny_task();
        let channel = ChannelSpec::smoothed_for_epsilon(&task.epsilon, None).unwrap();
        assert!(matches!(
            transcript_statistical_distance(
                &task,
                &parts,
                &channel,
                9,
                ProtocolVariant::Exact,
                ProtocolVariant::Exact,
                10,
                PredicateFamily::StateIndicators,
                1,
                1 << 22,
            ),
            Err(Error::InstanceTooLarge(_))
        ));
    }
}
