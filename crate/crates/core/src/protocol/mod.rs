//! Message schedules, channels, and the agreement meta-protocol.

mod channel;
mod graph;
mod run;
mod transcript;

pub use channel::{
    bbf_channel, bbf_likelihood, check_agreement, discretize_bucket, smoothed_offset,
    smoothed_offset_pmf, BitCost, Bucket, ChannelKind, ChannelSpec,
};
pub use graph::{build_spanning_schedule, CommGraph, SpanningSchedule};
pub use run::{
    estimate_agreement_probability, run_agreement, sample_state, wilson_interval, AgreementRun,
    Measure, ProbabilityEstimate, RoundCap, RunOptions,
};
pub use transcript::{
    AgreementOutcome, Message, Payload, RoundSnapshot, TaskRunResult, Termination, Transcript,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::gen_type1_priors;
    use crate::num::{rat, Rat};
    use crate::partition::KnowledgePartition;
    use crate::types::{BeliefDistribution, Objective, StateSpace, TaskSpec};
    use num_traits::Zero;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn small_task(num_agents: usize, d: usize, seed: u64) -> TaskSpec {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let rand_dist = |rng: &mut ChaCha12Rng| {
            let weights: Vec<Rat> = (0..d)
                .map(|_| rat(rand::Rng::random_range(rng, 1..40i64), 1))
                .collect();
            BeliefDistribution::from_weights(weights).unwrap()
        };
        let values: Vec<Rat> = (0..d)
            .map(|_| rat(rand::Rng::random_range(&mut rng, 0..=100i64), 100))
            .collect();
        let priors: Vec<BeliefDistribution> = (0..num_agents).map(|_| rand_dist(&mut rng)).collect();
        TaskSpec::new(
            StateSpace::indexed(0, d).unwrap(),
            Objective::new(values).unwrap(),
            priors,
            rat(1, 10),
            rat(1, 10),
        )
        .unwrap()
    }

    /// Complementary coordinate partitions whose join is the singletons.
    fn grid_partitions(d: usize) -> Vec<KnowledgePartition> {
        let rows = d / 2;
        let row_cells: Vec<Vec<usize>> = (0..rows).map(|r| vec![2 * r, 2 * r + 1]).collect();
        let col_cells: Vec<Vec<usize>> = (0..2)
            .map(|c| (0..rows).map(|r| 2 * r + c).collect())
            .collect();
        vec![
            KnowledgePartition::new(d, row_cells).unwrap(),
            KnowledgePartition::new(d, col_cells).unwrap(),
        ]
    }

    #[test]
    fn identical_trivial_agents_agree_at_round_zero() {
        let d = 3;
        let shared = BeliefDistribution::uniform(d).unwrap();
        let task = TaskSpec::new(
            StateSpace::indexed(0, d).unwrap(),
            Objective::new(vec![rat(0, 1), rat(1, 2), rat(1, 1)]).unwrap(),
            vec![shared.clone(), shared],
            rat(1, 10),
            rat(1, 10),
        )
        .unwrap();
        let graph = CommGraph::complete(2).unwrap();
        let results =
            run_agreement(&[task], &graph, &ChannelSpec::Continuous, 1, &RunOptions::default())
                .unwrap();
        let outcome = &results[0].outcome;
        assert!(outcome.agreed);
        assert_eq!(outcome.rounds_to_agreement, Some(0));
        assert_eq!(outcome.rounds_to_common_prior, Some(0));
        assert_eq!(outcome.messages_sent, 0);
    }

    #[test]
    fn random_full_support_run_reaches_agreement() {
        let task = small_task(2, 4, 42);
        let graph = CommGraph::complete(2).unwrap();
        let options = RunOptions {
            initial_partitions: Some(grid_partitions(4)),
            ..RunOptions::default()
        };
        let results =
            run_agreement(&[task.clone()], &graph, &ChannelSpec::Continuous, 7, &options).unwrap();
        let outcome = &results[0].outcome;
        assert!(outcome.agreed, "outcome: {:?}", outcome.termination);
        // Rounds to a common prior are bounded by N * D proper refinements.
        assert!(outcome.rounds_to_common_prior.unwrap() <= 2 * 4);
        results[0].transcript.validate().unwrap();
    }

    #[test]
    fn mismatched_priors_with_zero_cap_do_not_agree() {
        let inst = gen_type1_priors(2, 3, &rat(1, 2), &rat(1, 4)).unwrap();
        let graph = CommGraph::complete(2).unwrap();
        let options = RunOptions {
            round_cap: RoundCap::Explicit(0),
            initial_partitions: Some(inst.partitions.clone()),
            true_state: Some(1),
            ..RunOptions::default()
        };
        let results =
            run_agreement(&inst.tasks, &graph, &ChannelSpec::Continuous, 3, &options).unwrap();
        let outcome = &results[0].outcome;
        assert!(!outcome.agreed);
        assert_eq!(outcome.termination, Termination::RoundCapExceeded);
        assert!(outcome.rounds_to_common_prior.is_none());
    }

    #[test]
    fn discretized_runs_match_continuous_and_cost_two_bits() {
        let d = 8;
        let mut agree_continuous = 0;
        let mut agree_discrete = 0;
        for seed in 0..10u64 {
            let shared_task = {
                let mut t = small_task(2, d, 100 + seed);
                let shared = t.priors[0].clone();
                t.priors = vec![shared.clone(), shared];
                t
            };
            let graph = CommGraph::complete(2).unwrap();
            let options = RunOptions {
                initial_partitions: Some(grid_partitions(d)),
                true_state: Some((seed % d as u64) as usize),
                ..RunOptions::default()
            };
            let cont = run_agreement(
                &[shared_task.clone()],
                &graph,
                &ChannelSpec::Continuous,
                seed,
                &options,
            )
            .unwrap();
            let disc = run_agreement(
                &[shared_task],
                &graph,
                &ChannelSpec::Discretized,
                seed,
                &options,
            )
            .unwrap();
            agree_continuous += cont[0].outcome.agreed as u32;
            agree_discrete += disc[0].outcome.agreed as u32;
            for m in &disc[0].transcript.messages {
                assert_eq!(m.bit_cost, BitCost::Bits(2));
            }
            assert_eq!(disc[0].outcome.coarsening_violations, 0);
        }
        assert_eq!(agree_continuous, 10);
        assert_eq!(agree_discrete, 10);
    }

    #[test]
    fn smoothed_channel_payloads_stay_on_grid_within_range() {
        let mut task = small_task(2, 4, 5);
        task.epsilon = rat(7, 10);
        let channel = ChannelSpec::smoothed_for_epsilon(&task.epsilon, None).unwrap();
        let alpha = channel.alpha().unwrap();
        let graph = CommGraph::complete(2).unwrap();
        let options = RunOptions {
            initial_partitions: Some(grid_partitions(4)),
            round_cap: RoundCap::Explicit(50),
            ..RunOptions::default()
        };
        let results = run_agreement(&[task], &graph, &channel, 11, &options).unwrap();
        let lo = -alpha.clone();
        let hi = Rat::from_integer(1.into()) + alpha;
        let bits = match &channel {
            ChannelSpec::Smoothed { bits, .. } => *bits,
            _ => unreachable!(),
        };
        for m in &results[0].transcript.messages {
            if let Payload::Grid(v) = &m.payload {
                assert!(v >= &lo && v <= &hi, "payload {v} outside [-a, 1+a]");
                assert!(
                    (v.clone() * crate::num::pow2(bits)).is_integer(),
                    "payload {v} must be a multiple of 2^-{bits}"
                );
            } else {
                panic!("smoothed channel must emit grid payloads");
            }
        }
    }

    #[test]
    fn identical_inputs_give_bit_identical_transcripts() {
        let task = small_task(2, 6, 77);
        let graph = CommGraph::complete(2).unwrap();
        let channel = ChannelSpec::smoothed_for_epsilon(&task.epsilon, None)
            .unwrap_or(ChannelSpec::Continuous);
        let options = RunOptions {
            round_cap: RoundCap::Explicit(40),
            initial_partitions: Some(grid_partitions(6)),
            ..RunOptions::default()
        };
        let a = run_agreement(&[task.clone()], &graph, &channel, 99, &options).unwrap();
        let b = run_agreement(&[task], &graph, &channel, 99, &options).unwrap();
        assert_eq!(a[0].transcript.messages, b[0].transcript.messages);
        assert_eq!(a[0].transcript.snapshots, b[0].transcript.snapshots);
        assert_eq!(a[0].outcome.refinement_indices, b[0].outcome.refinement_indices);
    }

    #[test]
    fn bbf_chain_gap_increments_respect_bound() {
        let inst = crate::instances::gen_uniform_slope_priors(4, &rat(1, 2)).unwrap();
        let graph = CommGraph::complete(2).unwrap();
        let channel = ChannelSpec::bbf(rat(1, 5)).unwrap();
        let beta = channel.likelihood_ratio_bound().unwrap();
        let options = RunOptions {
            round_cap: RoundCap::Explicit(30),
            initial_partitions: Some(grid_partitions(4)),
            ..RunOptions::default()
        };
        let results = run_agreement(&inst.tasks, &graph, &channel, 19, &options).unwrap();
        let bound_per_bit = crate::num::to_f64(&beta).ln();
        let increments = &results[0].outcome.chain_gap_increments;
        assert!(!increments.is_empty());
        for (bits, inc) in increments {
            assert!(*inc <= 2.0 * (*bits as f64) * bound_per_bit + 1e-12);
        }
    }

    #[test]
    fn estimators_return_certain_agreement_for_shared_beliefs() {
        let d = 4;
        let shared = BeliefDistribution::uniform(d).unwrap();
        let task = TaskSpec::new(
            StateSpace::indexed(0, d).unwrap(),
            Objective::new(vec![rat(0, 1), rat(1, 4), rat(1, 2), rat(1, 1)]).unwrap(),
            vec![shared.clone(), shared],
            rat(1, 10),
            rat(1, 10),
        )
        .unwrap();
        let graph = CommGraph::complete(2).unwrap();
        let est = estimate_agreement_probability(
            &[task],
            &graph,
            &ChannelSpec::Continuous,
            40,
            Measure::WorstCase,
            23,
            &RunOptions::default(),
        )
        .unwrap();
        assert_eq!(est[0].p_hat, 1.0);
        assert!(est[0].ci_low > 0.9);
    }

    #[test]
    fn sampling_respects_masses() {
        let dist = BeliefDistribution::new(vec![rat(3, 4), rat(1, 4), Rat::zero()]).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let mut counts = [0u32; 3];
        for _ in 0..4000 {
            counts[sample_state(&dist, &mut rng)] += 1;
        }
        assert_eq!(counts[2], 0);
        let f = counts[0] as f64 / 4000.0;
        assert!((f - 0.75).abs() < 0.03);
    }

    #[test]
    fn knowledge_is_monotone_and_bounded() {
        for seed in 0..10u64 {
            let d = 8;
            let n = 3;
            let mut task = small_task(n, d, 700 + seed);
            let shared = task.priors[0].clone();
            task.priors = vec![shared; n];
            let graph = CommGraph::complete(n).unwrap();
            let mut parts = grid_partitions(d);
            parts.push(KnowledgePartition::trivial(d));
            let options = RunOptions {
                initial_partitions: Some(parts),
                ..RunOptions::default()
            };
            let results =
                run_agreement(&[task], &graph, &ChannelSpec::Discretized, seed, &options).unwrap();
            let totals: Vec<usize> = results[0]
                .transcript
                .snapshots
                .iter()
                .map(|snap| snap.partition_sizes.iter().sum())
                .collect();
            for w in totals.windows(2) {
                assert!(w[1] >= w[0], "cell totals must not shrink: {totals:?}");
            }
            assert!(totals.iter().all(|&t| t <= n * d));
        }
    }

    #[test]
    fn cadence_windows_have_refinements_on_shared_prior_runs() {
        for seed in 0..20u64 {
            let d = 8;
            let mut task = small_task(3, d, 500 + seed);
            let shared = task.priors[0].clone();
            task.priors = vec![shared.clone(), shared.clone(), shared];
            let graph = CommGraph::ring(3).unwrap();
            let mut parts = grid_partitions(d);
            parts.push(KnowledgePartition::trivial(d));
            let options = RunOptions {
                initial_partitions: Some(parts),
                ..RunOptions::default()
            };
            let results =
                run_agreement(&[task], &graph, &ChannelSpec::Continuous, seed, &options).unwrap();
            assert!(results[0].outcome.agreed);
            assert_eq!(results[0].outcome.cadence_violations, 0);
        }
    }
}
