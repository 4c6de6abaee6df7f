//! Sampling-tree simulation for computationally bounded agents, the
//! human/AI cost model, and the bounded-guarantee parameter evaluators.

mod cost;
mod distance;
mod params;
mod run;
mod tree;

pub use cost::{AgentClass, CostLedger, CostModel, PhaseCosts};
pub use distance::{
    transcript_statistical_distance, DistanceEstimate, PredicateFamily, ProtocolVariant,
};
pub use params::{required_sample_size, wannabe_params, WannabeParams};
pub use run::{run_bounded_agreement, BoundedRunOptions, BoundedRunResult};
pub use tree::{
    build_sampling_tree, history_weights_encoded, sampling_tree_node_count,
    tree_conditional_expectation, tree_expectation, SamplingTree,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{rat, Rat};
    use crate::partition::KnowledgePartition;
    use crate::protocol::CommGraph;
    use crate::types::{BeliefDistribution, Objective, StateSpace, TaskSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn bounded_task(seed: u64) -> (TaskSpec, Vec<KnowledgePartition>) {
        let d = 4;
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let dist = |rng: &mut ChaCha12Rng| {
            let weights: Vec<Rat> = (0..d).map(|_| rat(rng.random_range(1..30i64), 1)).collect();
            BeliefDistribution::from_weights(weights).unwrap()
        };
        let values: Vec<Rat> = (0..d).map(|_| rat(rng.random_range(0..=100i64), 100)).collect();
        let task = TaskSpec::new(
            StateSpace::indexed(0, d).unwrap(),
            Objective::new(values).unwrap(),
            vec![dist(&mut rng), dist(&mut rng)],
            rat(1, 2),
            rat(1, 2),
        )
        .unwrap();
        let parts = vec![
            KnowledgePartition::new(d, vec![vec![0, 1], vec![2, 3]]).unwrap(),
            KnowledgePartition::new(d, vec![vec![0, 2], vec![1, 3]]).unwrap(),
        ];
        (task, parts)
    }

    #[test]
    fn bounded_run_mostly_agrees_at_loose_tolerances() {
        let graph = CommGraph::complete(2).unwrap();
        let model = CostModel::unit(1);
        let mut agreed = 0;
        for seed in 0..25u64 {
            let (task, parts) = bounded_task(900 + seed);
            let options = BoundedRunOptions {
                initial_partitions: Some(parts),
                ..BoundedRunOptions::default()
            };
            let results = run_bounded_agreement(
                &[task],
                &graph,
                &model,
                64,
                &rat(1, 80),
                seed,
                &options,
            )
            .unwrap();
            agreed += results[0].agreed as u32;
        }
        assert!(agreed >= 23, "only {agreed}/25 bounded runs agreed");
    }

    #[test]
    fn ledger_totals_match_recomputed_counts() {
        let graph = CommGraph::complete(2).unwrap();
        let model = CostModel::unit(1);
        let (task, parts) = bounded_task(17);
        let options = BoundedRunOptions {
            initial_partitions: Some(parts),
            true_state: Some(2),
            ..BoundedRunOptions::default()
        };
        let results =
            run_bounded_agreement(&[task], &graph, &model, 8, &rat(1, 80), 5, &options).unwrap();
        let r = &results[0];
        let nodes = sampling_tree_node_count(8, options.tree_height) as u64;
        let find = r.costs.find_cp;
        // Two agents, one tree each: every node costs a sample and an eval.
        if find != Default::default() {
            assert_eq!(find.samples_human + find.samples_ai, 2 * nodes);
            assert_eq!(find.evals_human + find.evals_ai, 2 * nodes);
            assert_eq!(find.samples_human, nodes);
        }
        let construct = r.costs.construct_cp;
        if r.posterior_samples_per_agent > 0 {
            assert_eq!(
                construct.samples_human + construct.samples_ai,
                2 * r.posterior_samples_per_agent
            );
            assert_eq!(construct.evals_human + construct.evals_ai, 0);
        }
        // With unit costs, total = all samples + all evals.
        let all = r.costs.combined();
        assert_eq!(
            all.total(&model),
            all.samples_human + all.samples_ai + all.evals_human + all.evals_ai
        );
    }

    #[test]
    fn shared_priors_shortcut_the_search() {
        let graph = CommGraph::complete(2).unwrap();
        let model = CostModel::unit(1);
        let (mut task, parts) = bounded_task(33);
        let shared = task.priors[0].clone();
        task.priors = vec![shared.clone(), shared];
        let options = BoundedRunOptions {
            initial_partitions: Some(parts),
            ..BoundedRunOptions::default()
        };
        let results =
            run_bounded_agreement(&[task], &graph, &model, 16, &rat(1, 80), 3, &options).unwrap();
        assert!(results[0].agreed);
    }

    #[test]
    fn mismatched_priors_trigger_early_disagreement_surprises() {
        // Sign-flip priors keep the agents' expectations nu/2 apart, far
        // beyond the noise half-width, so the first block of messages lands
        // outside some receiver's own window on almost every seed.
        let graph = CommGraph::complete(2).unwrap();
        let model = CostModel::unit(1);
        let mut early = 0u32;
        let trials = 50u64;
        for seed in 0..trials {
            let inst =
                crate::instances::gen_type1_priors(2, 4, &rat(1, 2), &rat(1, 5)).unwrap();
            let mut task = inst.tasks[0].clone();
            // Tight enough that the run cannot agree outright, while the
            // realized noise floor stays far below the expectation gap.
            task.epsilon = rat(1, 4);
            let paired = KnowledgePartition::new(4, vec![vec![0, 1], vec![2, 3]]).unwrap();
            let options = BoundedRunOptions {
                initial_partitions: Some(vec![paired.clone(), paired]),
                true_state: Some(1),
                ..BoundedRunOptions::default()
            };
            let results = run_bounded_agreement(
                &[task],
                &graph,
                &model,
                64,
                &rat(1, 80),
                seed,
                &options,
            )
            .unwrap();
            let r = &results[0];
            if let Some(first) = r.first_disagreement_message {
                // One block is 2 (N - 1) = 2 messages here.
                if first <= 2 {
                    early += 1;
                }
            }
        }
        assert!(early as f64 >= 0.9 * trials as f64, "only {early}/{trials} early surprises");
    }

    #[test]
    fn estimate_error_shrinks_like_root_branching() {
        // Empty-history estimates are means of B draws, so the average
        // error contracts by about 1/2 when B quadruples.
        let d = 4;
        let channel = crate::protocol::ChannelSpec::smoothed(8, 3).unwrap();
        let mut avg_error = |branching: u64| -> f64 {
            let mut total = 0.0f64;
            let trials = 60u64;
            for seed in 0..trials {
                let mut rng = ChaCha12Rng::seed_from_u64(9000 + seed);
                let (task, _) = bounded_task(300 + seed);
                let exact = crate::num::to_f64(
                    &crate::bayes::conditional_expectation(
                        &task.priors[0],
                        &task.objective,
                        &(0..d).collect::<Vec<_>>(),
                    )
                    .unwrap(),
                );
                let (tree, _) = build_sampling_tree(
                    &task,
                    &[0, 1],
                    branching,
                    2,
                    AgentClass::Ai,
                    1 << 24,
                    &mut rng,
                )
                .unwrap();
                let est = tree_expectation(&tree, &task, &[], &channel).unwrap();
                total += (est - exact).abs();
            }
            total / trials as f64
        };
        let coarse = avg_error(64);
        let fine = avg_error(1024);
        // 16x branching predicts a 4x contraction; allow generous slack.
        assert!(
            fine <= 0.55 * coarse,
            "error {fine} did not shrink from {coarse} with 16x branching"
        );
    }

    #[test]
    fn replay_is_deterministic() {
        let graph = CommGraph::complete(2).unwrap();
        let model = CostModel::unit(1);
        let (task, parts) = bounded_task(71);
        let options = BoundedRunOptions {
            initial_partitions: Some(parts),
            ..BoundedRunOptions::default()
        };
        let a = run_bounded_agreement(&[task.clone()], &graph, &model, 16, &rat(1, 80), 9, &options)
            .unwrap();
        let b = run_bounded_agreement(&[task], &graph, &model, 16, &rat(1, 80), 9, &options)
            .unwrap();
        assert_eq!(a[0].agreed, b[0].agreed);
        assert_eq!(a[0].costs, b[0].costs);
        assert_eq!(a[0].transcript.messages.len(), b[0].transcript.messages.len());
        for (ma, mb) in a[0].transcript.messages.iter().zip(&b[0].transcript.messages) {
            assert_eq!(ma.payload, mb.payload);
        }
    }
}
