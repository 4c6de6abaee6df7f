//! Seeded experiment execution: one function per experiment kind, all
//! deterministic in (config, seed).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde_json::{json, Value};

use crate::bounded::{
    required_sample_size, run_bounded_agreement, sampling_tree_node_count, wannabe_params,
    BoundedRunOptions, CostModel,
};
use crate::common_prior::{
    brute_force_common_prior, construct_common_prior_with, ratio_constraints, size_condition_holds,
    verify_common_prior, BruteForceMode, ConstraintScope,
};
use crate::error::{Error, Result};
use crate::instances::{
    expected_shortfall_bernoulli, expected_shortfall_general, expected_shortfall_tail_average,
    gen_needle_priors, gen_sum_instance, gen_type1_priors, gen_uniform_slope_priors,
    needle_miss_probability, optimal_t_bit_agreement,
};
use crate::num::{fmt_rat, parse_rat, pow2, rat, rat_one, to_f64, Rat};
use crate::partition::KnowledgePartition;
use crate::protocol::{run_agreement, wilson_interval, RoundCap, RunOptions};
use crate::seeding::derive_seed;
use crate::types::{BeliefDistribution, Objective, StateSpace, TaskSpec, TypeProfile};

use super::config::{
    AgreementParams, ExperimentConfig, ExperimentKind, InstanceConfig, NeedleParams,
};
use super::rows::ResultRow;

/// Rows plus an optional experiment-level summary.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub rows: Vec<ResultRow>,
    pub summary: Option<Value>,
}

/// Executes one experiment; rows are canonical in trial order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunArtifacts> {
    config.validate()?;
    match &config.kind {
        ExperimentKind::Agreement(params) => run_agreement_experiment(config, params, None),
        ExperimentKind::ConstructPrior(params) => run_construct_prior(config, params),
        ExperimentKind::LowerBound(params) => run_lower_bound(config, params),
        ExperimentKind::Bounded(params) => run_bounded(config, params),
        ExperimentKind::Needle(params) => run_needle(config, params),
        ExperimentKind::TailRisk(params) => run_tail_risk(config, params),
        ExperimentKind::Sweep(params) => sweep(config, params),
    }
}

/// Grid execution over tolerances with per-cell derived seeds and a
/// rounds-versus-tolerance scaling summary.
pub fn sweep(
    config: &ExperimentConfig,
    params: &super::config::SweepParams,
) -> Result<RunArtifacts> {
    if params.epsilons.is_empty() {
        return Err(Error::ConfigInvalid("sweep grid must be non-empty".into()));
    }
    let mut all_rows = Vec::new();
    let mut cells = Vec::new();
    for (cell, eps_text) in params.epsilons.iter().enumerate() {
        let epsilon = parse_rat(eps_text)?;
        let mut base = params.base.clone();
        base.instance.epsilon = eps_text.clone();
        let cell_config = ExperimentConfig {
            kind: ExperimentKind::Agreement(base.clone()),
            seed: derive_seed(config.seed, 0x73776565, cell as u64),
            trials: config.trials,
            out: None,
            format: config.format,
            budget: config.budget,
        };
        let arts = run_agreement_experiment(&cell_config, &base, Some(eps_text))?;
        let mut rounds: Vec<f64> = arts
            .rows
            .iter()
            .filter_map(|r| r.metric_f64("rounds"))
            .collect();
        rounds.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let median = if rounds.is_empty() {
            f64::NAN
        } else {
            rounds[rounds.len() / 2]
        };
        cells.push((to_f64(&epsilon), median, eps_text.clone()));
        all_rows.extend(arts.rows);
    }
    // Fit rounds <= c / (delta eps^2) and a log-log scaling exponent.
    let delta = parse_rat(&params.base.instance.delta)?;
    let delta_f = to_f64(&delta);
    let fitted_c = cells
        .iter()
        .map(|(eps, median, _)| median.max(0.0) * delta_f * eps * eps)
        .fold(0.0f64, f64::max);
    let exponent = {
        let points: Vec<(f64, f64)> = cells
            .iter()
            .map(|(eps, median, _)| ((1.0 / eps).ln(), median.max(1.0).ln()))
            .collect();
        let n = points.len() as f64;
        let sx: f64 = points.iter().map(|p| p.0).sum();
        let sy: f64 = points.iter().map(|p| p.1).sum();
        let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
        let denom = n * sxx - sx * sx;
        if denom.abs() < 1e-12 {
            0.0
        } else {
            (n * sxy - sx * sy) / denom
        }
    };
    let monotone = cells.windows(2).all(|w| w[1].1 >= w[0].1 - 1e-9);
    let summary = json!({
        "cells": cells
            .iter()
            .map(|(eps, median, text)| json!({"epsilon": text, "epsilon_f64": eps, "median_rounds": median}))
            .collect::<Vec<_>>(),
        "fitted_c": fitted_c,
        "rounds_exponent_vs_inverse_epsilon": exponent,
        "median_rounds_monotone_in_shrinking_epsilon": monotone,
    });
    Ok(RunArtifacts { rows: all_rows, summary: Some(summary) })
}

fn run_agreement_experiment(
    config: &ExperimentConfig,
    params: &AgreementParams,
    cell_label: Option<&str>,
) -> Result<RunArtifacts> {
    let trials = config.trials();
    let mut rows = Vec::with_capacity(trials as usize);
    for trial in 0..trials {
        let seed = derive_seed(config.seed, 0x61677265, trial);
        let (tasks, partitions) = build_instance(&params.instance, seed)?;
        let epsilon = parse_rat(&params.instance.epsilon)?;
        let channel = params.channel.build(&epsilon)?;
        let graph = params.graph.build(params.instance.agents.max(tasks[0].num_agents()))?;
        let round_cap = match (params.round_cap, params.cap_scale) {
            (Some(explicit), _) => RoundCap::Explicit(explicit),
            (None, Some(scale)) => RoundCap::Formula { scale_down: scale },
            (None, None) => RoundCap::Formula { scale_down: 256 },
        };
        let options = RunOptions {
            round_cap,
            initial_partitions: Some(partitions),
            ..RunOptions::default()
        };
        let results = run_agreement(&tasks, &graph, &channel, seed, &options)?;
        for result in results {
            let o = &result.outcome;
            let mut row = ResultRow::new("agreement", trial)
                .param("family", &params.instance.family)
                .param("agents", tasks[0].num_agents())
                .param("states", tasks[0].num_states())
                .param("epsilon", &params.instance.epsilon)
                .param("delta", &params.instance.delta)
                .param(
                    "channel",
                    params.channel.channel.as_deref().unwrap_or("continuous"),
                )
                .param("task", result.transcript.task)
                .metric("agreed", o.agreed)
                .metric("termination", o.termination.label())
                .metric("true_state", o.true_state)
                .metric("rounds", o.rounds_run)
                .metric("messages", o.messages_sent)
                .metric(
                    "bits",
                    o.bits_sent.map(|b| b.to_string()).unwrap_or_else(|| "unbounded".into()),
                )
                .metric("cadence_violations", o.cadence_violations)
                .metric("coarsening_violations", o.coarsening_violations)
                .metric("refinements", o.refinement_indices.len())
                .metric("final_max_tv", o.final_max_tv);
            if let Some(r) = o.rounds_to_common_prior {
                row = row.metric("rounds_to_common_prior", r);
            }
            if let Some(r) = o.rounds_to_agreement {
                row = row.metric("rounds_to_agreement", r);
            }
            if let Some(max_inc) = o
                .chain_gap_increments
                .iter()
                .map(|(_, inc)| *inc)
                .fold(None::<f64>, |acc, v| Some(acc.map_or(v, |a| a.max(v))))
            {
                row = row.metric("max_chain_gap_increment", max_inc);
            }
            if let Some(label) = cell_label {
                row = row.param("sweep_epsilon", label);
            }
            rows.push(row);
        }
    }
    Ok(RunArtifacts { rows, summary: None })
}

fn run_construct_prior(
    config: &ExperimentConfig,
    params: &super::config::ConstructPriorParams,
) -> Result<RunArtifacts> {
    let trials = config.trials();
    let construct = params.scope.construct_options();
    let mut rows = Vec::with_capacity(trials as usize);
    let mut feasible_count = 0u64;
    for trial in 0..trials {
        let seed = derive_seed(config.seed, 0x63707269, trial);
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let partitions = if params.hold_size_condition {
            size_condition_profile(params.agents, params.states, &mut rng)
        } else {
            (0..params.agents)
                .map(|_| random_partition(params.states, &mut rng))
                .collect()
        };
        let profile = random_profile(&partitions, &mut rng);
        let result = construct_common_prior_with(&partitions, &profile, &construct)?;
        let feasible = result.is_feasible();
        feasible_count += feasible as u64;
        let verified = result
            .prior()
            .map(|p| verify_common_prior(p, &partitions, &profile))
            .unwrap_or(false);
        let constraints =
            ratio_constraints(&partitions, &profile, ConstraintScope::WholeCell)?.len();
        let mut row = ResultRow::new("construct_prior", trial)
            .param("agents", params.agents)
            .param("states", params.states)
            .param("hold_size_condition", params.hold_size_condition)
            .metric("feasible", feasible)
            .metric("verified", verified)
            .metric("size_condition", size_condition_holds(&partitions)?)
            .metric("constraints", constraints);
        if params.check_oracle {
            let oracle = brute_force_common_prior(&partitions, &profile, BruteForceMode::Exact)?;
            row = row.metric("oracle_match", oracle.is_feasible() == feasible);
        }
        rows.push(row);
    }
    let summary = json!({
        "feasible_rate": feasible_count as f64 / trials as f64,
        "trials": trials,
    });
    Ok(RunArtifacts { rows, summary: Some(summary) })
}

fn run_lower_bound(
    _config: &ExperimentConfig,
    params: &super::config::LowerBoundParams,
) -> Result<RunArtifacts> {
    let mut rows = Vec::new();
    let mut trial = 0u64;
    for &n in &params.n_bits {
        for &t in &params.summary_bits {
            for eps_text in &params.epsilons {
                let epsilon = parse_rat(eps_text)?;
                let value = optimal_t_bit_agreement(n, t, &epsilon)?;
                let corrected = {
                    let raw = (epsilon.clone() * pow2(n + 2) + rat_one()) * pow2(t) / pow2(n);
                    if raw > rat_one() {
                        rat_one()
                    } else {
                        raw
                    }
                };
                let paper_envelope = rat(2, 1) * epsilon.clone() * pow2(t);
                rows.push(
                    ResultRow::new("lower_bound", trial)
                        .param("n", n)
                        .param("t", t)
                        .param("epsilon", eps_text)
                        .metric("value", fmt_rat(&value))
                        .metric("value_f64", to_f64(&value))
                        .metric("corrected_envelope", fmt_rat(&corrected))
                        .metric("within_corrected", value <= corrected)
                        .metric("paper_envelope_f64", to_f64(&paper_envelope)),
                );
                trial += 1;
            }
        }
    }
    Ok(RunArtifacts { rows, summary: None })
}

fn run_bounded(
    config: &ExperimentConfig,
    params: &super::config::BoundedParams,
) -> Result<RunArtifacts> {
    let trials = config.trials();
    let alpha = parse_rat(&params.alpha)?;
    let humans = params.humans.unwrap_or(1);
    let model = CostModel::unit(humans);
    let mut rows = Vec::with_capacity(trials as usize);
    let mut agreed_count = 0u64;
    for trial in 0..trials {
        let seed = derive_seed(config.seed, 0x626e6471, trial);
        let (tasks, partitions) = build_instance(&params.instance, seed)?;
        let graph = params.graph.build(tasks[0].num_agents())?;
        let mut options = BoundedRunOptions {
            initial_partitions: Some(partitions),
            ..BoundedRunOptions::default()
        };
        if let Some(h) = params.tree_height {
            options.tree_height = h;
            options.post_prior_height = h;
        }
        if let Some(budget) = config.budget {
            options.node_budget = budget;
        }
        let results = run_bounded_agreement(
            &tasks,
            &graph,
            &model,
            params.branching,
            &alpha,
            seed,
            &options,
        )?;
        for r in results {
            agreed_count += r.agreed as u64;
            let combined = r.costs.combined();
            rows.push(
                ResultRow::new("bounded", trial)
                    .param("family", &params.instance.family)
                    .param("branching", params.branching)
                    .param("alpha", &params.alpha)
                    .param("agents", tasks[0].num_agents())
                    .param("states", tasks[0].num_states())
                    .param("task", r.task)
                    .metric("agreed", r.agreed)
                    .metric("found_common_prior", r.found_common_prior)
                    .metric("final_gap", r.final_gap)
                    .metric("messages", r.messages_sent)
                    .metric("surprises", r.surprises)
                    .metric("refinements", r.refinements)
                    .metric("tree_nodes", r.tree_nodes_per_agent)
                    .metric("posterior_samples", r.posterior_samples_per_agent)
                    .metric("cost_total_units", combined.total(&model))
                    .metric("cost_samples_human", combined.samples_human)
                    .metric("cost_samples_ai", combined.samples_ai)
                    .metric("cost_evals_human", combined.evals_human)
                    .metric("cost_evals_ai", combined.evals_ai),
            );
        }
    }
    let (ci_low, ci_high) = wilson_interval(agreed_count, trials);
    let summary = json!({
        "agreement_rate": agreed_count as f64 / trials as f64,
        "ci_low": ci_low,
        "ci_high": ci_high,
        "trials": trials,
        "tree_nodes_per_agent": sampling_tree_node_count(params.branching, 3).to_string(),
    });
    Ok(RunArtifacts { rows, summary: Some(summary) })
}

fn run_needle(config: &ExperimentConfig, params: &NeedleParams) -> Result<RunArtifacts> {
    let trials = config.trials();
    let nu = match &params.nu {
        Some(text) => parse_rat(text)?,
        None => rat_one() / pow2(params.states as u32),
    };
    let inst = gen_needle_priors(params.states, &nu)?;
    let task = &inst.tasks[0];
    let holder = &task.priors[1];
    let epsilon = &task.epsilon;
    let exact_expectation = nu.clone() / rat(2, 1);
    let mut rows = Vec::with_capacity(trials as usize);
    let mut misses = 0u64;
    for trial in 0..trials {
        let seed = derive_seed(config.seed, 0x6e65646c, trial);
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let sampler = holder.sampler();
        let mut hits = 0u64;
        for _ in 0..params.leaves {
            if sampler.draw(&mut rng) == 0 {
                hits += 1;
            }
        }
        let estimate = hits as f64 / params.leaves as f64;
        let error = (estimate - to_f64(&exact_expectation)).abs();
        let missed = hits == 0;
        misses += missed as u64;
        rows.push(
            ResultRow::new("needle", trial)
                .param("states", params.states)
                .param("nu", fmt_rat(&nu))
                .param("leaves", params.leaves)
                .metric("missed", missed)
                .metric("estimate", estimate)
                .metric("error", error)
                .metric("error_at_least_4eps", error >= 4.0 * to_f64(epsilon) - 1e-12),
        );
    }
    let closed_form = needle_miss_probability(&nu, params.leaves);
    let (ci_low, ci_high) = wilson_interval(misses, trials);
    let leaf_threshold = inst.metadata.leaf_threshold.clone().expect("needle threshold");
    let decay_threshold = 2.0 / to_f64(&nu) * 4.0f64.ln();
    let summary = json!({
        "miss_frequency": misses as f64 / trials as f64,
        "closed_form": to_f64(&closed_form),
        "closed_form_exact": fmt_rat(&closed_form),
        "ci_low": ci_low,
        "ci_high": ci_high,
        "leaf_threshold": to_f64(&leaf_threshold),
        "below_threshold_fails_over_quarter":
            (params.leaves as f64) < to_f64(&leaf_threshold) && to_f64(&closed_form) > 0.25,
        "decay_leaves_for_quarter": decay_threshold,
    });
    Ok(RunArtifacts { rows, summary: Some(summary) })
}

fn run_tail_risk(
    config: &ExperimentConfig,
    params: &super::config::TailRiskParams,
) -> Result<RunArtifacts> {
    let tau = parse_rat(&params.tau)?;
    let mut rows = Vec::new();
    if let Some(p_text) = &params.p {
        let p = parse_rat(p_text)?;
        let es = expected_shortfall_bernoulli(&p, &tau)?;
        rows.push(
            ResultRow::new("tail_risk", 0)
                .param("p", p_text)
                .param("tau", &params.tau)
                .metric("expected_shortfall", fmt_rat(&es))
                .metric("expected_shortfall_f64", to_f64(&es)),
        );
    }
    if let Some(dist_text) = &params.distribution {
        let dist: Result<Vec<(Rat, Rat)>> = dist_text
            .iter()
            .map(|(v, p)| Ok((parse_rat(v)?, parse_rat(p)?)))
            .collect();
        let dist = dist?;
        let es = expected_shortfall_general(&dist, &tau)?;
        let tail = expected_shortfall_tail_average(&dist, &tau)?;
        rows.push(
            ResultRow::new("tail_risk", rows.len() as u64)
                .param("support", dist.len())
                .param("tau", &params.tau)
                .metric("expected_shortfall", fmt_rat(&es))
                .metric("expected_shortfall_f64", to_f64(&es))
                .metric("tail_average", fmt_rat(&tail))
                .metric("routes_agree", es == tail),
        );
    }
    let _ = config;
    Ok(RunArtifacts { rows, summary: None })
}

/// Evaluates the sampled-agent parameter formulas as a summary table.
pub fn wannabe_table(
    num_tasks: u64,
    num_agents: u64,
    epsilon: &Rat,
    delta: &Rat,
    rho: &Rat,
    alpha: &Rat,
) -> Result<Value> {
    let p = wannabe_params(num_tasks, num_agents, epsilon, delta, rho, alpha)?;
    Ok(json!({
        "branching_base": fmt_rat(&p.branching_base),
        "branching_exponent": fmt_rat(&p.branching_exponent),
        "branching_log10": p.branching_log10,
        "bits_per_message": p.bits_per_message,
        "rounds_post_prior": fmt_rat(&p.rounds_post_prior),
        "exponent_numerator_main": p.exponent_numerator_main.to_string(),
        "exponent_numerator_rho": p.exponent_numerator_rho.to_string(),
        "sample_size_example": required_sample_size(epsilon, delta)?,
    }))
}

// ---------------------------------------------------------------------------
// Instance builders
// ---------------------------------------------------------------------------

/// Builds one or more tasks plus initial partitions from a config family.
pub fn build_instance(
    inst: &InstanceConfig,
    seed: u64,
) -> Result<(Vec<TaskSpec>, Vec<KnowledgePartition>)> {
    let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, 0x696e7374, 0));
    let epsilon = parse_rat(&inst.epsilon)?;
    let delta = parse_rat(&inst.delta)?;
    let d = inst.states;
    let n = inst.agents;
    let (tasks, generator_partitions) = match inst.family.as_str() {
        "random" => {
            let priors: Vec<BeliefDistribution> =
                (0..n).map(|_| random_distribution(d, &mut rng)).collect::<Result<_>>()?;
            let task = TaskSpec::new(
                StateSpace::indexed(0, d)?,
                random_objective(d, &mut rng)?,
                priors,
                epsilon.clone(),
                delta.clone(),
            )?;
            (vec![task], None)
        }
        "shared_prior" => {
            let shared = random_distribution(d, &mut rng)?;
            let task = TaskSpec::new(
                StateSpace::indexed(0, d)?,
                random_objective(d, &mut rng)?,
                vec![shared; n],
                epsilon.clone(),
                delta.clone(),
            )?;
            (vec![task], None)
        }
        "type1" => {
            let nu = inst.nu.as_deref().map(parse_rat).transpose()?.unwrap_or(rat(1, 2));
            let p = inst.p.as_deref().map(parse_rat).transpose()?.unwrap_or(rat(1, 4));
            let mut generated = gen_type1_priors(n, d, &nu, &p)?;
            for task in &mut generated.tasks {
                task.epsilon = epsilon.clone();
                task.delta = delta.clone();
            }
            (generated.tasks, Some(generated.partitions))
        }
        "uniform_slope" => {
            let nu = inst.nu.as_deref().map(parse_rat).transpose()?.unwrap_or(rat(1, 2));
            let mut generated = gen_uniform_slope_priors(d, &nu)?;
            for task in &mut generated.tasks {
                task.epsilon = epsilon.clone();
                task.delta = delta.clone();
            }
            (generated.tasks, Some(generated.partitions))
        }
        "needle" => {
            let nu = match &inst.nu {
                Some(text) => parse_rat(text)?,
                None => rat_one() / pow2(d as u32),
            };
            let mut generated = gen_needle_priors(d, &nu)?;
            for task in &mut generated.tasks {
                task.epsilon = epsilon.clone();
                task.delta = delta.clone();
            }
            (generated.tasks, Some(generated.partitions))
        }
        "sum" => {
            let bits = inst.input_bits.unwrap_or(2);
            let m = inst.tasks.unwrap_or(1);
            let mut generated = gen_sum_instance(m, n, bits)?;
            for task in &mut generated.tasks {
                task.epsilon = epsilon.clone();
                task.delta = delta.clone();
            }
            (generated.tasks, Some(generated.partitions))
        }
        other => return Err(Error::ConfigInvalid(format!("unknown family {other:?}"))),
    };

    let d = tasks[0].num_states();
    let n = tasks[0].num_agents();
    let partitions = match inst.partitions.as_deref() {
        None | Some("instance") => {
            generator_partitions.unwrap_or_else(|| default_partitions(n, d))
        }
        Some("trivial") => vec![KnowledgePartition::trivial(d); n],
        Some("grid") => grid_partitions(n, d)?,
        Some("random") => (0..n).map(|_| random_partition(d, &mut rng)).collect(),
        Some(other) => {
            return Err(Error::ConfigInvalid(format!("unknown partition family {other:?}")))
        }
    };
    Ok((tasks, partitions))
}

fn default_partitions(n: usize, d: usize) -> Vec<KnowledgePartition> {
    grid_partitions(n, d).unwrap_or_else(|_| vec![KnowledgePartition::trivial(d); n])
}

/// Complementary row/column partitions: the first agent knows the row pair,
/// the second the parity, further agents start uninformed. Their join is
/// the discrete partition.
pub fn grid_partitions(n: usize, d: usize) -> Result<Vec<KnowledgePartition>> {
    if d % 2 != 0 || d < 2 {
        return Err(Error::InvalidPartition(format!(
            "grid partitions need an even state count, got {d}"
        )));
    }
    let rows = d / 2;
    let row_cells: Vec<Vec<usize>> = (0..rows).map(|r| vec![2 * r, 2 * r + 1]).collect();
    let col_cells: Vec<Vec<usize>> =
        (0..2).map(|c| (0..rows).map(|r| 2 * r + c).collect()).collect();
    let mut parts = vec![
        KnowledgePartition::new(d, row_cells)?,
        KnowledgePartition::new(d, col_cells)?,
    ];
    for _ in 2..n {
        parts.push(KnowledgePartition::trivial(d));
    }
    parts.truncate(n.max(1));
    if n == 1 {
        parts.truncate(1);
    }
    Ok(parts)
}

pub fn random_distribution<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<BeliefDistribution> {
    let weights: Vec<Rat> = (0..d).map(|_| rat(rng.random_range(1..100i64), 1)).collect();
    BeliefDistribution::from_weights(weights)
}

pub fn random_objective<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<Objective> {
    Objective::new((0..d).map(|_| rat(rng.random_range(0..=1000i64), 1000)).collect())
}

/// Uniformly random partition shape: each state picks one of about
/// `sqrt(D) + 1` groups, empty groups dropped.
pub fn random_partition<R: Rng + ?Sized>(d: usize, rng: &mut R) -> KnowledgePartition {
    let groups = ((d as f64).sqrt() as usize + 1).max(2);
    let mut cells: Vec<Vec<usize>> = vec![Vec::new(); groups];
    for s in 0..d {
        cells[rng.random_range(0..groups)].push(s);
    }
    cells.retain(|c| !c.is_empty());
    KnowledgePartition::new(d, cells).expect("cells cover all states")
}

/// Random profile satisfying the size condition: start from singletons
/// (which satisfy it) and apply merges that each remove one cell and one
/// meet component together.
pub fn size_condition_profile<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    rng: &mut R,
) -> Vec<KnowledgePartition> {
    let mut parts = vec![KnowledgePartition::singletons(d); n];
    let merges = rng.random_range(0..=(n * d / 2));
    for _ in 0..merges {
        // Candidate merges: two cells of one agent in different meet
        // components.
        let meet = crate::partition::meet_partitions(&parts).expect("same space");
        if meet.num_cells() <= 1 {
            break;
        }
        let agent = rng.random_range(0..n);
        let comp_of = |s: usize| meet.cell_index_of(s).expect("covered");
        let cells = parts[agent].cells();
        let candidates: Vec<(usize, usize)> = (0..cells.len())
            .flat_map(|i| ((i + 1)..cells.len()).map(move |k| (i, k)))
            .filter(|&(i, k)| comp_of(cells[i][0]) != comp_of(cells[k][0]))
            .collect();
        if candidates.is_empty() {
            continue;
        }
        let (i, k) = candidates[rng.random_range(0..candidates.len())];
        let mut new_cells: Vec<Vec<usize>> = Vec::with_capacity(cells.len() - 1);
        let mut merged: Vec<usize> = cells[i].clone();
        merged.extend(cells[k].iter().copied());
        for (idx, cell) in cells.iter().enumerate() {
            if idx != i && idx != k {
                new_cells.push(cell.clone());
            }
        }
        new_cells.push(merged);
        parts[agent] =
            KnowledgePartition::new(d, new_cells).expect("merge preserves coverage");
    }
    parts
}

/// Random posteriors per cell, full support inside each cell.
pub fn random_profile<R: Rng + ?Sized>(
    partitions: &[KnowledgePartition],
    rng: &mut R,
) -> TypeProfile {
    let d = partitions[0].num_states();
    let cell_posteriors = partitions
        .iter()
        .map(|part| {
            part.cells()
                .iter()
                .map(|cell| {
                    let mut mass = vec![Rat::from_integer(0.into()); d];
                    let weights: Vec<i64> =
                        cell.iter().map(|_| rng.random_range(1..50i64)).collect();
                    let total: i64 = weights.iter().sum();
                    for (&s, &w) in cell.iter().zip(&weights) {
                        mass[s] = rat(w, total);
                    }
                    Some(BeliefDistribution::new(mass).expect("masses sum to one"))
                })
                .collect()
        })
        .collect();
    TypeProfile { cell_posteriors }
}

/// Wilson-style summary of a Monte-Carlo frequency.
pub fn frequency_summary(successes: u64, trials: u64) -> Value {
    let (lo, hi) = wilson_interval(successes, trials);
    json!({
        "successes": successes,
        "trials": trials,
        "p_hat": successes as f64 / trials.max(1) as f64,
        "ci_low": lo,
        "ci_high": hi,
    })
}
