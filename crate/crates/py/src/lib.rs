//! Python bindings: the main types and operations, with exact rationals
//! crossing the boundary as "p/q" strings.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use agreelab::bayes;
use agreelab::bounded;
use agreelab::common_prior::{self, BruteForceMode, CommonPriorResult};
use agreelab::error::Error;
use agreelab::experiment;
use agreelab::instances;
use agreelab::num::{fmt_rat, parse_rat, to_f64, Rat};
use agreelab::partition::{self, KnowledgePartition};
use agreelab::protocol::{self, ChannelSpec, CommGraph, RoundCap, RunOptions};
use agreelab::types::{BeliefDistribution, Objective, StateSpace, TaskSpec, TypeProfile};

fn err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn rat_in(text: &str) -> PyResult<Rat> {
    parse_rat(text).map_err(err)
}

fn dist_in(masses: Vec<String>) -> PyResult<BeliefDistribution> {
    let mass: Result<Vec<Rat>, _> = masses.iter().map(|m| parse_rat(m)).collect();
    BeliefDistribution::new(mass.map_err(err)?).map_err(err)
}

fn dist_out(d: &BeliefDistribution) -> Vec<String> {
    d.masses().iter().map(fmt_rat).collect()
}

fn partition_in(num_states: usize, cells: Vec<Vec<usize>>) -> PyResult<KnowledgePartition> {
    KnowledgePartition::new(num_states, cells).map_err(err)
}

/// Exact conditional expectation of `objective` under `prior` given `cell`,
/// as a "p/q" string.
#[pyfunction]
fn conditional_expectation(
    prior: Vec<String>,
    objective: Vec<String>,
    cell: Vec<usize>,
) -> PyResult<String> {
    let prior = dist_in(prior)?;
    let values: Result<Vec<Rat>, _> = objective.iter().map(|v| parse_rat(v)).collect();
    let objective = Objective::new(values.map_err(err)?).map_err(err)?;
    let result = bayes::conditional_expectation(&prior, &objective, &cell).map_err(err)?;
    Ok(fmt_rat(&result))
}

/// L1 distance between two distributions.
#[pyfunction]
fn prior_distance(p: Vec<String>, q: Vec<String>) -> PyResult<String> {
    let result = bayes::prior_distance(&dist_in(p)?, &dist_in(q)?).map_err(err)?;
    Ok(fmt_rat(&result))
}

/// Half the L1 distance.
#[pyfunction]
fn posterior_tv_distance(p: Vec<String>, q: Vec<String>) -> PyResult<String> {
    let result = bayes::posterior_tv_distance(&dist_in(p)?, &dist_in(q)?).map_err(err)?;
    Ok(fmt_rat(&result))
}

/// Coarsest common refinement of the given partitions.
#[pyfunction]
fn join_partitions(num_states: usize, parts: Vec<Vec<Vec<usize>>>) -> PyResult<Vec<Vec<usize>>> {
    let parts: PyResult<Vec<KnowledgePartition>> =
        parts.into_iter().map(|c| partition_in(num_states, c)).collect();
    let joined = partition::join_partitions(&parts?).map_err(err)?;
    Ok(joined.cells().to_vec())
}

/// Finest common coarsening of the given partitions.
#[pyfunction]
fn meet_partitions(num_states: usize, parts: Vec<Vec<Vec<usize>>>) -> PyResult<Vec<Vec<usize>>> {
    let parts: PyResult<Vec<KnowledgePartition>> =
        parts.into_iter().map(|c| partition_in(num_states, c)).collect();
    let met = partition::meet_partitions(&parts?).map_err(err)?;
    Ok(met.cells().to_vec())
}

/// Refines `mine` against one observed message; message values are opaque
/// strings, one per sender cell.
#[pyfunction]
fn refine_partition(
    num_states: usize,
    mine: Vec<Vec<usize>>,
    sender: Vec<Vec<usize>>,
    messages: Vec<String>,
    observed: String,
) -> PyResult<Vec<Vec<usize>>> {
    let mine = partition_in(num_states, mine)?;
    let sender = partition_in(num_states, sender)?;
    let refined =
        partition::refine_partition(&mine, &sender, &messages, &observed).map_err(err)?;
    Ok(refined.cells().to_vec())
}

/// Constructs a common prior for per-agent (partition, cell posteriors);
/// returns {"feasible": bool, "prior": [..] or None, "witness": str or None}.
#[pyfunction]
fn construct_common_prior(
    py: Python<'_>,
    num_states: usize,
    partitions: Vec<Vec<Vec<usize>>>,
    posteriors: Vec<Vec<Option<Vec<String>>>>,
) -> PyResult<Py<PyDict>> {
    let parts: PyResult<Vec<KnowledgePartition>> =
        partitions.into_iter().map(|c| partition_in(num_states, c)).collect();
    let parts = parts?;
    let mut cell_posteriors = Vec::with_capacity(posteriors.len());
    for agent_cells in posteriors {
        let mut per_cell = Vec::with_capacity(agent_cells.len());
        for post in agent_cells {
            per_cell.push(match post {
                Some(masses) => Some(dist_in(masses)?),
                None => None,
            });
        }
        cell_posteriors.push(per_cell);
    }
    let profile = TypeProfile { cell_posteriors };
    let result = common_prior::construct_common_prior(&parts, &profile).map_err(err)?;
    let out = PyDict::new(py);
    match &result {
        CommonPriorResult::Feasible(p) => {
            out.set_item("feasible", true)?;
            out.set_item("prior", dist_out(p))?;
            out.set_item(
                "verified",
                common_prior::verify_common_prior(p, &parts, &profile),
            )?;
        }
        CommonPriorResult::Infeasible(witness) => {
            out.set_item("feasible", false)?;
            out.set_item("witness", format!("{witness:?}"))?;
        }
    }
    let brute = common_prior::brute_force_common_prior(&parts, &profile, BruteForceMode::Exact);
    if let Ok(brute) = brute {
        out.set_item("oracle_feasible", brute.is_feasible())?;
    }
    Ok(out.into())
}

/// Partition-size sufficiency condition for common priors.
#[pyfunction]
fn size_condition_holds(num_states: usize, partitions: Vec<Vec<Vec<usize>>>) -> PyResult<bool> {
    let parts: PyResult<Vec<KnowledgePartition>> =
        partitions.into_iter().map(|c| partition_in(num_states, c)).collect();
    common_prior::size_condition_holds(&parts?).map_err(err)
}

/// Expected shortfall of a Bernoulli catastrophe indicator.
#[pyfunction]
fn expected_shortfall_bernoulli(p: String, tau: String) -> PyResult<String> {
    let result =
        instances::expected_shortfall_bernoulli(&rat_in(&p)?, &rat_in(&tau)?).map_err(err)?;
    Ok(fmt_rat(&result))
}

/// Expected shortfall of a finite distribution given as (value, prob) pairs.
#[pyfunction]
fn expected_shortfall(dist: Vec<(String, String)>, tau: String) -> PyResult<String> {
    let parsed: PyResult<Vec<(Rat, Rat)>> = dist
        .iter()
        .map(|(v, p)| Ok((rat_in(v)?, rat_in(p)?)))
        .collect();
    let result = instances::expected_shortfall_general(&parsed?, &rat_in(&tau)?).map_err(err)?;
    Ok(fmt_rat(&result))
}

/// Hoeffding sample count for one posterior ratio.
#[pyfunction]
fn required_sample_size(epsilon: String, delta_prime: String) -> PyResult<u64> {
    bounded::required_sample_size(&rat_in(&epsilon)?, &rat_in(&delta_prime)?).map_err(err)
}

/// Sampling-tree node count `B + B^2 + ... + B^R`.
#[pyfunction]
fn sampling_tree_node_count(branching: u64, height: u32) -> PyResult<String> {
    Ok(bounded::sampling_tree_node_count(branching, height).to_string())
}

/// Bounded-indistinguishability parameter formulas.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn wannabe_params(
    py: Python<'_>,
    num_tasks: u64,
    num_agents: u64,
    epsilon: String,
    delta: String,
    rho: String,
    alpha: String,
) -> PyResult<Py<PyDict>> {
    let params = bounded::wannabe_params(
        num_tasks,
        num_agents,
        &rat_in(&epsilon)?,
        &rat_in(&delta)?,
        &rat_in(&rho)?,
        &rat_in(&alpha)?,
    )
    .map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("branching_base", fmt_rat(&params.branching_base))?;
    out.set_item("branching_exponent", fmt_rat(&params.branching_exponent))?;
    out.set_item("branching_log10", params.branching_log10)?;
    out.set_item("bits_per_message", params.bits_per_message)?;
    out.set_item("rounds_post_prior", fmt_rat(&params.rounds_post_prior))?;
    out.set_item("exponent_numerator_main", params.exponent_numerator_main.to_string())?;
    out.set_item("exponent_numerator_rho", params.exponent_numerator_rho.to_string())?;
    Ok(out.into())
}

/// Best one-sided agreement probability under a t-bit summary.
#[pyfunction]
fn optimal_t_bit_agreement(n: u32, t: u32, epsilon: String) -> PyResult<String> {
    let result = instances::optimal_t_bit_agreement(n, t, &rat_in(&epsilon)?).map_err(err)?;
    Ok(fmt_rat(&result))
}

/// Gap between two agents' summed log posterior ratios along a chain.
#[pyfunction]
fn canonical_chain_gap(
    posterior_i: Vec<String>,
    posterior_k: Vec<String>,
    chain: Vec<usize>,
) -> PyResult<f64> {
    instances::canonical_chain_gap(&dist_in(posterior_i)?, &dist_in(posterior_k)?, &chain)
        .map_err(err)
}

fn instance_dict(py: Python<'_>, inst: &instances::HardInstance) -> PyResult<Py<PyDict>> {
    let out = PyDict::new(py);
    let task = &inst.tasks[0];
    out.set_item("num_states", task.num_states())?;
    out.set_item("epsilon", fmt_rat(&task.epsilon))?;
    out.set_item("delta", fmt_rat(&task.delta))?;
    let priors = PyList::new(py, inst.tasks[0].priors.iter().map(dist_out))?;
    out.set_item("priors", priors)?;
    out.set_item(
        "objective",
        task.objective.values().iter().map(fmt_rat).collect::<Vec<_>>(),
    )?;
    if let Some(nu) = &inst.metadata.nu {
        out.set_item("nu", fmt_rat(nu))?;
    }
    if let Some(lambda) = &inst.metadata.lambda {
        out.set_item("lambda", fmt_rat(lambda))?;
    }
    if let Some(l0) = inst.metadata.chain_gap_t0 {
        out.set_item("chain_gap_t0", l0)?;
    }
    if let Some(gap) = &inst.metadata.expected_gap {
        out.set_item("expected_gap", fmt_rat(gap))?;
    }
    if let Some(threshold) = &inst.metadata.leaf_threshold {
        out.set_item("leaf_threshold", fmt_rat(threshold))?;
    }
    Ok(out.into())
}

/// Sign-flip priors at exact pairwise L1 distance nu.
#[pyfunction]
fn gen_type1_priors(
    py: Python<'_>,
    num_agents: usize,
    num_states: usize,
    nu: String,
    p: String,
) -> PyResult<Py<PyDict>> {
    let inst = instances::gen_type1_priors(num_agents, num_states, &rat_in(&nu)?, &rat_in(&p)?)
        .map_err(err)?;
    instance_dict(py, &inst)
}

/// Opposite-slope geometric priors.
#[pyfunction]
fn gen_uniform_slope_priors(py: Python<'_>, num_states: usize, nu: String) -> PyResult<Py<PyDict>> {
    let inst = instances::gen_uniform_slope_priors(num_states, &rat_in(&nu)?).map_err(err)?;
    instance_dict(py, &inst)
}

/// Needle priors disagreeing only on one rare state.
#[pyfunction]
fn gen_needle_priors(py: Python<'_>, num_states: usize, nu: String) -> PyResult<Py<PyDict>> {
    let inst = instances::gen_needle_priors(num_states, &rat_in(&nu)?).map_err(err)?;
    instance_dict(py, &inst)
}

/// Probability that `leaves` draws from the needle holder all miss it.
#[pyfunction]
fn needle_miss_probability(nu: String, leaves: u32) -> PyResult<String> {
    Ok(fmt_rat(&instances::needle_miss_probability(&rat_in(&nu)?, leaves)))
}

/// Runs the agreement protocol once and returns the outcome.
#[pyfunction]
#[pyo3(signature = (priors, objective, epsilon, delta, partitions=None, channel="continuous", seed=0, round_cap=None, true_state=None))]
#[allow(clippy::too_many_arguments)]
fn run_agreement(
    py: Python<'_>,
    priors: Vec<Vec<String>>,
    objective: Vec<String>,
    epsilon: String,
    delta: String,
    partitions: Option<Vec<Vec<Vec<usize>>>>,
    channel: &str,
    seed: u64,
    round_cap: Option<u64>,
    true_state: Option<usize>,
) -> PyResult<Py<PyDict>> {
    let priors: PyResult<Vec<BeliefDistribution>> = priors.into_iter().map(dist_in).collect();
    let priors = priors?;
    let d = priors.first().map(|p| p.len()).unwrap_or(0);
    let values: Result<Vec<Rat>, _> = objective.iter().map(|v| parse_rat(v)).collect();
    let task = TaskSpec::new(
        StateSpace::indexed(0, d).map_err(err)?,
        Objective::new(values.map_err(err)?).map_err(err)?,
        priors,
        rat_in(&epsilon)?,
        rat_in(&delta)?,
    )
    .map_err(err)?;
    let n = task.num_agents();
    let graph = CommGraph::complete(n).map_err(err)?;
    let epsilon = task.epsilon.clone();
    let channel = match channel {
        "continuous" => ChannelSpec::Continuous,
        "discretized" => ChannelSpec::Discretized,
        "bbf" => ChannelSpec::bbf(agreelab::num::rat(1, 5)).map_err(err)?,
        "smoothed" => ChannelSpec::smoothed_for_epsilon(&epsilon, None).map_err(err)?,
        other => return Err(PyValueError::new_err(format!("unknown channel {other:?}"))),
    };
    let mut options = RunOptions::default();
    if let Some(cap) = round_cap {
        options.round_cap = RoundCap::Explicit(cap);
    }
    options.true_state = true_state;
    if let Some(parts) = partitions {
        let parts: PyResult<Vec<KnowledgePartition>> =
            parts.into_iter().map(|c| partition_in(d, c)).collect();
        options.initial_partitions = Some(parts?);
    }
    let results = protocol::run_agreement(&[task], &graph, &channel, seed, &options).map_err(err)?;
    let outcome = &results[0].outcome;
    let out = PyDict::new(py);
    out.set_item("agreed", outcome.agreed)?;
    out.set_item("termination", outcome.termination.label())?;
    out.set_item("true_state", outcome.true_state)?;
    out.set_item("rounds", outcome.rounds_run)?;
    out.set_item("messages", outcome.messages_sent)?;
    out.set_item("rounds_to_common_prior", outcome.rounds_to_common_prior)?;
    out.set_item("rounds_to_agreement", outcome.rounds_to_agreement)?;
    out.set_item("cadence_violations", outcome.cadence_violations)?;
    out.set_item("final_max_tv", outcome.final_max_tv)?;
    Ok(out.into())
}

/// Runs one experiment config (JSON text) and returns rows as dicts.
#[pyfunction]
fn run_experiment_json(py: Python<'_>, config_json: &str) -> PyResult<Py<PyDict>> {
    let config = experiment::ExperimentConfig::from_json(config_json).map_err(err)?;
    let artifacts = experiment::run_experiment(&config).map_err(err)?;
    let out = PyDict::new(py);
    let rows = PyList::empty(py);
    for row in &artifacts.rows {
        let r = PyDict::new(py);
        r.set_item("experiment", &row.experiment)?;
        r.set_item("trial", row.trial)?;
        for (k, v) in &row.params {
            r.set_item(format!("p:{k}"), v)?;
        }
        for (k, v) in &row.metrics {
            r.set_item(format!("m:{k}"), v)?;
        }
        rows.append(r)?;
    }
    out.set_item("rows", rows)?;
    if let Some(summary) = &artifacts.summary {
        out.set_item("summary", summary.to_string())?;
    }
    Ok(out.into())
}

/// Triangular offset pmf value at x for a given range.
#[pyfunction]
fn smoothed_offset_pmf(range: u32, x: i64) -> PyResult<f64> {
    Ok(to_f64(&protocol::smoothed_offset_pmf(range, x)))
}

#[pymodule]
fn agreelab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(conditional_expectation, m)?)?;
    m.add_function(wrap_pyfunction!(prior_distance, m)?)?;
    m.add_function(wrap_pyfunction!(posterior_tv_distance, m)?)?;
    m.add_function(wrap_pyfunction!(join_partitions, m)?)?;
    m.add_function(wrap_pyfunction!(meet_partitions, m)?)?;
    m.add_function(wrap_pyfunction!(refine_partition, m)?)?;
    m.add_function(wrap_pyfunction!(construct_common_prior, m)?)?;
    m.add_function(wrap_pyfunction!(size_condition_holds, m)?)?;
    m.add_function(wrap_pyfunction!(expected_shortfall_bernoulli, m)?)?;
    m.add_function(wrap_pyfunction!(expected_shortfall, m)?)?;
    m.add_function(wrap_pyfunction!(required_sample_size, m)?)?;
    m.add_function(wrap_pyfunction!(sampling_tree_node_count, m)?)?;
    m.add_function(wrap_pyfunction!(wannabe_params, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_t_bit_agreement, m)?)?;
    m.add_function(wrap_pyfunction!(canonical_chain_gap, m)?)?;
    m.add_function(wrap_pyfunction!(gen_type1_priors, m)?)?;
    m.add_function(wrap_pyfunction!(gen_uniform_slope_priors, m)?)?;
    m.add_function(wrap_pyfunction!(gen_needle_priors, m)?)?;
    m.add_function(wrap_pyfunction!(needle_miss_probability, m)?)?;
    m.add_function(wrap_pyfunction!(run_agreement, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment_json, m)?)?;
    m.add_function(wrap_pyfunction!(smoothed_offset_pmf, m)?)?;
    Ok(())
}
