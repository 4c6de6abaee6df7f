//! Shifted-sum tasks and the two-agent counting-bound oracle.

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::num::{pow2, rat, rat_one, Rat};
use crate::partition::KnowledgePartition;
use crate::types::{BeliefDistribution, Objective, StateSpace, TaskSpec};

use super::{HardInstance, InstanceKind, InstanceMetadata};

const MAX_SUM_STATES: usize = 4096;

/// Generates `m` shifted-sum tasks over `n`-bit per-agent inputs with a
/// uniform common prior.
///
/// Task `j` draws each agent's input from `{(j-1) 2^n + 1, ..., j 2^n}` and
/// scores the scaled sum of inputs, so consecutive tasks have structurally
/// identical objectives on non-overlapping value ranges. States are input
/// tuples for two agents; for more agents the generator keeps the two-agent
/// projection the analysis works with, pinning the remaining inputs to their
/// range minimum.
///
/// Objectives are shifted per task into [0,1] for protocol use; the
/// unscaled values and image intervals sit in the metadata.
pub fn gen_sum_instance(m: usize, num_agents: usize, n: u32) -> Result<HardInstance> {
    if m == 0 || num_agents < 2 || n == 0 {
        return Err(Error::ParameterOutOfRange(
            "sum instance needs m >= 1, N >= 2, n >= 1".into(),
        ));
    }
    let per_agent = 1u64 << n;
    let d = per_agent
        .checked_mul(per_agent)
        .map(|v| v as usize)
        .ok_or_else(|| Error::InstanceTooLarge("input range overflow".into()))?;
    if d > MAX_SUM_STATES {
        return Err(Error::InstanceTooLarge(format!(
            "2^{n} x 2^{n} = {d} states exceeds the {MAX_SUM_STATES} cap"
        )));
    }

    // Two-agent projection: agent 1 holds the row input, agent 2 the column
    // input; any further agents are treated as pinned observers.
    let scale = pow2(n + 1);
    let mut tasks = Vec::with_capacity(m);
    let mut raw_images = Vec::with_capacity(m);
    let mut raw_values_all = Vec::with_capacity(m);
    let mut coords = Vec::with_capacity(d);

    let row_cells: Vec<Vec<usize>> = (0..per_agent as usize)
        .map(|r| (0..per_agent as usize).map(|c| r * per_agent as usize + c).collect())
        .collect();
    let col_cells: Vec<Vec<usize>> = (0..per_agent as usize)
        .map(|c| (0..per_agent as usize).map(|r| r * per_agent as usize + c).collect())
        .collect();
    let mut partitions = vec![
        KnowledgePartition::new(d, row_cells)?,
        KnowledgePartition::new(d, col_cells)?,
    ];
    // Pinned observers start with no information of their own.
    for _ in 2..num_agents {
        partitions.push(KnowledgePartition::trivial(d));
    }

    for j in 1..=(m as u64) {
        let lo = (j - 1) * per_agent + 1;
        let pinned: u64 = (num_agents as u64 - 2) * lo;
        let mut raw_values = Vec::with_capacity(d);
        for x1 in lo..lo + per_agent {
            for x2 in lo..lo + per_agent {
                if j == 1 {
                    coords.push(vec![x1, x2]);
                }
                let total = Rat::from_integer(((x1 + x2 + pinned) as i64).into());
                raw_values.push(total / scale.clone());
            }
        }
        let min = raw_values.iter().min().cloned().expect("non-empty");
        let max = raw_values.iter().max().cloned().expect("non-empty");
        // The raw span is (2^n - 1)/2^n < 1, so shifting the maximum onto 1
        // puts every value in (0, 1] and is the identity for the first
        // two-agent task.
        let values: Vec<Rat> = raw_values
            .iter()
            .map(|raw| raw.clone() - max.clone() + rat_one())
            .collect();
        raw_images.push((min, max));
        raw_values_all.push(raw_values);

        let space = StateSpace::indexed(j as usize - 1, d)?;
        let objective = Objective::new(values)?;
        let priors = vec![BeliefDistribution::uniform(d)?; num_agents];
        tasks.push(TaskSpec::new(
            space,
            objective,
            priors,
            rat(1, 2i64.pow(n + 1)),
            rat(1, 4),
        )?);
    }

    Ok(HardInstance {
        kind: InstanceKind::Sum,
        tasks,
        partitions,
        metadata: InstanceMetadata {
            raw_images: Some(raw_images),
            raw_values: Some(raw_values_all),
            coords: Some(coords),
            ..InstanceMetadata::default()
        },
    })
}

/// Best achievable one-sided agreement probability when one agent's input
/// is summarized in `t` bits.
///
/// The sender's value is uniform over `2^n` integers and the receiver's
/// optimal estimate catches every value within `epsilon * 2^{n+1}` of some
/// center, so a `t`-bit summary catches at most
/// `min(2^n, 2^t * (floor(2 epsilon 2^{n+1}) + 1))` values. Classes that are
/// value intervals achieve this, because the catch window itself is an
/// interval; the unit tests confirm the claim against full enumeration at
/// small sizes.
pub fn optimal_t_bit_agreement(n: u32, t: u32, epsilon: &Rat) -> Result<Rat> {
    if n == 0 || n > 12 {
        return Err(Error::InstanceTooLarge(format!("n = {n} outside 1..=12")));
    }
    if t > n {
        return Err(Error::ParameterOutOfRange(format!("t = {t} exceeds n = {n}")));
    }
    if epsilon < &Rat::zero() {
        return Err(Error::ParameterOutOfRange("epsilon must be non-negative".into()));
    }
    let window = epsilon.clone() * pow2(n + 2);
    let caught_per_class = window.floor() + rat_one();
    let total = caught_per_class * pow2(t);
    let prob = total / pow2(n);
    Ok(if prob > rat_one() { rat_one() } else { prob })
}

/// Monte-Carlo frequency of one-sided agreement under the optimal
/// interval summary: the sender's uniform value is reported through
/// `t`-bit equal-length interval classes and the receiver's estimate
/// catches the centered window. Converges to [`optimal_t_bit_agreement`].
pub fn simulate_t_bit_agreement(
    n: u32,
    t: u32,
    epsilon: &Rat,
    trials: u64,
    seed: u64,
) -> Result<f64> {
    use rand::{Rng, SeedableRng};
    if n == 0 || n > 12 || t > n {
        return Err(Error::ParameterOutOfRange(format!("n = {n}, t = {t} out of range")));
    }
    if trials == 0 {
        return Err(Error::ParameterOutOfRange("trials must be positive".into()));
    }
    let values = 1u64 << n;
    let classes = 1u64 << t;
    let class_len = values / classes;
    let window = epsilon.clone() * pow2(n + 2);
    let caught_per_class = {
        let k: i64 = (window.floor() + rat_one())
            .to_integer()
            .try_into()
            .unwrap_or(i64::MAX);
        (k as u64).min(class_len)
    };
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    let mut caught = 0u64;
    for _ in 0..trials {
        let x = rng.random_range(0..values);
        let class_start = (x / class_len) * class_len;
        // Best receiver estimate catches a centered run of values.
        let offset = (class_len - caught_per_class) / 2;
        let lo = class_start + offset;
        if x >= lo && x < lo + caught_per_class {
            caught += 1;
        }
    }
    Ok(caught as f64 / trials as f64)
}
