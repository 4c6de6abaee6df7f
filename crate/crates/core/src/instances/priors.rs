//! Paired hard priors: sign-flip, uniform-slope, and needle constructions.

use num_traits::ToPrimitive;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::num::{rat, rat_one, Rat};
use crate::partition::KnowledgePartition;
use crate::types::{BeliefDistribution, Objective, StateSpace, TaskSpec};

use super::{HardInstance, InstanceKind, InstanceMetadata};

/// Sign-flip priors at exact pairwise L1 distance `nu`.
///
/// Half the agents (rounded down) carry the plus sign. Each prior puts
/// `1/2 -+ b nu/4 - (D-2) beta / 2` on the first two states and
/// `beta = p / (D-2)` on the rest, so mismatched pairs differ only on the
/// first two states, by `nu/2` each. The objective is the indicator of the
/// second state, which puts the initial expectation gap of a mismatched
/// pair at exactly `nu/2`.
pub fn gen_type1_priors(num_agents: usize, d: usize, nu: &Rat, p: &Rat) -> Result<HardInstance> {
    if d <= 2 {
        return Err(Error::ParameterOutOfRange("type-one priors need D > 2".into()));
    }
    if num_agents < 2 {
        return Err(Error::ParameterOutOfRange("need at least two agents".into()));
    }
    if nu <= &Rat::zero() || nu > &rat_one() {
        return Err(Error::ParameterOutOfRange(format!("nu = {nu} not in (0,1]")));
    }
    let p_cap = rat(1, 2) - nu.clone() / rat(4, 1);
    if p <= &Rat::zero() || p > &p_cap {
        return Err(Error::ParameterOutOfRange(format!(
            "p = {p} not in (0, 1/2 - nu/4]"
        )));
    }
    let beta = p.clone() / Rat::from_integer(((d - 2) as i64).into());
    let bulk = Rat::from_integer(((d - 2) as i64).into()) * beta.clone() / rat(2, 1);

    let plus = num_agents / 2;
    let mut sign_vector = Vec::with_capacity(num_agents);
    let mut priors = Vec::with_capacity(num_agents);
    for agent in 0..num_agents {
        let b: i8 = if agent < plus { 1 } else { -1 };
        sign_vector.push(b);
        let swing = nu.clone() / rat(4, 1) * Rat::from_integer((b as i64).into());
        let mut mass = vec![beta.clone(); d];
        mass[0] = rat(1, 2) - swing.clone() - bulk.clone();
        mass[1] = rat(1, 2) + swing - bulk.clone();
        priors.push(BeliefDistribution::new(mass)?);
    }

    let mut values = vec![Rat::zero(); d];
    values[1] = rat_one();
    let objective = Objective::new(values)?;
    let epsilon = nu.clone() / rat(4, 1);
    let delta = nu.clone() / rat(4, 1);
    let task = TaskSpec::new(StateSpace::indexed(0, d)?, objective, priors, epsilon, delta)?;
    let partitions = vec![KnowledgePartition::trivial(d); num_agents];

    Ok(HardInstance {
        kind: InstanceKind::TypeOne,
        tasks: vec![task],
        partitions,
        metadata: InstanceMetadata {
            nu: Some(nu.clone()),
            sign_vector: Some(sign_vector),
            initial_tv: Some(nu.clone() / rat(2, 1)),
            expected_gap: Some(nu.clone() / rat(2, 1)),
            ..InstanceMetadata::default()
        },
    })
}

/// Two geometric priors with opposite slopes `lambda^{+-m}`, where
/// `lambda = (1 + nu/2) / (1 - nu/2)`, at L1 distance at least `nu`.
pub fn gen_uniform_slope_priors(d: usize, nu: &Rat) -> Result<HardInstance> {
    if d <= 2 {
        return Err(Error::ParameterOutOfRange("uniform-slope priors need D > 2".into()));
    }
    if nu <= &Rat::zero() || nu > &rat_one() {
        return Err(Error::ParameterOutOfRange(format!("nu = {nu} not in (0,1]")));
    }
    let half = nu.clone() / rat(2, 1);
    let lambda = (rat_one() + half.clone()) / (rat_one() - half);

    let mut up = Vec::with_capacity(d);
    let mut down = Vec::with_capacity(d);
    let mut power = rat_one();
    for _ in 0..d {
        up.push(power.clone());
        power = power * lambda.clone();
    }
    for m in 0..d {
        down.push(up[d - 1 - m].clone());
    }
    let prior_up = BeliefDistribution::from_weights(up)?;
    let prior_down = BeliefDistribution::from_weights(down)?;

    // Smooth monotone objective over the chain.
    let values: Vec<Rat> = (0..d)
        .map(|m| Rat::new((m as i64).into(), ((d - 1) as i64).into()))
        .collect();
    let objective = Objective::new(values)?;
    let chain: Vec<usize> = (0..d).collect();
    let chain_gap_t0 = canonical_chain_gap(&prior_up, &prior_down, &chain)?;

    let task = TaskSpec::new(
        StateSpace::indexed(0, d)?,
        objective,
        vec![prior_up, prior_down],
        nu.clone() / rat(4, 1),
        rat(1, 4),
    )?;

    Ok(HardInstance {
        kind: InstanceKind::UniformSlope,
        tasks: vec![task],
        partitions: vec![KnowledgePartition::trivial(d); 2],
        metadata: InstanceMetadata {
            nu: Some(nu.clone()),
            lambda: Some(lambda),
            chain: Some(chain),
            chain_gap_t0: Some(chain_gap_t0),
            ..InstanceMetadata::default()
        },
    })
}

/// Absolute gap between two agents' summed log posterior ratios along a
/// state chain; zero iff the chain ratios already agree.
pub fn canonical_chain_gap(
    posterior_i: &BeliefDistribution,
    posterior_k: &BeliefDistribution,
    chain: &[usize],
) -> Result<f64> {
    if posterior_i.len() != posterior_k.len() {
        return Err(Error::DimensionMismatch {
            left: posterior_i.len(),
            right: posterior_k.len(),
        });
    }
    let log_sum = |post: &BeliefDistribution| -> Result<f64> {
        let mut total = 0.0f64;
        for w in chain.windows(2) {
            let (s, s_next) = (w[0], w[1]);
            for state in [s, s_next] {
                if state >= post.len() {
                    return Err(Error::ParameterOutOfRange(format!(
                        "chain state s{state} outside the space"
                    )));
                }
                if post.mass(state) <= &Rat::zero() {
                    return Err(Error::ZeroPosteriorOnChain(state));
                }
            }
            let ratio = post.mass(s_next).clone() / post.mass(s).clone();
            total += ratio.to_f64().expect("finite ratio").ln();
        }
        Ok(total)
    };
    Ok((log_sum(posterior_i)? - log_sum(posterior_k)?).abs())
}

/// Needle priors: the agents disagree only on one rare state.
///
/// Agent `i` assigns zero to the needle state while agent `k` assigns
/// `nu/2`; the objective is the needle indicator, so the initial
/// expectations differ by `nu/2 = 4 epsilon`. Any estimate built from
/// unconditional samples must see the needle at least once, which takes on
/// the order of `1/nu` draws; the metadata records the `3/(2 nu)` leaf
/// threshold.
pub fn gen_needle_priors(d: usize, nu: &Rat) -> Result<HardInstance> {
    if d < 3 {
        return Err(Error::ParameterOutOfRange("needle priors need D >= 3".into()));
    }
    if nu <= &Rat::zero() || nu > &rat_one() {
        return Err(Error::ParameterOutOfRange(format!("nu = {nu} not in (0,1]")));
    }
    let half = nu.clone() / rat(2, 1);
    let rest = (d - 1) as i64;
    let mut mass_i = vec![Rat::new(1.into(), rest.into()); d];
    mass_i[0] = Rat::zero();
    let mut mass_k = vec![(rat_one() - half.clone()) / Rat::from_integer(rest.into()); d];
    mass_k[0] = half.clone();
    let prior_i = BeliefDistribution::new(mass_i)?;
    let prior_k = BeliefDistribution::new(mass_k)?;

    let mut values = vec![Rat::zero(); d];
    values[0] = rat_one();
    let objective = Objective::new(values)?;

    let epsilon = nu.clone() / rat(8, 1);
    let task = TaskSpec::new(
        StateSpace::indexed(0, d)?,
        objective,
        vec![prior_i, prior_k],
        epsilon,
        rat(1, 4),
    )?;

    Ok(HardInstance {
        kind: InstanceKind::Needle,
        tasks: vec![task],
        partitions: vec![KnowledgePartition::trivial(d); 2],
        metadata: InstanceMetadata {
            nu: Some(nu.clone()),
            expected_gap: Some(half),
            leaf_threshold: Some(rat(3, 2) / nu.clone()),
            ..InstanceMetadata::default()
        },
    })
}

/// Probability that `leaves` unconditional draws from the needle-holding
/// prior all miss the needle state: `(1 - nu/2)^leaves`.
pub fn needle_miss_probability(nu: &Rat, leaves: u32) -> Rat {
    let mut base = rat_one() - nu.clone() / rat(2, 1);
    let mut result = rat_one();
    let mut k = leaves;
    while k > 0 {
        if k & 1 == 1 {
            result = result * base.clone();
        }
        base = base.clone() * base;
        k >>= 1;
    }
    result
}
