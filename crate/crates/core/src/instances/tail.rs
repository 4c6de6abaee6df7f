//! Expected shortfall for finite loss distributions on [0, 1].

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::num::{rat_one, Rat};

/// Expected shortfall of a Bernoulli catastrophe indicator at tail level
/// `tau`: exactly `min(1, p / tau)`.
pub fn expected_shortfall_bernoulli(p: &Rat, tau: &Rat) -> Result<Rat> {
    if p < &Rat::zero() || p > &rat_one() {
        return Err(Error::ParameterOutOfRange(format!("p = {p} not in [0,1]")));
    }
    check_tau(tau)?;
    let ratio = p.clone() / tau.clone();
    Ok(if ratio > rat_one() { rat_one() } else { ratio })
}

/// Expected shortfall of a finite distribution on [0, 1], computed from the
/// variational representation `inf_c (c + E[(X - c)_+] / tau)`.
///
/// The objective is piecewise linear in `c` with kinks only at support
/// points, so scanning the support together with the interval endpoints
/// attains the infimum exactly.
pub fn expected_shortfall_general(dist: &[(Rat, Rat)], tau: &Rat) -> Result<Rat> {
    check_dist(dist)?;
    check_tau(tau)?;
    let mut candidates: Vec<Rat> = dist.iter().map(|(v, _)| v.clone()).collect();
    candidates.push(Rat::zero());
    candidates.push(rat_one());
    let mut best: Option<Rat> = None;
    for c in candidates {
        let mut excess = Rat::zero();
        for (v, p) in dist {
            if v > &c {
                excess += (v.clone() - c.clone()) * p.clone();
            }
        }
        let value = c + excess / tau.clone();
        best = Some(match best {
            Some(cur) if cur <= value => cur,
            _ => value,
        });
    }
    Ok(best.expect("candidate set is non-empty"))
}

/// Direct upper-tail average: mean of the worst outcomes holding exactly
/// `tau` probability mass. Independent route used to cross-check
/// [`expected_shortfall_general`].
pub fn expected_shortfall_tail_average(dist: &[(Rat, Rat)], tau: &Rat) -> Result<Rat> {
    check_dist(dist)?;
    check_tau(tau)?;
    let mut sorted: Vec<(Rat, Rat)> = dist.to_vec();
    sorted.sort_by(|a, b| b.0.cmp(&a.0));
    let mut remaining = tau.clone();
    let mut acc = Rat::zero();
    for (v, p) in sorted {
        if remaining <= Rat::zero() {
            break;
        }
        let take = if p < remaining { p } else { remaining.clone() };
        acc += v * take.clone();
        remaining -= take;
    }
    Ok(acc / tau.clone())
}

fn check_tau(tau: &Rat) -> Result<()> {
    if tau <= &Rat::zero() || tau > &rat_one() {
        return Err(Error::ParameterOutOfRange(format!("tau = {tau} not in (0,1]")));
    }
    Ok(())
}

fn check_dist(dist: &[(Rat, Rat)]) -> Result<()> {
    if dist.is_empty() {
        return Err(Error::InvalidDistribution("empty support".into()));
    }
    let mut total = Rat::zero();
    for (v, p) in dist {
        if v < &Rat::zero() || v > &rat_one() {
            return Err(Error::ParameterOutOfRange(format!("value {v} outside [0,1]")));
        }
        if p < &Rat::zero() {
            return Err(Error::InvalidDistribution(format!("negative probability {p}")));
        }
        total += p;
    }
    if total != rat_one() {
        return Err(Error::InvalidDistribution(format!("probabilities sum to {total}")));
    }
    Ok(())
}
