//! Conditional expectations and distances between beliefs.

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::num::{rat_abs, Rat};
use crate::types::{BeliefDistribution, Objective};

/// Exact conditional expectation of the objective given a cell:
/// sum of `f(s) P[s]` over the cell divided by the cell's mass.
pub fn conditional_expectation(
    prior: &BeliefDistribution,
    objective: &Objective,
    cell: &[usize],
) -> Result<Rat> {
    if prior.len() != objective.len() {
        return Err(Error::DimensionMismatch { left: prior.len(), right: objective.len() });
    }
    if cell.is_empty() {
        return Err(Error::ZeroMassCell);
    }
    let mut num = Rat::zero();
    let mut den = Rat::zero();
    for &s in cell {
        num += objective.value(s) * prior.mass(s);
        den += prior.mass(s);
    }
    if den <= Rat::zero() {
        return Err(Error::ZeroMassCell);
    }
    Ok(num / den)
}

/// L1 distance between two distributions, in [0, 2].
///
/// For single priors per agent this is exactly the distance to the nearest
/// shared prior: zero iff a common prior already exists for the pair.
pub fn prior_distance(p: &BeliefDistribution, q: &BeliefDistribution) -> Result<Rat> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch { left: p.len(), right: q.len() });
    }
    Ok(p.masses()
        .iter()
        .zip(q.masses())
        .map(|(a, b)| rat_abs(&(a - b)))
        .sum())
}

/// Largest pairwise L1 distance across a group of priors.
pub fn max_pairwise_prior_distance(priors: &[BeliefDistribution]) -> Result<Rat> {
    let mut best = Rat::zero();
    for (i, p) in priors.iter().enumerate() {
        for q in &priors[i + 1..] {
            let d = prior_distance(p, q)?;
            if d > best {
                best = d;
            }
        }
    }
    Ok(best)
}

/// Total variation distance: half the L1 distance, in [0, 1].
pub fn posterior_tv_distance(p: &BeliefDistribution, q: &BeliefDistribution) -> Result<Rat> {
    Ok(prior_distance(p, q)? / Rat::from_integer(2.into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{rat, rat_one};

    fn dist(masses: &[(i64, i64)]) -> BeliefDistribution {
        BeliefDistribution::new(masses.iter().map(|&(n, d)| rat(n, d)).collect()).unwrap()
    }

    #[test]
    fn uniform_symmetric_cell() {
        let p = BeliefDistribution::uniform(2).unwrap();
        let f = Objective::new(vec![rat_one(), rat(0, 1)]).unwrap();
        assert_eq!(conditional_expectation(&p, &f, &[0, 1]).unwrap(), rat(1, 2));
    }

    #[test]
    fn weighted_cell_matches_direct_evaluation() {
        // P=(0.2,0.3,0.5), f=(1,0,0.5), cell={s0,s2} -> 0.45/0.7 = 9/14.
        let p = dist(&[(1, 5), (3, 10), (1, 2)]);
        let f = Objective::new(vec![rat_one(), rat(0, 1), rat(1, 2)]).unwrap();
        assert_eq!(conditional_expectation(&p, &f, &[0, 2]).unwrap(), rat(9, 14));
    }

    #[test]
    fn constant_objective_gives_constant() {
        let p = dist(&[(1, 5), (3, 10), (1, 2)]);
        let f = Objective::new(vec![rat(1, 3); 3]).unwrap();
        for cell in [&[0usize][..], &[1, 2], &[0, 1, 2]] {
            assert_eq!(conditional_expectation(&p, &f, cell).unwrap(), rat(1, 3));
        }
    }

    #[test]
    fn full_space_equals_unconditional_and_singleton_returns_value() {
        let p = dist(&[(1, 4), (1, 4), (1, 2)]);
        let f = Objective::new(vec![rat(1, 8), rat(3, 4), rat(1, 2)]).unwrap();
        let full = conditional_expectation(&p, &f, &[0, 1, 2]).unwrap();
        let direct: Rat =
            (0..3).map(|s| f.value(s) * p.mass(s)).sum();
        assert_eq!(full, direct);
        assert_eq!(conditional_expectation(&p, &f, &[1]).unwrap(), rat(3, 4));
    }

    #[test]
    fn prior_distance_extremes() {
        let p = dist(&[(1, 1), (0, 1)]);
        let q = dist(&[(0, 1), (1, 1)]);
        assert_eq!(prior_distance(&p, &p).unwrap(), rat(0, 1));
        assert_eq!(prior_distance(&p, &q).unwrap(), rat(2, 1));
        assert_eq!(posterior_tv_distance(&p, &q).unwrap(), rat_one());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let p = dist(&[(1, 2), (1, 2)]);
        let q = BeliefDistribution::uniform(3).unwrap();
        assert!(matches!(prior_distance(&p, &q), Err(Error::DimensionMismatch { .. })));
    }
}
