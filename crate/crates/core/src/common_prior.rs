//! Common-prior existence and construction.
//!
//! A common prior for a type profile is a single distribution that
//! reproduces every agent's cell-conditional posterior by conditioning.
//! Existence is decided by propagating posterior ratios across the
//! constraint graph; a brute-force solver over the full linear system acts
//! as an independent oracle for small instances.

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::num::{rat_one, Rat};
use crate::partition::{join_partitions, meet_partitions, KnowledgePartition};
use crate::types::{BeliefDistribution, TypeProfile};

/// One cross-multiplied posterior-ratio constraint:
/// `p(a) * tau_b = p(b) * tau_a` for two states of one agent cell.
#[derive(Debug, Clone)]
pub struct RatioConstraint {
    pub agent: usize,
    pub cell: usize,
    pub state_a: usize,
    pub state_b: usize,
    pub tau_a: Rat,
    pub tau_b: Rat,
}

/// Which state pairs are constrained.
///
/// `WholeCell` ties every pair inside each agent cell, which is what full
/// Bayes-consistency needs. `WithinJoinCell` restricts to pairs inside each
/// cell of the common refinement, the narrower literal reading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConstraintScope {
    #[default]
    WholeCell,
    WithinJoinCell,
}

/// How unconstrained mass is divided across constraint-graph components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MassSplit {
    /// Each live component receives mass proportional to its state count.
    #[default]
    ProportionalToSize,
    /// Each live component receives the same mass.
    EqualPerComponent,
}

#[derive(Debug, Clone)]
pub enum InfeasibilityWitness {
    /// Every constraint-graph component is forced to zero mass, so no
    /// distribution can sum to one. `cycle_pairs` lists state pairs whose
    /// propagated ratios conflicted; `zero_forced` lists states pinned to
    /// zero by a zero posterior value.
    AllComponentsForcedZero { cycle_pairs: Vec<(usize, usize)>, zero_forced: Vec<usize> },
    /// Brute force: the linear system itself is inconsistent.
    Inconsistent,
    /// Brute force: the system is consistent but admits no non-negative
    /// solution.
    NoNonnegativeSolution,
    /// Grid search exhausted without a satisfying distribution. The grid
    /// oracle is sound but not complete.
    GridExhausted,
}

#[derive(Debug, Clone)]
pub enum CommonPriorResult {
    Feasible(BeliefDistribution),
    Infeasible(InfeasibilityWitness),
}

impl CommonPriorResult {
    pub fn is_feasible(&self) -> bool {
        matches!(self, CommonPriorResult::Feasible(_))
    }

    pub fn prior(&self) -> Option<&BeliefDistribution> {
        match self {
            CommonPriorResult::Feasible(p) => Some(p),
            CommonPriorResult::Infeasible(_) => None,
        }
    }
}

/// Enumerates the cross-multiplied ratio constraints for a profile.
pub fn ratio_constraints(
    partitions: &[KnowledgePartition],
    posteriors: &TypeProfile,
    scope: ConstraintScope,
) -> Result<Vec<RatioConstraint>> {
    posteriors.validate(partitions)?;
    let mut out = Vec::new();
    let join = match scope {
        ConstraintScope::WholeCell => None,
        ConstraintScope::WithinJoinCell => Some(join_partitions(partitions)?),
    };
    for (agent, (part, cells)) in partitions.iter().zip(&posteriors.cell_posteriors).enumerate() {
        for (k, post) in cells.iter().enumerate() {
            let Some(post) = post else { continue };
            let cell = &part.cells()[k];
            let groups: Vec<Vec<usize>> = match &join {
                None => vec![cell.clone()],
                Some(join) => join
                    .cells()
                    .iter()
                    .filter(|z| z.iter().all(|s| cell.binary_search(s).is_ok()))
                    .cloned()
                    .collect(),
            };
            for group in groups {
                for (i, &a) in group.iter().enumerate() {
                    for &b in &group[i + 1..] {
                        out.push(RatioConstraint {
                            agent,
                            cell: k,
                            state_a: a,
                            state_b: b,
                            tau_a: post.mass(a).clone(),
                            tau_b: post.mass(b).clone(),
                        });
                    }
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ConstructOptions {
    pub scope: ConstraintScope,
    pub mass_split: MassSplit,
    /// Relative tolerance band for ratio conflicts; zero demands exact
    /// consistency. Sampled (approximate) posteriors pass a positive band.
    pub tolerance: Rat,
}

impl Default for ConstructOptions {
    fn default() -> Self {
        Self {
            scope: ConstraintScope::default(),
            mass_split: MassSplit::default(),
            tolerance: Rat::zero(),
        }
    }
}

/// Constructs a common prior for the profile, or an infeasibility witness.
pub fn construct_common_prior(
    partitions: &[KnowledgePartition],
    posteriors: &TypeProfile,
) -> Result<CommonPriorResult> {
    construct_common_prior_with(partitions, posteriors, &ConstructOptions::default())
}

pub fn construct_common_prior_with(
    partitions: &[KnowledgePartition],
    posteriors: &TypeProfile,
    options: &ConstructOptions,
) -> Result<CommonPriorResult> {
    let Some(first) = partitions.first() else {
        return Err(Error::InvalidPartition("no partitions".into()));
    };
    let n = first.num_states();
    let constraints = ratio_constraints(partitions, posteriors, options.scope)?;

    let mut dsu = RatioDsu::new(n);
    let mut cycle_pairs: Vec<(usize, usize)> = Vec::new();
    let mut zero_forced: Vec<usize> = Vec::new();

    for c in &constraints {
        let a_pos = c.tau_a > Rat::zero();
        let b_pos = c.tau_b > Rat::zero();
        match (a_pos, b_pos) {
            (true, true) => {
                // p(a)/p(b) = tau_a/tau_b.
                let ratio = c.tau_a.clone() / c.tau_b.clone();
                if !dsu.union(c.state_a, c.state_b, ratio, &options.tolerance) {
                    cycle_pairs.push((c.state_a, c.state_b));
                    dsu.mark_conflicted(c.state_a);
                }
            }
            (false, true) => zero_forced.push(c.state_a),
            (true, false) => zero_forced.push(c.state_b),
            // Both zero: the cross-multiplied form is vacuous.
            (false, false) => {}
        }
    }
    for &s in &zero_forced {
        dsu.mark_zero(s);
    }

    // Group states by component and drop components forced to zero mass.
    let mut comp_states: Vec<Vec<usize>> = Vec::new();
    let mut comp_of_root: std::collections::BTreeMap<usize, usize> = std::collections::BTreeMap::new();
    for s in 0..n {
        let root = dsu.find(s);
        let idx = *comp_of_root.entry(root).or_insert_with(|| {
            comp_states.push(Vec::new());
            comp_states.len() - 1
        });
        comp_states[idx].push(s);
    }
    let live: Vec<&Vec<usize>> = comp_states
        .iter()
        .filter(|states| {
            let root = dsu.find(states[0]);
            !dsu.conflicted[root] && !dsu.zero[root]
        })
        .collect();
    if live.is_empty() {
        zero_forced.sort_unstable();
        zero_forced.dedup();
        return Ok(CommonPriorResult::Infeasible(InfeasibilityWitness::AllComponentsForcedZero {
            cycle_pairs,
            zero_forced,
        }));
    }

    let total_size: usize = live.iter().map(|c| c.len()).sum();
    let mut mass = vec![Rat::zero(); n];
    for comp in &live {
        let comp_mass = match options.mass_split {
            MassSplit::ProportionalToSize => {
                Rat::new((comp.len() as i64).into(), (total_size as i64).into())
            }
            MassSplit::EqualPerComponent => {
                Rat::new(1.into(), (live.len() as i64).into())
            }
        };
        let weights: Vec<Rat> = comp.iter().map(|&s| dsu.weight_to_root(s)).collect();
        let weight_sum: Rat = weights.iter().cloned().sum();
        for (&s, w) in comp.iter().zip(&weights) {
            mass[s] = comp_mass.clone() * w / weight_sum.clone();
        }
    }
    Ok(CommonPriorResult::Feasible(BeliefDistribution::new(mass)?))
}

/// True iff conditioning `p` on every positive-mass agent cell reproduces
/// that cell's posterior exactly.
pub fn verify_common_prior(
    p: &BeliefDistribution,
    partitions: &[KnowledgePartition],
    posteriors: &TypeProfile,
) -> bool {
    if partitions.len() != posteriors.cell_posteriors.len() {
        return false;
    }
    for (part, cells) in partitions.iter().zip(&posteriors.cell_posteriors) {
        if part.num_cells() != cells.len() {
            return false;
        }
        for (k, post) in cells.iter().enumerate() {
            let cell = &part.cells()[k];
            if p.cell_mass(cell) <= Rat::zero() {
                continue;
            }
            let Some(post) = post else { continue };
            match p.condition_on(cell) {
                Ok(cond) => {
                    if &cond != post {
                        return false;
                    }
                }
                Err(_) => return false,
            }
        }
    }
    true
}

/// The partition-size sufficiency condition for common priors:
/// total cell count equals `(N-1) * D + |meet|`.
pub fn size_condition_holds(partitions: &[KnowledgePartition]) -> Result<bool> {
    let Some(first) = partitions.first() else {
        return Err(Error::InvalidPartition("no partitions".into()));
    };
    let d = first.num_states();
    let total: usize = partitions.iter().map(|p| p.num_cells()).sum();
    let meet = meet_partitions(partitions)?;
    Ok(total == (partitions.len() - 1) * d + meet.num_cells())
}

/// Oracle mode for [`brute_force_common_prior`].
#[derive(Debug, Clone, Copy)]
pub enum BruteForceMode {
    /// Exact elimination over the full linear system plus a
    /// Fourier-Motzkin non-negativity decision. Complete.
    Exact,
    /// Exhaustive search over simplex grid points with the given
    /// denominator. Sound for feasibility, not complete.
    Grid(u32),
}

const BRUTE_MAX_STATES: usize = 6;
const BRUTE_MAX_AGENTS: usize = 3;

/// Decides common-prior feasibility by independent means; test oracle only.
pub fn brute_force_common_prior(
    partitions: &[KnowledgePartition],
    posteriors: &TypeProfile,
    mode: BruteForceMode,
) -> Result<CommonPriorResult> {
    let Some(first) = partitions.first() else {
        return Err(Error::InvalidPartition("no partitions".into()));
    };
    let n = first.num_states();
    if n > BRUTE_MAX_STATES || partitions.len() > BRUTE_MAX_AGENTS {
        return Err(Error::InstanceTooLarge(format!(
            "brute force is guarded to D <= {BRUTE_MAX_STATES}, N <= {BRUTE_MAX_AGENTS}"
        )));
    }
    let constraints = ratio_constraints(partitions, posteriors, ConstraintScope::WholeCell)?;
    match mode {
        BruteForceMode::Exact => brute_force_exact(n, &constraints),
        BruteForceMode::Grid(denom) => brute_force_grid(n, &constraints, denom),
    }
}

fn brute_force_exact(n: usize, constraints: &[RatioConstraint]) -> Result<CommonPriorResult> {
    // Rows of [A | c] encoding A p = c over variables p_0..p_{n-1}.
    let mut rows: Vec<Vec<Rat>> = Vec::with_capacity(constraints.len() + 1);
    for c in constraints {
        let mut row = vec![Rat::zero(); n + 1];
        row[c.state_a] = c.tau_b.clone();
        row[c.state_b] = row[c.state_b].clone() - c.tau_a.clone();
        rows.push(row);
    }
    let mut norm = vec![rat_one(); n + 1];
    norm[n] = rat_one();
    rows.push(norm);

    // Reduced row echelon form.
    let mut pivot_cols: Vec<usize> = Vec::new();
    let mut r = 0usize;
    for col in 0..n {
        let Some(best) = (r..rows.len()).find(|&i| !rows[i][col].is_zero()) else {
            continue;
        };
        rows.swap(r, best);
        let lead = rows[r][col].clone();
        for v in rows[r].iter_mut() {
            *v /= lead.clone();
        }
        for i in 0..rows.len() {
            if i != r && !rows[i][col].is_zero() {
                let factor = rows[i][col].clone();
                for k in col..=n {
                    let delta = factor.clone() * rows[r][k].clone();
                    rows[i][k] = rows[i][k].clone() - delta;
                }
            }
        }
        pivot_cols.push(col);
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    // Inconsistent row: 0 = nonzero.
    for row in rows.iter().skip(r) {
        if !row[n].is_zero() {
            return Ok(CommonPriorResult::Infeasible(InfeasibilityWitness::Inconsistent));
        }
    }

    let free_cols: Vec<usize> = (0..n).filter(|c| !pivot_cols.contains(c)).collect();
    // p = base + V t, one column of V per free variable.
    let mut base = vec![Rat::zero(); n];
    let mut dirs = vec![vec![Rat::zero(); n]; free_cols.len()];
    for (j, &fc) in free_cols.iter().enumerate() {
        dirs[j][fc] = rat_one();
    }
    for (ri, &pc) in pivot_cols.iter().enumerate() {
        base[pc] = rows[ri][n].clone();
        for (j, &fc) in free_cols.iter().enumerate() {
            dirs[j][pc] = -rows[ri][fc].clone();
        }
    }

    // Non-negativity: base_i + sum_j dirs[j][i] t_j >= 0 for all i.
    let ineqs: Vec<(Vec<Rat>, Rat)> = (0..n)
        .map(|i| {
            let coeffs: Vec<Rat> = dirs.iter().map(|d| d[i].clone()).collect();
            (coeffs, -base[i].clone())
        })
        .collect();
    match fourier_motzkin_point(ineqs, free_cols.len()) {
        Some(t) => {
            let mut p = base;
            for (j, tj) in t.iter().enumerate() {
                for i in 0..n {
                    let delta = dirs[j][i].clone() * tj.clone();
                    p[i] = p[i].clone() + delta;
                }
            }
            Ok(CommonPriorResult::Feasible(BeliefDistribution::new(p)?))
        }
        None => Ok(CommonPriorResult::Infeasible(InfeasibilityWitness::NoNonnegativeSolution)),
    }
}

/// Finds a point satisfying `coeffs . t >= bound` rows, if any, by
/// Fourier-Motzkin elimination with back-substitution.
fn fourier_motzkin_point(
    ineqs: Vec<(Vec<Rat>, Rat)>,
    num_vars: usize,
) -> Option<Vec<Rat>> {
    // levels[v] holds the system before eliminating variable v.
    let mut levels: Vec<Vec<(Vec<Rat>, Rat)>> = Vec::with_capacity(num_vars);
    let mut current = ineqs;
    for v in (0..num_vars).rev() {
        levels.push(current.clone());
        let mut lowers: Vec<(Vec<Rat>, Rat)> = Vec::new();
        let mut uppers: Vec<(Vec<Rat>, Rat)> = Vec::new();
        let mut rest: Vec<(Vec<Rat>, Rat)> = Vec::new();
        for (coeffs, bound) in current {
            let a = coeffs[v].clone();
            if a.is_zero() {
                rest.push((coeffs, bound));
            } else if a > Rat::zero() {
                // t_v >= (bound - rest_coeffs . t) / a
                let inv = rat_one() / a;
                let scaled: Vec<Rat> =
                    coeffs.iter().map(|c| c.clone() * inv.clone()).collect();
                lowers.push((scaled, bound * inv.clone()));
            } else {
                let inv = rat_one() / a;
                let scaled: Vec<Rat> =
                    coeffs.iter().map(|c| c.clone() * inv.clone()).collect();
                uppers.push((scaled, bound * inv.clone()));
            }
        }
        // Combine each lower bound with each upper bound.
        for (lc, lb) in &lowers {
            for (uc, ub) in &uppers {
                let mut coeffs = vec![Rat::zero(); lc.len()];
                for (k, c) in coeffs.iter_mut().enumerate() {
                    if k != v {
                        // upper - lower >= 0   (in the remaining variables)
                        *c = lc[k].clone() - uc[k].clone();
                    }
                }
                let b = lb.clone() - ub.clone();
                rest.push((coeffs, b));
            }
        }
        current = rest;
    }
    // Constant rows: 0 >= bound must hold.
    for (_, bound) in &current {
        if bound > &Rat::zero() {
            return None;
        }
    }
    // Back-substitute. The level recorded before eliminating variable v
    // mentions variables 0..=v only, so assign in ascending order.
    let mut assignment = vec![Rat::zero(); num_vars];
    for v in 0..num_vars {
        let system = levels.pop().expect("one level per variable");
        let mut lo: Option<Rat> = None;
        let mut hi: Option<Rat> = None;
        for (coeffs, bound) in &system {
            let a = coeffs[v].clone();
            if a.is_zero() {
                continue;
            }
            // residual = bound - sum_{k < v} coeffs[k] * t_k
            let mut residual = bound.clone();
            for k in 0..v {
                residual -= coeffs[k].clone() * assignment[k].clone();
            }
            let limit = residual / a.clone();
            if a > Rat::zero() {
                lo = Some(match lo {
                    Some(cur) if cur >= limit => cur,
                    _ => limit,
                });
            } else {
                hi = Some(match hi {
                    Some(cur) if cur <= limit => cur,
                    _ => limit,
                });
            }
        }
        assignment[v] = match (lo, hi) {
            (Some(l), Some(h)) => (l + h) / Rat::from_integer(2.into()),
            (Some(l), None) => l,
            (None, Some(h)) => h,
            (None, None) => Rat::zero(),
        };
    }
    Some(assignment)
}

fn brute_force_grid(
    n: usize,
    constraints: &[RatioConstraint],
    denom: u32,
) -> Result<CommonPriorResult> {
    if denom == 0 {
        return Err(Error::ParameterOutOfRange("grid denominator must be positive".into()));
    }
    let satisfies = |mass: &[Rat]| {
        constraints.iter().all(|c| {
            mass[c.state_a].clone() * c.tau_b.clone() == mass[c.state_b].clone() * c.tau_a.clone()
        })
    };
    // Enumerate compositions of `denom` into n parts.
    let mut parts = vec![0u32; n];
    fn walk(
        parts: &mut Vec<u32>,
        idx: usize,
        remaining: u32,
        denom: u32,
        satisfies: &dyn Fn(&[Rat]) -> bool,
    ) -> Option<Vec<Rat>> {
        if idx == parts.len() - 1 {
            parts[idx] = remaining;
            let mass: Vec<Rat> = parts
                .iter()
                .map(|&k| Rat::new((k as i64).into(), (denom as i64).into()))
                .collect();
            if satisfies(&mass) {
                return Some(mass);
            }
            return None;
        }
        for k in 0..=remaining {
            parts[idx] = k;
            if let Some(found) = walk(parts, idx + 1, remaining - k, denom, satisfies) {
                return Some(found);
            }
        }
        None
    }
    match walk(&mut parts, 0, denom, denom, &satisfies) {
        Some(mass) => Ok(CommonPriorResult::Feasible(BeliefDistribution::new(mass)?)),
        None => Ok(CommonPriorResult::Infeasible(InfeasibilityWitness::GridExhausted)),
    }
}

/// Weighted union-find carrying `p(s) = w(s) * p(root)` with positive
/// rational weights.
struct RatioDsu {
    parent: Vec<usize>,
    /// Weight of the state relative to its parent.
    weight: Vec<Rat>,
    conflicted: Vec<bool>,
    zero: Vec<bool>,
}

impl RatioDsu {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            weight: vec![rat_one(); n],
            conflicted: vec![false; n],
            zero: vec![false; n],
        }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] == x {
            return x;
        }
        let root = self.find(self.parent[x]);
        if self.parent[x] != root {
            let w = self.weight[self.parent[x]].clone() * self.weight[x].clone();
            self.parent[x] = root;
            self.weight[x] = w;
        }
        root
    }

    fn weight_to_root(&mut self, x: usize) -> Rat {
        self.find(x);
        if self.parent[x] == x {
            rat_one()
        } else {
            self.weight[x].clone()
        }
    }

    /// Joins `a` and `b` under `p(a)/p(b) = ratio`. Returns false when the
    /// states were already related with a ratio outside the tolerance band.
    fn union(&mut self, a: usize, b: usize, ratio: Rat, tolerance: &Rat) -> bool {
        let ra = self.find(a);
        let rb = self.find(b);
        let wa = self.weight_to_root(a);
        let wb = self.weight_to_root(b);
        if ra == rb {
            let implied = wa / wb;
            if implied == ratio {
                return true;
            }
            if tolerance > &Rat::zero() {
                let hi = if implied > ratio { implied.clone() } else { ratio.clone() };
                let gap = if implied > ratio { &implied - &ratio } else { &ratio - &implied };
                if gap / hi <= *tolerance {
                    return true;
                }
            }
            return false;
        }
        // p(a) = wa p(ra), p(b) = wb p(rb), p(a) = ratio p(b). Attach the
        // larger root under the smaller with weight[drop] = p(drop)/p(keep).
        let (keep, drop, w) = if ra < rb {
            (ra, rb, wa / (wb * ratio))
        } else {
            (rb, ra, wb * ratio / wa)
        };
        self.parent[drop] = keep;
        self.weight[drop] = w;
        self.conflicted[keep] = self.conflicted[keep] || self.conflicted[drop];
        self.zero[keep] = self.zero[keep] || self.zero[drop];
        true
    }

    fn mark_conflicted(&mut self, s: usize) {
        let r = self.find(s);
        self.conflicted[r] = true;
    }

    fn mark_zero(&mut self, s: usize) {
        let r = self.find(s);
        self.zero[r] = true;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::rat;

    fn part(n: usize, cells: &[&[usize]]) -> KnowledgePartition {
        KnowledgePartition::new(n, cells.iter().map(|c| c.to_vec()).collect()).unwrap()
    }

    fn profile(
        partitions: &[KnowledgePartition],
        priors: &[BeliefDistribution],
    ) -> TypeProfile {
        TypeProfile::from_priors(partitions, priors).unwrap()
    }

    #[test]
    fn single_agent_returns_its_own_belief() {
        let parts = [KnowledgePartition::trivial(3)];
        let prior = BeliefDistribution::new(vec![rat(1, 6), rat(1, 3), rat(1, 2)]).unwrap();
        let tp = profile(&parts, &[prior.clone()]);
        let res = construct_common_prior(&parts, &tp).unwrap();
        match res {
            CommonPriorResult::Feasible(p) => assert_eq!(p, prior),
            CommonPriorResult::Infeasible(_) => panic!("expected feasible"),
        }
    }

    #[test]
    fn conflicting_point_masses_are_infeasible() {
        let parts = [KnowledgePartition::trivial(2), KnowledgePartition::trivial(2)];
        let tp = TypeProfile {
            cell_posteriors: vec![
                vec![Some(BeliefDistribution::point(2, 0).unwrap())],
                vec![Some(BeliefDistribution::point(2, 1).unwrap())],
            ],
        };
        let res = construct_common_prior(&parts, &tp).unwrap();
        assert!(!res.is_feasible());
        let brute = brute_force_common_prior(&parts, &tp, BruteForceMode::Exact).unwrap();
        assert!(!brute.is_feasible());
    }

    #[test]
    fn induced_posteriors_round_trip() {
        let parts = [part(4, &[&[0, 1], &[2, 3]]), part(4, &[&[0, 2], &[1, 3]])];
        let p = BeliefDistribution::new(vec![rat(1, 10), rat(2, 10), rat(3, 10), rat(4, 10)])
            .unwrap();
        let tp = profile(&parts, &[p.clone(), p.clone()]);
        let res = construct_common_prior(&parts, &tp).unwrap();
        let found = res.prior().expect("feasible");
        assert!(verify_common_prior(found, &parts, &tp));
        // With full-support generic masses the constraint graph is connected,
        // so the construction recovers the inducing prior exactly.
        assert_eq!(found, &p);
    }

    #[test]
    fn conflicted_component_zeroes_out_but_stays_feasible() {
        // Agents share cell {0,1} with clashing posteriors; component {2,3}
        // is constrained by one agent only. The prior must zero {0,1}.
        let parts = [part(4, &[&[0, 1], &[2], &[3]]), part(4, &[&[0, 1], &[2, 3]])];
        let tp = TypeProfile {
            cell_posteriors: vec![
                vec![
                    Some(BeliefDistribution::new(vec![rat(1, 3), rat(2, 3), rat(0, 1), rat(0, 1)]).unwrap()),
                    Some(BeliefDistribution::point(4, 2).unwrap()),
                    Some(BeliefDistribution::point(4, 3).unwrap()),
                ],
                vec![
                    Some(BeliefDistribution::new(vec![rat(2, 3), rat(1, 3), rat(0, 1), rat(0, 1)]).unwrap()),
                    Some(BeliefDistribution::new(vec![rat(0, 1), rat(0, 1), rat(1, 2), rat(1, 2)]).unwrap()),
                ],
            ],
        };
        let res = construct_common_prior(&parts, &tp).unwrap();
        let p = res.prior().expect("feasible via the clean component");
        assert_eq!(p.mass(0), &Rat::zero());
        assert_eq!(p.mass(1), &Rat::zero());
        assert!(verify_common_prior(p, &parts, &tp));
        let brute = brute_force_common_prior(&parts, &tp, BruteForceMode::Exact).unwrap();
        assert!(brute.is_feasible());
    }

    #[test]
    fn size_condition_examples() {
        let s2 = KnowledgePartition::singletons(2);
        assert!(size_condition_holds(&[s2.clone(), s2.clone()]).unwrap());
        let t3 = KnowledgePartition::trivial(3);
        assert!(!size_condition_holds(&[t3.clone(), t3.clone()]).unwrap());
        assert!(size_condition_holds(&[part(3, &[&[0, 1], &[2]])]).unwrap());
    }

    #[test]
    fn grid_oracle_finds_simple_feasible_point() {
        let parts = [KnowledgePartition::trivial(2)];
        let prior = BeliefDistribution::new(vec![rat(1, 4), rat(3, 4)]).unwrap();
        let tp = profile(&parts, &[prior.clone()]);
        let res = brute_force_common_prior(&parts, &tp, BruteForceMode::Grid(8)).unwrap();
        assert!(res.is_feasible());
    }

    #[test]
    fn constraint_count_stays_within_the_quadratic_guard() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(41);
        for _ in 0..50 {
            let n = rng.random_range(2..=3usize);
            let d = rng.random_range(2..=8usize);
            let parts: Vec<KnowledgePartition> = (0..n)
                .map(|_| {
                    let mut cells: Vec<Vec<usize>> = vec![Vec::new(); 3];
                    for s in 0..d {
                        cells[rng.random_range(0..3)].push(s);
                    }
                    cells.retain(|c| !c.is_empty());
                    KnowledgePartition::new(d, cells).unwrap()
                })
                .collect();
            let priors: Vec<BeliefDistribution> = (0..n)
                .map(|_| {
                    BeliefDistribution::from_weights(
                        (0..d).map(|_| rat(rng.random_range(1..20i64), 1)).collect(),
                    )
                    .unwrap()
                })
                .collect();
            let tp = TypeProfile::from_priors(&parts, &priors).unwrap();
            let count = ratio_constraints(&parts, &tp, ConstraintScope::WholeCell)
                .unwrap()
                .len();
            assert!(count <= n * d * d, "{count} constraints beyond N D^2 = {}", n * d * d);
        }
    }

    #[test]
    fn oversized_instances_are_rejected() {
        let parts = [KnowledgePartition::trivial(7)];
        let prior = BeliefDistribution::uniform(7).unwrap();
        let tp = profile(&parts, &[prior]);
        assert!(matches!(
            brute_force_common_prior(&parts, &tp, BruteForceMode::Exact),
            Err(Error::InstanceTooLarge(_))
        ));
    }
}
