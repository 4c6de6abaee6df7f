//! Knowledge partitions and their refinement lattice.
//!
//! A partition divides a task's states into cells of mutually
//! indistinguishable states. Messages refine partitions; `join` is the
//! coarsest common refinement, `meet` the finest common coarsening.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// An agent's partition of the states `0..num_states` into disjoint cells.
///
/// Cells are canonicalized (states ascending within a cell, cells ordered by
/// least state) so equality is syntactic. A freshly constructed partition
/// covers the whole space; refining against an observed message may drop
/// states that are inconsistent with the observation, leaving a partition of
/// the consistent subspace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgePartition {
    num_states: usize,
    cells: Vec<Vec<usize>>,
}

impl KnowledgePartition {
    /// Builds a partition covering all of `0..num_states`.
    pub fn new(num_states: usize, cells: Vec<Vec<usize>>) -> Result<Self> {
        let part = Self::from_cells(num_states, cells)?;
        let covered: usize = part.cells.iter().map(|c| c.len()).sum();
        if covered != num_states {
            return Err(Error::InvalidPartition(format!(
                "cells cover {covered} of {num_states} states"
            )));
        }
        Ok(part)
    }

    /// Builds a partition of a subset of `0..num_states` (used by refinement).
    pub fn from_cells(num_states: usize, cells: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; num_states];
        let mut canon: Vec<Vec<usize>> = Vec::with_capacity(cells.len());
        for mut cell in cells {
            if cell.is_empty() {
                return Err(Error::InvalidPartition("empty cell".into()));
            }
            cell.sort_unstable();
            cell.dedup();
            for &s in &cell {
                if s >= num_states {
                    return Err(Error::InvalidPartition(format!(
                        "state s{s} outside space of size {num_states}"
                    )));
                }
                if seen[s] {
                    return Err(Error::InvalidPartition(format!("state s{s} in two cells")));
                }
                seen[s] = true;
            }
            canon.push(cell);
        }
        canon.sort_by_key(|c| c[0]);
        Ok(Self { num_states, cells: canon })
    }

    /// The trivial partition `{S}`.
    pub fn trivial(num_states: usize) -> Self {
        Self { num_states, cells: vec![(0..num_states).collect()] }
    }

    /// The discrete partition of singletons.
    pub fn singletons(num_states: usize) -> Self {
        Self { num_states, cells: (0..num_states).map(|s| vec![s]).collect() }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    /// Whether every state of the space belongs to some cell.
    pub fn covers_fully(&self) -> bool {
        self.cells.iter().map(|c| c.len()).sum::<usize>() == self.num_states
    }

    /// Index of the cell containing `state`, if the state is still covered.
    pub fn cell_index_of(&self, state: usize) -> Option<usize> {
        self.cells.iter().position(|c| c.binary_search(&state).is_ok())
    }

    /// The cell containing `state`.
    pub fn cell_of(&self, state: usize) -> Option<&[usize]> {
        self.cell_index_of(state).map(|i| self.cells[i].as_slice())
    }

    /// True when every cell of `self` is contained in one cell of `other`.
    pub fn refines(&self, other: &KnowledgePartition) -> bool {
        self.cells.iter().all(|cell| {
            other
                .cell_of(cell[0])
                .map(|oc| cell.iter().all(|s| oc.binary_search(s).is_ok()))
                .unwrap_or(false)
        })
    }

    /// Splits every cell by a per-state class key, keeping all states.
    ///
    /// This is the common-knowledge update applied by the simulator: a
    /// broadcast message separates states exactly when the sender would have
    /// produced distinguishable messages there.
    pub fn split_by_classes<K: Ord>(&self, class_of: impl Fn(usize) -> K) -> KnowledgePartition {
        let mut cells: Vec<Vec<usize>> = Vec::with_capacity(self.cells.len());
        for cell in &self.cells {
            let mut groups: BTreeMap<K, Vec<usize>> = BTreeMap::new();
            for &s in cell {
                groups.entry(class_of(s)).or_default().push(s);
            }
            cells.extend(groups.into_values());
        }
        cells.sort_by_key(|c| c[0]);
        KnowledgePartition { num_states: self.num_states, cells }
    }
}

/// Refines `mine` against one observed message from a sender.
///
/// Each output cell is `{s' in old cell : message(sender cell at s') ==
/// observed}`; empty intersections are dropped. Errors with
/// `InconsistentObservation` when no state at all is consistent.
///
/// `message_per_sender_cell` holds one value per cell of
/// `sender_partition_at_send_time`, in that partition's cell order.
pub fn refine_partition<M: PartialEq>(
    mine: &KnowledgePartition,
    sender_partition_at_send_time: &KnowledgePartition,
    message_per_sender_cell: &[M],
    observed_message: &M,
) -> Result<KnowledgePartition> {
    if mine.num_states() != sender_partition_at_send_time.num_states() {
        return Err(Error::DimensionMismatch {
            left: mine.num_states(),
            right: sender_partition_at_send_time.num_states(),
        });
    }
    if message_per_sender_cell.len() != sender_partition_at_send_time.num_cells() {
        return Err(Error::DimensionMismatch {
            left: message_per_sender_cell.len(),
            right: sender_partition_at_send_time.num_cells(),
        });
    }
    let consistent = |s: usize| -> bool {
        sender_partition_at_send_time
            .cell_index_of(s)
            .map(|k| &message_per_sender_cell[k] == observed_message)
            .unwrap_or(false)
    };
    let mut cells = Vec::with_capacity(mine.num_cells());
    for cell in mine.cells() {
        let kept: Vec<usize> = cell.iter().copied().filter(|&s| consistent(s)).collect();
        if !kept.is_empty() {
            cells.push(kept);
        }
    }
    if cells.is_empty() {
        return Err(Error::InconsistentObservation);
    }
    KnowledgePartition::from_cells(mine.num_states(), cells)
}

/// Coarsest common refinement: non-empty intersections of one cell per input.
pub fn join_partitions(parts: &[KnowledgePartition]) -> Result<KnowledgePartition> {
    let Some(first) = parts.first() else {
        return Err(Error::InvalidPartition("join of no partitions".into()));
    };
    let mut acc = first.clone();
    for p in &parts[1..] {
        if p.num_states() != acc.num_states() {
            return Err(Error::DimensionMismatch { left: p.num_states(), right: acc.num_states() });
        }
        acc = acc.split_by_classes(|s| p.cell_index_of(s));
    }
    Ok(acc)
}

/// Finest common coarsening: connected components of the cell-overlap graph.
pub fn meet_partitions(parts: &[KnowledgePartition]) -> Result<KnowledgePartition> {
    let Some(first) = parts.first() else {
        return Err(Error::InvalidPartition("meet of no partitions".into()));
    };
    let n = first.num_states();
    for p in parts {
        if p.num_states() != n {
            return Err(Error::DimensionMismatch { left: p.num_states(), right: n });
        }
    }
    let mut dsu = Dsu::new(n);
    for p in parts {
        for cell in p.cells() {
            for w in cell.windows(2) {
                dsu.union(w[0], w[1]);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let covered: Vec<usize> =
        first.cells().iter().flat_map(|c| c.iter().copied()).collect();
    for s in covered {
        groups.entry(dsu.find(s)).or_default().push(s);
    }
    KnowledgePartition::from_cells(n, groups.into_values().collect())
}

struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Keep the smaller root so grouping is deterministic.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn part(n: usize, cells: &[&[usize]]) -> KnowledgePartition {
        KnowledgePartition::new(n, cells.iter().map(|c| c.to_vec()).collect()).unwrap()
    }

    #[test]
    fn construction_validates() {
        assert!(KnowledgePartition::new(3, vec![vec![0, 1], vec![2]]).is_ok());
        assert!(KnowledgePartition::new(3, vec![vec![0, 1]]).is_err());
        assert!(KnowledgePartition::new(3, vec![vec![0, 1], vec![1, 2]]).is_err());
        assert!(KnowledgePartition::new(3, vec![vec![0], vec![], vec![1, 2]]).is_err());
    }

    #[test]
    fn canonical_ordering_makes_equality_syntactic() {
        let a = KnowledgePartition::new(4, vec![vec![3, 1], vec![2, 0]]).unwrap();
        let b = KnowledgePartition::new(4, vec![vec![0, 2], vec![1, 3]]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn uninformative_message_leaves_partition_unchanged() {
        let mine = part(3, &[&[0, 1], &[2]]);
        let sender = part(3, &[&[0], &[1, 2]]);
        let out = refine_partition(&mine, &sender, &["same", "same"], &"same").unwrap();
        assert_eq!(out, mine);
    }

    #[test]
    fn observed_message_filters_states() {
        // S={a,b,c}; receiver {{a,b},{c}}; sender {{a},{b,c}}; observe the
        // {b,c} value: receiver cell {a,b} becomes {b}.
        let mine = part(3, &[&[0, 1], &[2]]);
        let sender = part(3, &[&[0], &[1, 2]]);
        let out = refine_partition(&mine, &sender, &[10u32, 20u32], &20u32).unwrap();
        assert_eq!(out.cells(), &[vec![1], vec![2]]);
        assert!(out.refines(&mine));
        assert!(!out.covers_fully());
    }

    #[test]
    fn fully_revealing_message_yields_singletons() {
        let mine = KnowledgePartition::trivial(3);
        let sender = KnowledgePartition::singletons(3);
        let out = refine_partition(&mine, &sender, &[0u32, 1, 2], &1u32).unwrap();
        assert_eq!(out.cells(), &[vec![1]]);
        // The full split across all classes is the singleton partition.
        let split = mine.split_by_classes(|s| s);
        assert_eq!(split, KnowledgePartition::singletons(3));
    }

    #[test]
    fn inconsistent_observation_errors() {
        let mine = part(2, &[&[0], &[1]]);
        let sender = KnowledgePartition::trivial(2);
        assert!(matches!(
            refine_partition(&mine, &sender, &[1u32], &9u32),
            Err(Error::InconsistentObservation)
        ));
    }

    #[test]
    fn join_examples() {
        let a = part(3, &[&[0, 1], &[2]]);
        let b = part(3, &[&[0], &[1, 2]]);
        let j = join_partitions(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(j, KnowledgePartition::singletons(3));
        assert_eq!(join_partitions(&[a.clone()]).unwrap(), a);
        assert_eq!(join_partitions(&[b.clone(), b.clone()]).unwrap(), b);
        assert!(j.refines(&a) && j.refines(&b));
    }

    #[test]
    fn meet_examples() {
        let a = part(3, &[&[0, 1], &[2]]);
        let b = part(3, &[&[0], &[1, 2]]);
        let m = meet_partitions(&[a.clone(), b]).unwrap();
        assert_eq!(m, KnowledgePartition::trivial(3));
        assert_eq!(meet_partitions(&[a.clone(), a.clone()]).unwrap(), a);
        let s = KnowledgePartition::singletons(4);
        assert_eq!(meet_partitions(&[s.clone(), s.clone()]).unwrap(), s);
    }
}
