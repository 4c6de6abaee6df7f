//! Communication graphs and spanning broadcast schedules.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// A directed communication graph over agents, strongly connected by
/// construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommGraph {
    num_agents: usize,
    edges: Vec<(usize, usize)>,
}

impl CommGraph {
    pub fn new(num_agents: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if num_agents == 0 {
            return Err(Error::ParameterOutOfRange("graph needs at least one agent".into()));
        }
        let mut edges: Vec<(usize, usize)> = edges
            .into_iter()
            .filter(|(a, b)| a != b)
            .collect();
        edges.sort_unstable();
        edges.dedup();
        for &(a, b) in &edges {
            if a >= num_agents || b >= num_agents {
                return Err(Error::ParameterOutOfRange(format!(
                    "edge ({a},{b}) outside 0..{num_agents}"
                )));
            }
        }
        let graph = Self { num_agents, edges };
        if !graph.is_strongly_connected() {
            return Err(Error::NotStronglyConnected);
        }
        Ok(graph)
    }

    pub fn complete(num_agents: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for a in 0..num_agents {
            for b in 0..num_agents {
                if a != b {
                    edges.push((a, b));
                }
            }
        }
        Self::new(num_agents, edges)
    }

    /// Directed cycle `0 -> 1 -> ... -> 0`, the worst-case topology.
    pub fn ring(num_agents: usize) -> Result<Self> {
        if num_agents == 1 {
            return Self::new(1, vec![]);
        }
        let edges = (0..num_agents).map(|a| (a, (a + 1) % num_agents)).collect();
        Self::new(num_agents, edges)
    }

    pub fn num_agents(&self) -> usize {
        self.num_agents
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    fn successors(&self, v: usize, reversed: bool) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| {
                if reversed {
                    (b == v).then_some(a)
                } else {
                    (a == v).then_some(b)
                }
            })
            .collect()
    }

    fn bfs(&self, reversed: bool) -> Vec<Option<(usize, usize)>> {
        // parent edge and depth per node, from agent 0.
        let mut state: Vec<Option<(usize, usize)>> = vec![None; self.num_agents];
        state[0] = Some((0, 0));
        let mut queue = VecDeque::from([0usize]);
        while let Some(v) = queue.pop_front() {
            let depth = state[v].expect("visited").1;
            for w in self.successors(v, reversed) {
                if state[w].is_none() {
                    state[w] = Some((v, depth + 1));
                    queue.push_back(w);
                }
            }
        }
        state
    }

    fn is_strongly_connected(&self) -> bool {
        self.bfs(false).iter().all(|s| s.is_some())
            && self.bfs(true).iter().all(|s| s.is_some())
    }
}

/// Broadcast schedule built from two breadth-first spanning trees rooted at
/// agent 0: one pointing outward, one inward. Cycling through both edge
/// lists relays every agent's current expectation to every other agent once
/// per block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanningSchedule {
    num_agents: usize,
    outward: Vec<(usize, usize)>,
    inward: Vec<(usize, usize)>,
    block: Vec<(usize, usize)>,
    diameter: usize,
}

impl SpanningSchedule {
    pub fn num_agents(&self) -> usize {
        self.num_agents
    }

    pub fn outward(&self) -> &[(usize, usize)] {
        &self.outward
    }

    pub fn inward(&self) -> &[(usize, usize)] {
        &self.inward
    }

    /// One full relay block: the outward edges then the inward edges, each
    /// in parent-before-child order. Length `2 (N - 1)`.
    pub fn block(&self) -> &[(usize, usize)] {
        &self.block
    }

    pub fn diameter(&self) -> usize {
        self.diameter
    }

    /// The agent transmitting the `i`-th message of every block.
    pub fn sender_at(&self, slot: usize) -> usize {
        self.block[slot % self.block.len()].0
    }
}

/// Builds the two-tree broadcast schedule for a strongly connected graph.
pub fn build_spanning_schedule(graph: &CommGraph) -> Result<SpanningSchedule> {
    let n = graph.num_agents();
    if n == 1 {
        return Ok(SpanningSchedule {
            num_agents: 1,
            outward: vec![],
            inward: vec![],
            block: vec![],
            diameter: 0,
        });
    }
    let out_state = graph.bfs(false);
    let in_state = graph.bfs(true);

    // Outward tree: edges parent -> child in discovery depth order.
    let mut outward: Vec<(usize, usize, usize)> = Vec::with_capacity(n - 1);
    let mut inward: Vec<(usize, usize, usize)> = Vec::with_capacity(n - 1);
    let mut depth_out = 0;
    let mut depth_in = 0;
    for v in 1..n {
        let (parent, depth) = out_state[v].ok_or(Error::NotStronglyConnected)?;
        outward.push((parent, v, depth));
        depth_out = depth_out.max(depth);
        let (parent, depth) = in_state[v].ok_or(Error::NotStronglyConnected)?;
        // Reverse-graph edge (parent <- v) is the forward edge v -> parent.
        inward.push((v, parent, depth));
        depth_in = depth_in.max(depth);
    }
    // Outward: shallow edges first so parents speak before children.
    outward.sort_by_key(|&(_, child, depth)| (depth, child));
    // Inward: deep edges first so information flows leaf to root.
    inward.sort_by_key(|&(child, _, depth)| (usize::MAX - depth, child));

    let outward: Vec<(usize, usize)> = outward.into_iter().map(|(a, b, _)| (a, b)).collect();
    let inward: Vec<(usize, usize)> = inward.into_iter().map(|(a, b, _)| (a, b)).collect();
    let mut block = outward.clone();
    block.extend(inward.iter().copied());
    Ok(SpanningSchedule {
        num_agents: n,
        outward,
        inward,
        block,
        diameter: depth_out.max(depth_in),
    })
}
