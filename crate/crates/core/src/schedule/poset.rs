use std::collections::{HashMap, HashSet};

use super::for_each_neighbor_e;
use crate::error::{Error, Result};
use crate::graph::{EdgeId, FactorGraph};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Shape {
    Empty,
    /// Every pair of distinct edges is comparable; `layer` is the rank.
    Total,
    /// Every N_E-neighbour pair in the closure is a declared pair.
    NeighborClosed,
    General,
}

/// A strict partial order over the edge set, stored as the declared
/// (covering) pairs. The closure is never materialized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpdatePoset {
    num_edges: usize,
    pairs: Vec<(EdgeId, EdgeId)>,
    // Successors by edge ordinal, CSR.
    succ_offsets: Vec<u32>,
    succ: Vec<u32>,
    // Longest-path depth from the minimal elements.
    layer: Vec<u32>,
    shape: Shape,
}

impl UpdatePoset {
    /// Validates the pairs (edges exist, relation acyclic).
    pub fn new(graph: &FactorGraph, pairs: Vec<(EdgeId, EdgeId)>) -> Result<Self> {
        Self::build(graph, pairs, Shape::General)
    }

    pub fn empty(graph: &FactorGraph) -> Result<Self> {
        Self::build(graph, Vec::new(), Shape::Empty)
    }

    /// Total order from a permutation of the edge set.
    pub fn total(graph: &FactorGraph, order: Vec<EdgeId>) -> Result<Self> {
        let n = graph.num_edges();
        if order.len() != n {
            return Err(Error::InvalidStrategy(format!(
                "SEQFIX order lists {} edges, graph has {n}",
                order.len()
            )));
        }
        let mut seen = vec![false; n];
        for &e in &order {
            graph.check_edge(e)?;
            let o = graph.edge_ordinal(e);
            if std::mem::replace(&mut seen[o], true) {
                return Err(Error::InvalidStrategy(format!("SEQFIX order repeats edge {e}")));
            }
        }
        let pairs = order.windows(2).map(|w| (w[0], w[1])).collect();
        Self::build(graph, pairs, Shape::Total)
    }

    pub(crate) fn neighbor_closed(graph: &FactorGraph, pairs: Vec<(EdgeId, EdgeId)>) -> Result<Self> {
        Self::build(graph, pairs, Shape::NeighborClosed)
    }

    fn build(graph: &FactorGraph, pairs: Vec<(EdgeId, EdgeId)>, shape: Shape) -> Result<Self> {
        let n = graph.num_edges();
        let mut out_degree = vec![0u32; n + 1];
        for &(a, b) in &pairs {
            graph.check_edge(a)?;
            graph.check_edge(b)?;
            if a == b {
                return Err(Error::CyclicOrder(a));
            }
            out_degree[graph.edge_ordinal(a) + 1] += 1;
        }
        let mut succ_offsets = out_degree;
        for i in 0..n {
            succ_offsets[i + 1] += succ_offsets[i];
        }
        let mut fill = succ_offsets.clone();
        let mut succ = vec![0u32; pairs.len()];
        let mut indegree = vec![0u32; n];
        for &(a, b) in &pairs {
            let (a, b) = (graph.edge_ordinal(a), graph.edge_ordinal(b));
            succ[fill[a] as usize] = b as u32;
            fill[a] += 1;
            indegree[b] += 1;
        }

        // Kahn, tracking longest-path depth.
        let mut layer = vec![0u32; n];
        let mut queue: Vec<u32> = (0..n as u32).filter(|&i| indegree[i as usize] == 0).collect();
        let mut head = 0;
        while head < queue.len() {
            let u = queue[head] as usize;
            head += 1;
            for &s in &succ[succ_offsets[u] as usize..succ_offsets[u + 1] as usize] {
                let s = s as usize;
                layer[s] = layer[s].max(layer[u] + 1);
                indegree[s] -= 1;
                if indegree[s] == 0 {
                    queue.push(s as u32);
                }
            }
        }
        if queue.len() < n {
            let stuck = (0..n).find(|&i| indegree[i] > 0).unwrap();
            return Err(Error::CyclicOrder(graph.edge_at(stuck)));
        }

        let shape = match shape {
            Shape::General if pairs.is_empty() => Shape::Empty,
            Shape::General if is_chain(&layer) => Shape::Total,
            s => s,
        };
        Ok(UpdatePoset {
            num_edges: n,
            pairs,
            succ_offsets,
            succ,
            layer,
            shape,
        })
    }

    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    /// The declared pairs `(before, after)`.
    pub fn pairs(&self) -> &[(EdgeId, EdgeId)] {
        &self.pairs
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Breadth-first layer (longest chain below) of an edge ordinal.
    pub fn layer(&self, ordinal: usize) -> u32 {
        self.layer[ordinal]
    }

    /// Edge ordinals sorted by (layer, ordinal).
    pub fn topological_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.num_edges).collect();
        order.sort_by_key(|&i| (self.layer[i], i));
        order
    }

    fn successors(&self, u: usize) -> &[u32] {
        &self.succ[self.succ_offsets[u] as usize..self.succ_offsets[u + 1] as usize]
    }

    /// Closure query `a ≺ b` by edge ordinal. Uncached; use
    /// [`reachability`](Self::reachability) for repeated queries.
    pub fn precedes(&self, a: usize, b: usize) -> bool {
        match self.shape {
            Shape::Empty => false,
            Shape::Total => self.layer[a] < self.layer[b],
            _ => self.search(a, b),
        }
    }

    fn search(&self, a: usize, b: usize) -> bool {
        if a == b || self.layer[a] >= self.layer[b] {
            return false;
        }
        let limit = self.layer[b];
        let mut stack = vec![a as u32];
        let mut seen = HashSet::new();
        while let Some(u) = stack.pop() {
            for &s in self.successors(u as usize) {
                if s as usize == b {
                    return true;
                }
                if self.layer[s as usize] < limit && seen.insert(s) {
                    stack.push(s);
                }
            }
        }
        false
    }

    pub(crate) fn reachability<'a>(&'a self, graph: &'a FactorGraph) -> Reachability<'a> {
        Reachability {
            poset: self,
            direct: matches!(self.shape, Shape::NeighborClosed | Shape::General).then(|| {
                self.pairs
                    .iter()
                    .map(|&(a, b)| (graph.edge_ordinal(a) as u32, graph.edge_ordinal(b) as u32))
                    .collect()
            }),
            memo: HashMap::new(),
        }
    }

    /// Checks there is no δ-cycle (`e(i+1) ≺ e(i)` and `e(i+1) ∈ N_E(e(i))`
    /// throughout, returning to the start). Returns an edge on a cycle if one
    /// exists.
    pub fn find_delta_cycle(&self, graph: &FactorGraph) -> Option<EdgeId> {
        let n = self.num_edges;
        let mut reach = self.reachability(graph);
        // δ-graph: e1 → e2 when δ(e1, e2) = 1.
        let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
        for e1 in graph.edges() {
            let o1 = graph.edge_ordinal(e1);
            let mut deps = Vec::new();
            for_each_neighbor_e(graph, e1, |e2| deps.push(graph.edge_ordinal(e2)));
            for o2 in deps {
                if reach.precedes_neighbor(o2, o1) {
                    adj[o1].push(o2 as u32);
                }
            }
        }
        let mut indeg = vec![0usize; n];
        for list in &adj {
            for &t in list {
                indeg[t as usize] += 1;
            }
        }
        let mut stack: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut done = 0;
        while let Some(u) = stack.pop() {
            done += 1;
            for &t in &adj[u] {
                indeg[t as usize] -= 1;
                if indeg[t as usize] == 0 {
                    stack.push(t as usize);
                }
            }
        }
        (done < n).then(|| graph.edge_at((0..n).find(|&i| indeg[i] > 0).unwrap()))
    }
}

fn is_chain(layer: &[u32]) -> bool {
    let mut seen = vec![false; layer.len()];
    layer.iter().all(|&l| !std::mem::replace(&mut seen[l as usize], true))
}

/// Memoized closure queries for dependency analysis.
pub(crate) struct Reachability<'a> {
    poset: &'a UpdatePoset,
    direct: Option<HashSet<(u32, u32)>>,
    memo: HashMap<(u32, u32), bool>,
}

impl Reachability<'_> {
    /// `a ≺ b`, where the caller guarantees `a ∈ N_E(b)`.
    pub(crate) fn precedes_neighbor(&mut self, a: usize, b: usize) -> bool {
        let p = self.poset;
        match p.shape {
            Shape::Empty => false,
            Shape::Total => p.layer[a] < p.layer[b],
            Shape::NeighborClosed => self.is_direct(a, b),
            Shape::General => {
                if a == b || p.layer[a] >= p.layer[b] {
                    return false;
                }
                if self.is_direct(a, b) {
                    return true;
                }
                let key = (a as u32, b as u32);
                if let Some(&hit) = self.memo.get(&key) {
                    return hit;
                }
                let hit = p.search(a, b);
                self.memo.insert(key, hit);
                hit
            }
        }
    }

    fn is_direct(&self, a: usize, b: usize) -> bool {
        self.direct.as_ref().is_some_and(|d| d.contains(&(a as u32, b as u32)))
    }
}
