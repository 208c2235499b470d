//! TOPO: exact two-pass message order on tree-structured factor graphs.
//!
//! Each connected component is rooted at its lowest-indexed variable.
//! Messages flowing toward the root come first, deepest factors first;
//! messages flowing away follow, shallowest first. Every N_E dependency that
//! lands earlier in this sequence is declared as a pair.

use std::cmp::Reverse;
use std::collections::VecDeque;

use super::{for_each_neighbor_e, UpdatePoset};
use crate::error::{Error, Result};
use crate::graph::{EdgeId, FactorGraph, VariableId};

const NONE: u32 = u32::MAX;

pub(crate) fn topo_poset(graph: &FactorGraph) -> Result<UpdatePoset> {
    let order = topo_sequence(graph)?;
    let mut pos = vec![0u32; graph.num_edges()];
    for (i, e) in order.iter().enumerate() {
        pos[graph.edge_ordinal(*e)] = i as u32;
    }
    let mut pairs = Vec::new();
    for &e in &order {
        let pe = pos[graph.edge_ordinal(e)];
        for_each_neighbor_e(graph, e, |dep| {
            if pos[graph.edge_ordinal(dep)] < pe {
                pairs.push((dep, e));
            }
        });
    }
    UpdatePoset::neighbor_closed(graph, pairs)
}

/// Inward-then-outward sequence of all edges. Fails on any undirected cycle.
pub(crate) fn topo_sequence(graph: &FactorGraph) -> Result<Vec<EdgeId>> {
    let nv = graph.num_variables();
    let nf = graph.num_factors();
    // Edge through which each node was discovered.
    let mut var_parent = vec![NONE; nv];
    let mut factor_parent = vec![NONE; nf];
    let mut var_seen = vec![false; nv];
    let mut factor_seen = vec![false; nf];
    let mut factor_depth = vec![0u32; nf];
    let mut var_depth = vec![0u32; nv];

    enum Node {
        Var(usize),
        Factor(usize),
    }

    for root in 0..nv {
        if var_seen[root] {
            continue;
        }
        var_seen[root] = true;
        let mut queue = VecDeque::from([Node::Var(root)]);
        while let Some(node) = queue.pop_front() {
            match node {
                Node::Var(v) => {
                    for &e in graph.adjacent(VariableId(v as u32)) {
                        let ord = graph.edge_ordinal(e) as u32;
                        if ord == var_parent[v] {
                            continue;
                        }
                        let f = e.factor as usize;
                        if factor_seen[f] {
                            return Err(Error::NotATree(e));
                        }
                        factor_seen[f] = true;
                        factor_parent[f] = ord;
                        factor_depth[f] = var_depth[v] + 1;
                        queue.push_back(Node::Factor(f));
                    }
                }
                Node::Factor(f) => {
                    let factor = graph.factor(f);
                    for (slot, w) in factor.variables().enumerate() {
                        let e = EdgeId::new(f, slot);
                        let ord = graph.edge_ordinal(e) as u32;
                        if ord == factor_parent[f] {
                            continue;
                        }
                        let w = w.index();
                        if var_seen[w] {
                            return Err(Error::NotATree(e));
                        }
                        var_seen[w] = true;
                        var_parent[w] = ord;
                        var_depth[w] = factor_depth[f] + 1;
                        queue.push_back(Node::Var(w));
                    }
                }
            }
        }
    }

    let (mut inward, mut outward): (Vec<EdgeId>, Vec<EdgeId>) = graph
        .edges()
        .partition(|&e| factor_parent[e.factor as usize] == graph.edge_ordinal(e) as u32);
    inward.sort_by_key(|&e| (Reverse(factor_depth[e.factor as usize]), graph.edge_ordinal(e)));
    outward.sort_by_key(|&e| (factor_depth[e.factor as usize], graph.edge_ordinal(e)));
    inward.extend(outward);
    Ok(inward)
}
