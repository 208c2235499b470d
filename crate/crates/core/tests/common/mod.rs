#![allow(dead_code)]

use std::collections::VecDeque;

use hornlbp::graph::{EdgeId, Factor, FactorGraph, FactorKind, VariableId};
use hornlbp::schedule::Strategy;
use hornlbp::storage::Message;
use rand::seq::SliceRandom;
use rand::Rng;

pub fn three_var() -> FactorGraph {
    let v = VariableId;
    FactorGraph::new(
        3,
        vec![
            Factor::prior(v(0), 0.999),
            Factor::prior(v(1), 0.999),
            Factor::and(v(2), vec![v(0), v(1)], 0.999, 0.0),
        ],
    )
    .unwrap()
}

/// µa1→v1, µa2→v2, µa3→v1, µa3→v2, µa3→v3
pub fn walkthrough_order() -> Vec<EdgeId> {
    vec![
        EdgeId::new(0, 0),
        EdgeId::new(1, 0),
        EdgeId::new(2, 1),
        EdgeId::new(2, 2),
        EdgeId::new(2, 0),
    ]
}

pub fn random_kind(rng: &mut impl Rng) -> FactorKind {
    if rng.random_bool(0.5) {
        FactorKind::And
    } else {
        FactorKind::Or
    }
}

pub fn random_probability(rng: &mut impl Rng) -> f64 {
    rng.random_range(0.01..0.99)
}

pub fn random_message(rng: &mut impl Rng) -> Message {
    Message::new(rng.random_range(0.01..1.0), rng.random_range(0.01..1.0))
}

fn make_factor(kind: FactorKind, head: VariableId, body: Vec<VariableId>, p1: f64, p2: f64) -> Factor {
    match kind {
        FactorKind::And => Factor::and(head, body, p1, p2),
        FactorKind::Or => Factor::or(head, body, p1, p2),
    }
}

/// A random factor over `vars` (distinct), head picked among them.
fn random_factor(rng: &mut impl Rng, mut vars: Vec<VariableId>) -> Factor {
    let h = rng.random_range(0..vars.len());
    let head = vars.swap_remove(h);
    vars.shuffle(rng);
    if vars.is_empty() {
        return Factor::prior(head, random_probability(rng));
    }
    make_factor(
        random_kind(rng),
        head,
        vars,
        random_probability(rng),
        random_probability(rng),
    )
}

/// Tree-structured graph: each factor joins one existing variable to fresh
/// ones; extra priors never close a loop.
pub fn random_tree(rng: &mut impl Rng, max_vars: usize) -> FactorGraph {
    let target = rng.random_range(1..=max_vars);
    let mut n = 1;
    let mut factors = Vec::new();
    while n < target {
        let anchor = VariableId(rng.random_range(0..n) as u32);
        let fresh = rng.random_range(1..=3.min(target - n));
        let mut vars = vec![anchor];
        vars.extend((n..n + fresh).map(|i| VariableId(i as u32)));
        n += fresh;
        factors.push(random_factor(rng, vars));
    }
    for v in 0..n {
        if factors.is_empty() || rng.random_bool(0.4) {
            factors.push(Factor::prior(VariableId(v as u32), random_probability(rng)));
        }
    }
    factors.shuffle(rng);
    FactorGraph::new(n, factors).unwrap()
}

/// Arbitrary (usually loopy) graph with at most `max_edges` edges.
pub fn random_graph(rng: &mut impl Rng, max_edges: usize) -> FactorGraph {
    loop {
        let n = rng.random_range(2..=10);
        let budget = rng.random_range(max_edges / 3..=max_edges);
        let mut factors: Vec<Factor> = Vec::new();
        let mut edges = 0;
        let mut covered = vec![false; n];
        loop {
            let arity = rng.random_range(1..=4.min(n));
            if edges + arity > budget {
                break;
            }
            let mut pool: Vec<u32> = (0..n as u32).collect();
            pool.shuffle(rng);
            let vars: Vec<VariableId> = pool[..arity].iter().map(|&v| VariableId(v)).collect();
            for v in &vars {
                covered[v.index()] = true;
            }
            factors.push(random_factor(rng, vars));
            edges += arity;
        }
        for (v, c) in covered.iter().enumerate() {
            if !c {
                factors.push(Factor::prior(VariableId(v as u32), random_probability(rng)));
                edges += 1;
            }
        }
        if edges <= max_edges && !factors.is_empty() {
            return FactorGraph::new(n, factors).unwrap();
        }
    }
}

/// Random DAG relation over the edges: a shuffled order, with each forward
/// pair kept with probability `density`.
pub fn random_pairs(rng: &mut impl Rng, graph: &FactorGraph, density: f64) -> Vec<(EdgeId, EdgeId)> {
    let mut order: Vec<EdgeId> = graph.edges().collect();
    order.shuffle(rng);
    let mut pairs = Vec::new();
    for i in 0..order.len() {
        for j in i + 1..order.len() {
            if rng.random_bool(density) {
                pairs.push((order[i], order[j]));
            }
        }
    }
    pairs
}

/// One of PARALL, a random SEQFIX order, or a random CUSTOM relation.
pub fn random_strategy(rng: &mut impl Rng, graph: &FactorGraph) -> Strategy {
    match rng.random_range(0..4) {
        0 => Strategy::Parall,
        1 => {
            let mut order: Vec<EdgeId> = graph.edges().collect();
            order.shuffle(rng);
            Strategy::SeqFix(Some(order))
        }
        _ => {
            let density = [0.02, 0.1, 0.3][rng.random_range(0..3)];
            Strategy::Custom(random_pairs(rng, graph, density))
        }
    }
}

/// Longest shortest path, in factor-graph edges, over all components.
pub fn diameter(graph: &FactorGraph) -> usize {
    let nv = graph.num_variables();
    let nodes = nv + graph.num_factors();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    for (f, factor) in graph.factors().iter().enumerate() {
        for v in factor.variables() {
            adj[v.index()].push(nv + f);
            adj[nv + f].push(v.index());
        }
    }
    let mut best = 0;
    for s in 0..nodes {
        let mut dist = vec![usize::MAX; nodes];
        dist[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &w in &adj[u] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    best = best.max(dist[w]);
                    q.push_back(w);
                }
            }
        }
    }
    best
}
