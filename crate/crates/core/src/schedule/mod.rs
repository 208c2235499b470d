//! Update strategies as strict partial orders over edges, and their
//! compilation into ordered parallel batches.
//!
//! An order `e' ≺ e` means the update of `e` must see the value of `e'`
//! computed in the same iteration, whenever `e'` is one of the messages `e`
//! actually depends on (`e' ∈ N_E(e)`). Dependency analysis sorts the edges
//! breadth-first over the order and cuts a new batch whenever the next edge
//! depends on something already in the current batch.

mod poset;
mod strategy_file;
mod topo;

use std::collections::HashSet;

pub use poset::UpdatePoset;
pub use strategy_file::{parse_strategy, write_strategy};

use crate::error::{Error, Result};
use crate::graph::{EdgeId, FactorGraph};

/// Builtin and user-defined update strategies.
#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    /// All factor-to-variable messages from the previous iteration.
    Parall,
    /// A fixed total order. `None` means ascending edge order.
    SeqFix(Option<Vec<EdgeId>>),
    /// Two-pass leaves-to-root-to-leaves order on tree-structured graphs.
    Topo,
    /// Explicit `before → after` pairs.
    Custom(Vec<(EdgeId, EdgeId)>),
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Parall => "PARALL",
            Strategy::SeqFix(_) => "SEQFIX",
            Strategy::Topo => "TOPO",
            Strategy::Custom(_) => "CUSTOM",
        }
    }

    /// Builtin strategy by name (SEQFIX uses ascending edge order).
    pub fn from_name(name: &str) -> Option<Self> {
        match name.to_ascii_uppercase().as_str() {
            "PARALL" => Some(Strategy::Parall),
            "SEQFIX" => Some(Strategy::SeqFix(None)),
            "TOPO" => Some(Strategy::Topo),
            _ => None,
        }
    }
}

/// `N_E((a, v))`: edges `(a*, v*)` with `v* ∈ N_A(a) \ {v}` and
/// `a* ∈ N_V(v*) \ {a}`.
pub fn neighbors_e(graph: &FactorGraph, edge: EdgeId) -> Vec<EdgeId> {
    let mut out = Vec::new();
    for_each_neighbor_e(graph, edge, |e| out.push(e));
    out
}

#[inline]
pub(crate) fn for_each_neighbor_e(graph: &FactorGraph, edge: EdgeId, mut f: impl FnMut(EdgeId)) {
    let factor = graph.factor(edge.factor as usize);
    for (slot, v) in factor.variables().enumerate() {
        if slot == edge.slot as usize {
            continue;
        }
        for &other in graph.adjacent(v) {
            if other.factor != edge.factor {
                f(other);
            }
        }
    }
}

/// Builds the poset for a strategy.
pub fn builtin_poset(graph: &FactorGraph, strategy: &Strategy) -> Result<UpdatePoset> {
    match strategy {
        Strategy::Parall => UpdatePoset::empty(graph),
        Strategy::SeqFix(None) => UpdatePoset::total(graph, graph.edges().collect()),
        Strategy::SeqFix(Some(order)) => UpdatePoset::total(graph, order.clone()),
        Strategy::Topo => topo::topo_poset(graph),
        Strategy::Custom(pairs) => UpdatePoset::new(graph, pairs.clone()),
    }
}

/// `δ(e1, e2)`: 1 iff `e2 ≺ e1` and `e2 ∈ N_E(e1)`.
pub fn delta(poset: &UpdatePoset, graph: &FactorGraph, e1: EdgeId, e2: EdgeId) -> u8 {
    let depends = e1 != e2 && neighbors_e(graph, e1).contains(&e2);
    u8::from(depends && poset.precedes(graph.edge_ordinal(e2), graph.edge_ordinal(e1)))
}

/// Ordered factor-to-variable batches `s_1..s_k` with their aligned
/// variable-to-factor batches `t_1..t_k`.
///
/// A `t` entry `EdgeId(a, slot)` names the message from the variable at
/// `slot` to factor `a`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Schedule {
    pub factor_to_var: Vec<Vec<EdgeId>>,
    pub var_to_factor: Vec<Vec<EdgeId>>,
}

impl Schedule {
    pub fn num_batches(&self) -> usize {
        self.factor_to_var.len()
    }

    pub fn batch_sizes(&self) -> Vec<usize> {
        self.factor_to_var.iter().map(Vec::len).collect()
    }

    /// Total message updates per iteration, in both directions.
    pub fn updates_per_iteration(&self) -> usize {
        self.factor_to_var.iter().map(Vec::len).sum::<usize>() + self.var_to_factor.iter().map(Vec::len).sum::<usize>()
    }
}

/// Greedy batching over the breadth-first topological order of the poset.
/// Only the `s` batches are filled.
pub fn dependency_analysis(poset: &UpdatePoset, graph: &FactorGraph) -> Schedule {
    let order = poset.topological_order();
    let mut batches: Vec<Vec<EdgeId>> = Vec::new();
    if order.is_empty() {
        return Schedule::default();
    }
    if poset.is_empty() {
        let all = order.iter().map(|&i| graph.edge_at(i)).collect();
        return Schedule {
            factor_to_var: vec![all],
            var_to_factor: Vec::new(),
        };
    }

    const UNASSIGNED: u32 = u32::MAX;
    let mut batch_of = vec![UNASSIGNED; graph.num_edges()];
    let mut reach = poset.reachability(graph);
    let mut current: Vec<EdgeId> = Vec::new();
    let mut current_id = 0u32;
    for &ord in &order {
        let edge = graph.edge_at(ord);
        let mut cut = false;
        for_each_neighbor_e(graph, edge, |dep| {
            if cut {
                return;
            }
            let d = graph.edge_ordinal(dep);
            if batch_of[d] == current_id && reach.precedes_neighbor(d, ord) {
                cut = true;
            }
        });
        if cut {
            batches.push(std::mem::take(&mut current));
            current_id += 1;
        }
        batch_of[ord] = current_id;
        current.push(edge);
    }
    batches.push(current);
    Schedule {
        factor_to_var: batches,
        var_to_factor: Vec::new(),
    }
}

/// `t_i = ∪_{(a,v) ∈ s_i} {(v*, a) : v* ∈ N_A(a) \ {v}}`, deduplicated.
pub fn group_var_to_factor(mut schedule: Schedule, graph: &FactorGraph) -> Schedule {
    schedule.var_to_factor = schedule
        .factor_to_var
        .iter()
        .map(|batch| var_to_factor_batch(graph, batch))
        .collect();
    schedule
}

pub fn var_to_factor_batch(graph: &FactorGraph, batch: &[EdgeId]) -> Vec<EdgeId> {
    let mut t: Vec<EdgeId> = batch
        .iter()
        .flat_map(|e| {
            let arity = graph.factor(e.factor as usize).arity() as u32;
            (0..arity).filter(move |&s| s != e.slot).map(move |s| EdgeId {
                factor: e.factor,
                slot: s,
            })
        })
        .collect();
    t.sort_unstable();
    t.dedup();
    t
}

/// Poset, dependency analysis and variable-to-factor grouping in one step.
pub fn compile(graph: &FactorGraph, strategy: &Strategy) -> Result<(UpdatePoset, Schedule)> {
    let poset = builtin_poset(graph, strategy)?;
    let schedule = group_var_to_factor(dependency_analysis(&poset, graph), graph);
    Ok((poset, schedule))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// Edge missing from every batch.
    Missing(EdgeId),
    /// Edge present in more than one batch (or twice in one).
    Duplicate(EdgeId),
    /// Edge not in the graph.
    Unknown(EdgeId),
    /// `dependency ≺ edge`, `dependency ∈ N_E(edge)`, but it is not in an
    /// earlier batch.
    Ordering {
        edge: EdgeId,
        dependency: EdgeId,
        batch: usize,
    },
    /// `t_i` differs from the grouping of `s_i`.
    VarToFactor { batch: usize },
}

/// Checks partition, the earlier-batch dependency property, and the
/// `t`-batch construction. Empty means the schedule is sound.
pub fn verify_schedule(graph: &FactorGraph, poset: &UpdatePoset, schedule: &Schedule) -> Vec<Violation> {
    let mut violations = Vec::new();
    let mut batch_of: Vec<Option<usize>> = vec![None; graph.num_edges()];
    for (j, batch) in schedule.factor_to_var.iter().enumerate() {
        for &e in batch {
            if !graph.contains_edge(e) {
                violations.push(Violation::Unknown(e));
                continue;
            }
            let slot = &mut batch_of[graph.edge_ordinal(e)];
            if slot.is_some() {
                violations.push(Violation::Duplicate(e));
            }
            *slot = Some(j);
        }
    }
    for (ord, b) in batch_of.iter().enumerate() {
        if b.is_none() {
            violations.push(Violation::Missing(graph.edge_at(ord)));
        }
    }
    let mut reach = poset.reachability(graph);
    for (j, batch) in schedule.factor_to_var.iter().enumerate() {
        for &e in batch.iter().filter(|e| graph.contains_edge(**e)) {
            let ord = graph.edge_ordinal(e);
            for dep in neighbors_e(graph, e) {
                let d = graph.edge_ordinal(dep);
                if reach.precedes_neighbor(d, ord) && batch_of[d].is_none_or(|bd| bd >= j) {
                    violations.push(Violation::Ordering {
                        edge: e,
                        dependency: dep,
                        batch: j,
                    });
                }
            }
        }
    }
    if schedule.var_to_factor.len() != schedule.factor_to_var.len() {
        violations.push(Violation::VarToFactor {
            batch: schedule.var_to_factor.len().min(schedule.factor_to_var.len()),
        });
    } else {
        for (j, (s, t)) in schedule.factor_to_var.iter().zip(&schedule.var_to_factor).enumerate() {
            let valid: Vec<EdgeId> = s.iter().copied().filter(|e| graph.contains_edge(*e)).collect();
            let want: HashSet<EdgeId> = var_to_factor_batch(graph, &valid).into_iter().collect();
            let got: HashSet<EdgeId> = t.iter().copied().collect();
            if want != got || got.len() != t.len() {
                violations.push(Violation::VarToFactor { batch: j });
            }
        }
    }
    violations
}

/// Fails with the first violation, if any.
pub fn check_schedule(graph: &FactorGraph, poset: &UpdatePoset, schedule: &Schedule) -> Result<()> {
    match verify_schedule(graph, poset, schedule).first() {
        None => Ok(()),
        Some(v) => Err(Error::InvalidStrategy(format!("schedule violation: {v:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Factor, VariableId};

    fn three_var() -> FactorGraph {
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

    // a1→v1, a2→v2, a3→v1, a3→v2, a3→v3
    fn seqfix_order() -> Vec<EdgeId> {
        vec![
            EdgeId::new(0, 0),
            EdgeId::new(1, 0),
            EdgeId::new(2, 1),
            EdgeId::new(2, 2),
            EdgeId::new(2, 0),
        ]
    }

    #[test]
    fn neighbors_on_three_var() {
        let g = three_var();
        let mut n = neighbors_e(&g, EdgeId::new(2, 1));
        n.sort();
        assert_eq!(n, vec![EdgeId::new(1, 0)]);
        assert!(neighbors_e(&g, EdgeId::new(0, 0)).is_empty());
        let mut n = neighbors_e(&g, EdgeId::new(2, 0));
        n.sort();
        assert_eq!(n, vec![EdgeId::new(0, 0), EdgeId::new(1, 0)]);
    }

    #[test]
    fn parall_is_one_batch() {
        let g = three_var();
        let (poset, s) = compile(&g, &Strategy::Parall).unwrap();
        assert_eq!(poset.pairs().len(), 0);
        assert_eq!(s.batch_sizes(), vec![5]);
        assert!(verify_schedule(&g, &poset, &s).is_empty());
    }

    #[test]
    fn seqfix_walkthrough() {
        let g = three_var();
        let (poset, s) = compile(&g, &Strategy::SeqFix(Some(seqfix_order()))).unwrap();
        assert_eq!(s.factor_to_var[0], vec![EdgeId::new(0, 0), EdgeId::new(1, 0)]);
        assert_eq!(
            s.factor_to_var[1],
            vec![EdgeId::new(2, 1), EdgeId::new(2, 2), EdgeId::new(2, 0)]
        );
        assert!(s.var_to_factor[0].is_empty());
        assert_eq!(
            s.var_to_factor[1],
            vec![EdgeId::new(2, 0), EdgeId::new(2, 1), EdgeId::new(2, 2)]
        );
        assert!(verify_schedule(&g, &poset, &s).is_empty());
    }

    #[test]
    fn delta_values() {
        let g = three_var();
        let seq = builtin_poset(&g, &Strategy::SeqFix(Some(seqfix_order()))).unwrap();
        assert_eq!(delta(&seq, &g, EdgeId::new(2, 1), EdgeId::new(1, 0)), 1);
        assert_eq!(delta(&seq, &g, EdgeId::new(1, 0), EdgeId::new(2, 1)), 0);
        let par = builtin_poset(&g, &Strategy::Parall).unwrap();
        for a in g.edges() {
            assert_eq!(delta(&seq, &g, a, a), 0);
            for b in g.edges() {
                assert_eq!(delta(&par, &g, a, b), 0);
            }
        }
    }

    #[test]
    fn group_single_edge() {
        let g = three_var();
        assert_eq!(
            var_to_factor_batch(&g, &[EdgeId::new(2, 1)]),
            vec![EdgeId::new(2, 0), EdgeId::new(2, 2)]
        );
    }

    #[test]
    fn disconnected_total_order_is_one_batch() {
        let v = VariableId;
        let g = FactorGraph::new(2, vec![Factor::prior(v(0), 0.3), Factor::prior(v(1), 0.6)]).unwrap();
        let (_, s) = compile(&g, &Strategy::SeqFix(None)).unwrap();
        assert_eq!(s.num_batches(), 1);
    }

    #[test]
    fn chain_of_dependencies_cuts_every_edge() {
        // Path v0 - a0 - v1 - a1 - v2 - a2 - v3; order messages so that each
        // consecutive pair is N_E-dependent.
        let v = VariableId;
        let g = FactorGraph::new(
            4,
            vec![
                Factor::and(v(1), vec![v(0)], 0.9, 0.1),
                Factor::and(v(2), vec![v(1)], 0.8, 0.2),
                Factor::and(v(3), vec![v(2)], 0.7, 0.3),
            ],
        )
        .unwrap();
        // a0→v1 (0:0), a1→v2 (1:0), a2→v3 (2:0): each depends on the previous.
        let head_chain = [EdgeId::new(0, 0), EdgeId::new(1, 0), EdgeId::new(2, 0)];
        assert!(neighbors_e(&g, head_chain[1]).contains(&head_chain[0]));
        assert!(neighbors_e(&g, head_chain[2]).contains(&head_chain[1]));
        let (_, s) = compile(
            &g,
            &Strategy::Custom(vec![(head_chain[0], head_chain[1]), (head_chain[1], head_chain[2])]),
        )
        .unwrap();
        // The three body-slot edges are unconstrained and join the first batch.
        assert_eq!(s.num_batches(), 3);
    }
}
