//! Brute-force references: dense factor tables, naive sum-product messages,
//! exhaustive enumeration, and a one-message-at-a-time evaluation of update
//! strategies. Nothing here shares code with the engine's kernels, storage
//! or batching.

use std::time::Instant;

use crate::engine::kernels::Tally;
use crate::engine::{EngineOptions, InferenceResult, Marginal};
use crate::error::{Degenerate, Error, Result};
use crate::graph::{EdgeId, Factor, FactorGraph, FactorKind, VariableId};
use crate::schedule::UpdatePoset;
use crate::storage::Message;

pub const MAX_TABLE_ARITY: usize = 20;
pub const MAX_ENUMERATION_VARIABLES: usize = 24;
pub const MAX_REFERENCE_EDGES: usize = 2048;

/// `values[bits]` where bit 0 is the head and bit `k` the `k`-th body slot.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseFactorTable {
    pub arity: usize,
    pub values: Vec<f64>,
}

impl DenseFactorTable {
    pub fn value(&self, bits: usize) -> f64 {
        self.values[bits]
    }
}

fn table_value(kind: FactorKind, n: usize, p1: f64, p2: f64, bits: usize) -> f64 {
    let head = bits & 1 == 1;
    let body = bits >> 1;
    let condition = match kind {
        FactorKind::And => body == (1usize << n) - 1,
        FactorKind::Or => body != 0,
    };
    let p = match (kind, condition) {
        (FactorKind::And, true) | (FactorKind::Or, true) => p1,
        _ => p2,
    };
    if head {
        p
    } else {
        1.0 - p
    }
}

pub fn materialize_table(factor: &Factor) -> Result<DenseFactorTable> {
    let arity = factor.arity();
    if arity > MAX_TABLE_ARITY {
        return Err(Error::SizeGuard {
            what: "factor arity",
            size: arity,
            limit: MAX_TABLE_ARITY,
        });
    }
    let n = arity - 1;
    let values = (0..1usize << arity)
        .map(|bits| table_value(factor.kind, n, factor.p1, factor.p2, bits))
        .collect();
    Ok(DenseFactorTable { arity, values })
}

/// Sum over every assignment with the target fixed. `incoming` has one
/// message per non-target slot, in slot order.
pub fn naive_factor_message(
    table: &DenseFactorTable,
    incoming: &[Message],
    target: usize,
    tally: &mut impl Tally,
) -> Message {
    assert_eq!(
        incoming.len() + 1,
        table.arity,
        "one incoming message per non-target slot"
    );
    let mut out = [0.0f64; 2];
    for bits in 0..table.values.len() {
        let x = (bits >> target) & 1;
        let mut w = table.values[bits];
        let mut k = 0;
        for slot in 0..table.arity {
            if slot == target {
                continue;
            }
            let m = incoming[k];
            w *= if (bits >> slot) & 1 == 1 { m.m1 } else { m.m0 };
            k += 1;
        }
        tally.mul((table.arity - 1) as u64);
        out[x] += w;
    }
    Message::new(out[0], out[1])
}

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
struct Accum {
    sum: f64,
    carry: f64,
}

impl Accum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(self) -> f64 {
        self.sum + self.carry
    }
}

/// Marginals by enumerating all `2^N` assignments.
pub fn exact_marginals(graph: &FactorGraph) -> Result<Vec<Marginal>> {
    let n = graph.num_variables();
    if n > MAX_ENUMERATION_VARIABLES {
        return Err(Error::SizeGuard {
            what: "variables for enumeration",
            size: n,
            limit: MAX_ENUMERATION_VARIABLES,
        });
    }
    let tables: Vec<(Vec<usize>, DenseFactorTable)> = graph
        .factors()
        .iter()
        .map(|f| Ok((f.variables().map(VariableId::index).collect(), materialize_table(f)?)))
        .collect::<Result<_>>()?;
    let mut ones = vec![Accum::default(); n];
    let mut total = Accum::default();
    for assignment in 0u64..1 << n {
        let mut w = 1.0;
        for (vars, table) in &tables {
            let mut bits = 0;
            for (slot, &v) in vars.iter().enumerate() {
                bits |= (((assignment >> v) & 1) as usize) << slot;
            }
            w *= table.values[bits];
            if w == 0.0 {
                break;
            }
        }
        if w == 0.0 {
            continue;
        }
        total.add(w);
        for (v, acc) in ones.iter_mut().enumerate() {
            if (assignment >> v) & 1 == 1 {
                acc.add(w);
            }
        }
    }
    let z = total.total();
    if z.is_nan() || z <= 0.0 {
        return Err(Error::Underflow(Degenerate::Joint));
    }
    Ok(ones
        .into_iter()
        .map(|a| {
            let p1 = (a.total() / z).clamp(0.0, 1.0);
            Marginal { p0: 1.0 - p1, p1 }
        })
        .collect())
}

/// Each stage of schedule semantics recomputed from scratch over an
/// explicit closure matrix.
#[derive(Debug, Clone)]
pub struct ReferencePlan {
    /// `closure[a * n + b]` iff `a ≺ b`.
    closure: Vec<bool>,
    /// Edges by ordinal in update order.
    pub order: Vec<usize>,
    /// Batch index per edge ordinal.
    pub batch: Vec<usize>,
    /// `neighbors[e]`: ordinals in `N_E(e)`.
    pub neighbors: Vec<Vec<usize>>,
    n: usize,
}

impl ReferencePlan {
    pub fn new(graph: &FactorGraph, poset: &UpdatePoset) -> Result<Self> {
        let n = graph.num_edges();
        if n > MAX_REFERENCE_EDGES {
            return Err(Error::SizeGuard {
                what: "edges for the sequential reference",
                size: n,
                limit: MAX_REFERENCE_EDGES,
            });
        }
        let edges: Vec<EdgeId> = (0..n).map(|i| graph.edge_at(i)).collect();
        let pairs: Vec<(usize, usize)> = poset
            .pairs()
            .iter()
            .map(|&(a, b)| (graph.edge_ordinal(a), graph.edge_ordinal(b)))
            .collect();

        // Warshall closure.
        let mut closure = vec![false; n * n];
        for &(a, b) in &pairs {
            closure[a * n + b] = true;
        }
        for k in 0..n {
            for i in 0..n {
                if closure[i * n + k] {
                    for j in 0..n {
                        if closure[k * n + j] {
                            closure[i * n + j] = true;
                        }
                    }
                }
            }
        }
        if (0..n).any(|i| closure[i * n + i]) {
            return Err(Error::CyclicOrder(edges[(0..n).find(|&i| closure[i * n + i]).unwrap()]));
        }

        // Longest-path layers by repeated relaxation.
        let mut layer = vec![0usize; n];
        loop {
            let mut changed = false;
            for &(a, b) in &pairs {
                if layer[b] < layer[a] + 1 {
                    layer[b] = layer[a] + 1;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| (layer[i], i));

        // N_E by scanning every edge pair.
        let neighbors: Vec<Vec<usize>> = (0..n)
            .map(|i| {
                let e = edges[i];
                let f = graph.factor(e.factor as usize);
                let target = f.variable(e.slot as usize);
                (0..n)
                    .filter(|&j| {
                        let d = edges[j];
                        let w = graph.edge_variable(d);
                        d.factor != e.factor && w != target && f.variables().any(|u| u == w)
                    })
                    .collect()
            })
            .collect();

        let mut batch = vec![0usize; n];
        let mut current = 0;
        let mut members: Vec<usize> = Vec::new();
        for &e in &order {
            if members.iter().any(|&d| closure[d * n + e] && neighbors[e].contains(&d)) {
                current += 1;
                members.clear();
            }
            batch[e] = current;
            members.push(e);
        }
        Ok(ReferencePlan {
            closure,
            order,
            batch,
            neighbors,
            n,
        })
    }

    pub fn precedes(&self, a: usize, b: usize) -> bool {
        self.closure[a * self.n + b]
    }

    pub fn num_batches(&self) -> usize {
        self.batch.iter().max().map_or(0, |b| b + 1)
    }

    /// Whether the update of `e` reads this iteration's value of `d`
    /// (requires `d ∈ N_E(e)`).
    pub fn reads_current(&self, e: usize, d: usize) -> bool {
        self.batch[d] < self.batch[e]
    }
}

// Exact power-of-two rescaling keeps values in range without altering them
// beyond a common factor.
fn rescale(m: Message) -> Message {
    let big = m.m0.max(m.m1);
    if big == 0.0 || !big.is_finite() {
        return m;
    }
    let e = big.log2().floor() as i32;
    if e == 0 {
        return m;
    }
    // two steps so neither factor overflows for subnormal inputs
    let half = 2f64.powi(-e / 2);
    let rest = 2f64.powi(-e - (-e / 2));
    Message::new(m.m0 * half * rest, m.m1 * half * rest)
}

/// Sequential evaluation of an update strategy, one factor-to-variable
/// message at a time.
pub struct SequentialReference<'g> {
    graph: &'g FactorGraph,
    plan: ReferencePlan,
    tables: Vec<DenseFactorTable>,
    ftov: Vec<Message>,
    /// Messages updated so far this iteration, by edge ordinal.
    log: Vec<(usize, Message)>,
}

impl<'g> SequentialReference<'g> {
    pub fn new(graph: &'g FactorGraph, poset: &UpdatePoset) -> Result<Self> {
        let plan = ReferencePlan::new(graph, poset)?;
        let tables = graph.factors().iter().map(materialize_table).collect::<Result<_>>()?;
        Ok(SequentialReference {
            graph,
            plan,
            tables,
            ftov: vec![Message::UNIFORM; graph.num_edges()],
            log: Vec::new(),
        })
    }

    pub fn plan(&self) -> &ReferencePlan {
        &self.plan
    }

    /// Factor-to-variable message by edge ordinal.
    pub fn message(&self, ordinal: usize) -> Message {
        self.ftov[ordinal]
    }

    /// Messages in the order they were computed during the last iteration.
    pub fn last_iteration_log(&self) -> &[(usize, Message)] {
        &self.log
    }

    pub fn step(&mut self) -> Result<()> {
        let g = self.graph;
        let previous = self.ftov.clone();
        self.log.clear();
        for &e in &self.plan.order {
            let edge = g.edge_at(e);
            let fi = edge.factor as usize;
            let factor = g.factor(fi);
            let mut incoming = Vec::with_capacity(factor.arity() - 1);
            for (slot, v) in factor.variables().enumerate() {
                if slot == edge.slot as usize {
                    continue;
                }
                let mut m = Message::UNIFORM;
                for &other in g.adjacent(v) {
                    if other.factor as usize == fi {
                        continue;
                    }
                    let d = g.edge_ordinal(other);
                    let src = if self.plan.reads_current(e, d) {
                        self.ftov[d]
                    } else {
                        previous[d]
                    };
                    m = rescale(Message::new(m.m0 * src.m0, m.m1 * src.m1));
                }
                if m.sum() == 0.0 {
                    return Err(Error::Underflow(Degenerate::VarToFactor(EdgeId::new(fi, slot))));
                }
                incoming.push(m);
            }
            let out = naive_factor_message(&self.tables[fi], &incoming, edge.slot as usize, &mut NoCount);
            if out.sum() == 0.0 {
                return Err(Error::Underflow(Degenerate::FactorToVar(edge)));
            }
            let out = rescale(out);
            self.ftov[e] = out;
            self.log.push((e, out));
        }
        Ok(())
    }

    pub fn marginals(&self) -> Result<Vec<Marginal>> {
        let g = self.graph;
        (0..g.num_variables())
            .map(|v| {
                let mut m = Message::UNIFORM;
                for &e in g.adjacent(VariableId(v as u32)) {
                    let x = self.ftov[g.edge_ordinal(e)];
                    m = rescale(Message::new(m.m0 * x.m0, m.m1 * x.m1));
                }
                let z = m.sum();
                if z.is_nan() || z <= 0.0 {
                    return Err(Error::Underflow(Degenerate::Marginal(VariableId(v as u32))));
                }
                Ok(Marginal {
                    p0: m.m0 / z,
                    p1: m.m1 / z,
                })
            })
            .collect()
    }
}

struct NoCount;

impl Tally for NoCount {
    fn mul(&mut self, _: u64) {}
}

/// Runs the sequential reference with the engine's stopping rule.
pub fn sequential_reference(
    graph: &FactorGraph,
    poset: &UpdatePoset,
    options: &EngineOptions,
) -> Result<InferenceResult> {
    options.validate()?;
    let start = Instant::now();
    let mut r = SequentialReference::new(graph, poset)?;
    let mut prev = r.marginals()?;
    let mut deltas = Vec::new();
    let mut converged = false;
    for _ in 0..options.max_iterations {
        r.step()?;
        let next = r.marginals()?;
        let delta = prev
            .iter()
            .zip(&next)
            .map(|(a, b)| (a.p1 - b.p1).abs())
            .fold(0.0, f64::max);
        deltas.push(delta);
        prev = next;
        if delta < options.tolerance {
            converged = true;
            break;
        }
        if options.time_limit.is_some_and(|t| start.elapsed() >= t) {
            break;
        }
    }
    let iterations = deltas.len();
    Ok(InferenceResult {
        marginals: prev,
        converged,
        iterations,
        last_delta: deltas.last().copied().unwrap_or(0.0),
        deltas,
        message_updates: (graph.num_edges() * iterations) as u64,
        elapsed: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::kernels::MulCounter;
    use crate::schedule::{builtin_poset, compile, Strategy};
    use approx::assert_relative_eq;

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

    #[test]
    fn and_table_rows() {
        let v = VariableId;
        let t = materialize_table(&Factor::and(v(0), vec![v(1)], 0.9, 0.0)).unwrap();
        // bits: x1 << 1 | x0
        assert_eq!(t.value(0b11), 0.9);
        assert_relative_eq!(t.value(0b10), 0.1);
        assert_eq!(t.value(0b01), 0.0);
        assert_eq!(t.value(0b00), 1.0);
        let prior = materialize_table(&Factor::prior(v(0), 0.3)).unwrap();
        assert_eq!(prior.values, vec![0.7, 0.3]);
    }

    #[test]
    fn or_table_is_deterministic_or() {
        let v = VariableId;
        let t = materialize_table(&Factor::or(v(0), vec![v(1), v(2)], 1.0, 0.0)).unwrap();
        for bits in 0..8usize {
            let head = bits & 1;
            let or = usize::from(bits >> 1 != 0);
            assert_eq!(t.value(bits), if head == or { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn arity_guard() {
        let body: Vec<VariableId> = (1..=MAX_TABLE_ARITY as u32).map(VariableId).collect();
        let f = Factor::and(VariableId(0), body, 0.5, 0.1);
        assert!(matches!(materialize_table(&f), Err(Error::SizeGuard { .. })));
    }

    #[test]
    fn naive_messages() {
        let v = VariableId;
        let t = materialize_table(&Factor::and(v(0), vec![v(1), v(2)], 0.999, 0.0)).unwrap();
        let half = Message::new(0.5, 0.5);
        let m = naive_factor_message(&t, &[half, half], 0, &mut NoCount);
        assert_relative_eq!(m.m0, 0.75025, epsilon = 1e-15);
        assert_relative_eq!(m.m1, 0.24975, epsilon = 1e-15);
        let ones = DenseFactorTable {
            arity: 2,
            values: vec![1.0; 4],
        };
        let m = naive_factor_message(&ones, &[Message::new(0.2, 0.3)], 1, &mut NoCount);
        assert_eq!(m.m0, m.m1);
        let prior = materialize_table(&Factor::prior(v(0), 0.3)).unwrap();
        assert_eq!(
            naive_factor_message(&prior, &[], 0, &mut NoCount),
            Message::new(0.7, 0.3)
        );
    }

    #[test]
    fn naive_cost_is_exponential() {
        let body: Vec<VariableId> = (1..=16).map(VariableId).collect();
        let t = materialize_table(&Factor::or(VariableId(0), body, 0.9, 0.1)).unwrap();
        let mut c = MulCounter::default();
        naive_factor_message(&t, &[Message::new(0.4, 0.6); 16], 0, &mut c);
        assert!(c.0 > 1 << 16);
    }

    #[test]
    fn enumeration() {
        let g = three_var();
        let m = exact_marginals(&g).unwrap();
        assert_relative_eq!(m[2].p1, 0.997002999, epsilon = 1e-12);
        let one = FactorGraph::new(1, vec![Factor::prior(VariableId(0), 0.7)]).unwrap();
        let m = exact_marginals(&one).unwrap();
        assert_relative_eq!(m[0].p0, 0.3, epsilon = 1e-15);
        let clamped = g.clamp_evidence(VariableId(0), false).unwrap();
        assert_eq!(exact_marginals(&clamped).unwrap()[2].p1, 0.0);
        let bad = clamped.clamp_evidence(VariableId(0), true).unwrap();
        assert!(matches!(
            exact_marginals(&bad),
            Err(Error::Underflow(Degenerate::Joint))
        ));
    }

    #[test]
    fn walkthrough_batches_and_reads() {
        let g = three_var();
        let order = vec![
            EdgeId::new(0, 0),
            EdgeId::new(1, 0),
            EdgeId::new(2, 1),
            EdgeId::new(2, 2),
            EdgeId::new(2, 0),
        ];
        let poset = builtin_poset(&g, &Strategy::SeqFix(Some(order))).unwrap();
        let plan = ReferencePlan::new(&g, &poset).unwrap();
        let o = |f, s| g.edge_ordinal(EdgeId::new(f, s));
        assert_eq!(plan.num_batches(), 2);
        // a3→v1 reads a2→v2 from this iteration
        assert!(plan.reads_current(o(2, 1), o(1, 0)));
        let mut r = SequentialReference::new(&g, &poset).unwrap();
        r.step().unwrap();
        // one iteration already yields the exact head marginal: the tree is
        // solved by this order
        assert_relative_eq!(r.marginals().unwrap()[2].p1, 0.997002999, epsilon = 1e-12);
        let logged: Vec<usize> = r.last_iteration_log().iter().map(|p| p.0).collect();
        assert_eq!(logged, vec![o(0, 0), o(1, 0), o(2, 1), o(2, 2), o(2, 0)]);
    }

    #[test]
    fn parall_reference_is_flooding() {
        let g = three_var();
        let poset = builtin_poset(&g, &Strategy::Parall).unwrap();
        let mut r = SequentialReference::new(&g, &poset).unwrap();
        r.step().unwrap();
        // after one flooding round a3→v3 still sees uniform body messages
        let m = r.message(g.edge_ordinal(EdgeId::new(2, 0)));
        assert_relative_eq!(m.m1 / m.sum(), 0.999 * 0.25, epsilon = 1e-12);
        let res = sequential_reference(&g, &poset, &EngineOptions::default()).unwrap();
        assert!(res.converged);
        assert_relative_eq!(res.marginals[2].p1, 0.997002999, epsilon = 1e-12);
        let (_, s) = compile(&g, &Strategy::Parall).unwrap();
        assert_eq!(s.num_batches(), plan_batches(&g, &poset));
    }

    fn plan_batches(g: &FactorGraph, p: &UpdatePoset) -> usize {
        ReferencePlan::new(g, p).unwrap().num_batches()
    }
}
