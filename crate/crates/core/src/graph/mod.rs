//! Binary factor graphs built from AND/OR factors.
//!
//! Every factor has a head variable `x0` and an ordered body `x1..xn`. The
//! factor function depends only on the head bit and on the conjunction (AND)
//! or disjunction (OR) of the body bits:
//!
//! ```text
//! body condition  head   value
//!      1           1      p1
//!      1           0      1 - p1
//!      0           1      p2
//!      0           0      1 - p2
//! ```
//!
//! A body-empty AND factor with `p1 = p2 = p` is a prior `P(x0 = 1) = p`;
//! evidence is the same construction with `p ∈ {0, 1}`.
//!
//! Edges are identified by `(factor, slot)` where slot 0 is the head and
//! slot `k >= 1` is the k-th body variable. Edges are numbered densely in
//! factor-major order; that ordinal doubles as the position of the
//! variable-to-factor message in the CSR store.

mod dag;
pub(crate) mod fastfg;

use std::fmt;

pub use dag::{from_bayesian_dag, BayesianDag, DagNode, NodeRole};
pub use fastfg::parse_factor_graph;

use crate::error::{Error, Result};

/// Default clause/input probability when none is given.
pub const DEFAULT_PROBABILITY: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VariableId(pub u32);

impl VariableId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for VariableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

impl From<usize> for VariableId {
    fn from(i: usize) -> Self {
        VariableId(i as u32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FactorKind {
    And,
    Or,
}

impl FactorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FactorKind::And => "AND",
            FactorKind::Or => "OR",
        }
    }
}

impl fmt::Display for FactorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One undirected factor-variable edge; carries one message each way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeId {
    pub factor: u32,
    pub slot: u32,
}

impl EdgeId {
    pub fn new(factor: usize, slot: usize) -> Self {
        EdgeId {
            factor: factor as u32,
            slot: slot as u32,
        }
    }

    #[inline]
    pub fn is_head(self) -> bool {
        self.slot == 0
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.factor, self.slot)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub kind: FactorKind,
    pub head: VariableId,
    pub body: Vec<VariableId>,
    pub p1: f64,
    pub p2: f64,
}

impl Factor {
    pub fn and(head: VariableId, body: Vec<VariableId>, p1: f64, p2: f64) -> Self {
        Factor {
            kind: FactorKind::And,
            head,
            body,
            p1,
            p2,
        }
    }

    pub fn or(head: VariableId, body: Vec<VariableId>, p1: f64, p2: f64) -> Self {
        Factor {
            kind: FactorKind::Or,
            head,
            body,
            p1,
            p2,
        }
    }

    /// Body-empty AND factor fixing `P(head = 1) = p`.
    pub fn prior(head: VariableId, p: f64) -> Self {
        Factor::and(head, Vec::new(), p, p)
    }

    /// Number of neighbouring variables, `1 + n`.
    #[inline]
    pub fn arity(&self) -> usize {
        1 + self.body.len()
    }

    /// Variable at `slot` (0 = head).
    #[inline]
    pub fn variable(&self, slot: usize) -> VariableId {
        if slot == 0 {
            self.head
        } else {
            self.body[slot - 1]
        }
    }

    /// Head first, then body in order.
    pub fn variables(&self) -> impl Iterator<Item = VariableId> + '_ {
        std::iter::once(self.head).chain(self.body.iter().copied())
    }

    /// Checks the per-factor invariants against a variable count.
    pub fn validate(&self, num_variables: usize) -> std::result::Result<(), String> {
        for (name, p) in [("p1", self.p1), ("p2", self.p2)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} = {p} is outside [0, 1]"));
            }
        }
        for v in self.variables() {
            if v.index() >= num_variables {
                return Err(format!(
                    "variable index {} out of range (graph has {num_variables} variables)",
                    v.0
                ));
            }
        }
        if self.body.contains(&self.head) {
            return Err(format!("head {} also appears in the body", self.head.0));
        }
        let mut seen = self.body.clone();
        seen.sort_unstable();
        if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
            return Err(format!("duplicate body member {}", w[0].0));
        }
        if self.body.is_empty() {
            match self.kind {
                FactorKind::Or => return Err("OR factor with an empty body".to_string()),
                FactorKind::And if self.p1 != self.p2 => {
                    return Err(format!(
                        "body-empty AND factor needs p1 = p2 (got {} and {})",
                        self.p1, self.p2
                    ))
                }
                FactorKind::And => {}
            }
        }
        Ok(())
    }
}

/// Validated bipartite graph of binary variables and AND/OR factors.
/// Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorGraph {
    num_variables: usize,
    factors: Vec<Factor>,
    // Per variable: (factor, slot) in ascending factor order.
    adjacency: Vec<Vec<EdgeId>>,
    // Prefix sums of factor arities; len = factors + 1.
    edge_offsets: Vec<usize>,
    names: Option<Vec<String>>,
}

impl FactorGraph {
    pub fn new(num_variables: usize, factors: Vec<Factor>) -> Result<Self> {
        for (i, f) in factors.iter().enumerate() {
            f.validate(num_variables)
                .map_err(|m| Error::InvalidGraph(format!("factor {i}: {m}")))?;
        }
        let graph = Self::assemble(num_variables, factors);
        graph.check_coverage()?;
        Ok(graph)
    }

    // Builds indexes without validation.
    fn assemble(num_variables: usize, factors: Vec<Factor>) -> Self {
        let mut adjacency = vec![Vec::new(); num_variables];
        let mut edge_offsets = Vec::with_capacity(factors.len() + 1);
        edge_offsets.push(0);
        for (fi, f) in factors.iter().enumerate() {
            for (slot, v) in f.variables().enumerate() {
                adjacency[v.index()].push(EdgeId::new(fi, slot));
            }
            edge_offsets.push(edge_offsets[fi] + f.arity());
        }
        FactorGraph {
            num_variables,
            factors,
            adjacency,
            edge_offsets,
            names: None,
        }
    }

    fn check_coverage(&self) -> Result<()> {
        if let Some(v) = self.adjacency.iter().position(Vec::is_empty) {
            return Err(Error::InvalidGraph(format!(
                "variable {v} is not connected to any factor"
            )));
        }
        Ok(())
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.num_variables {
            return Err(Error::InvalidGraph(format!(
                "{} names for {} variables",
                names.len(),
                self.num_variables
            )));
        }
        self.names = Some(names);
        Ok(self)
    }

    pub fn name(&self, v: VariableId) -> Option<&str> {
        self.names.as_ref().map(|n| n[v.index()].as_str())
    }

    pub fn num_variables(&self) -> usize {
        self.num_variables
    }

    pub fn num_factors(&self) -> usize {
        self.factors.len()
    }

    /// |E| = Σ (1 + |body|).
    pub fn num_edges(&self) -> usize {
        *self.edge_offsets.last().unwrap_or(&0)
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn factor(&self, index: usize) -> &Factor {
        &self.factors[index]
    }

    /// Factors adjacent to `v`, as the edges joining them.
    pub fn adjacent(&self, v: VariableId) -> &[EdgeId] {
        &self.adjacency[v.index()]
    }

    pub fn degree(&self, v: VariableId) -> usize {
        self.adjacency[v.index()].len()
    }

    pub fn contains_edge(&self, e: EdgeId) -> bool {
        (e.factor as usize) < self.factors.len() && (e.slot as usize) < self.factors[e.factor as usize].arity()
    }

    /// Variable at the far end of the edge.
    #[inline]
    pub fn edge_variable(&self, e: EdgeId) -> VariableId {
        self.factors[e.factor as usize].variable(e.slot as usize)
    }

    /// Dense ordinal of an edge in factor-major order.
    #[inline]
    pub fn edge_ordinal(&self, e: EdgeId) -> usize {
        self.edge_offsets[e.factor as usize] + e.slot as usize
    }

    pub fn edge_at(&self, ordinal: usize) -> EdgeId {
        assert!(ordinal < self.num_edges(), "edge ordinal out of range");
        let f = self.edge_offsets.partition_point(|&off| off <= ordinal) - 1;
        EdgeId::new(f, ordinal - self.edge_offsets[f])
    }

    /// First edge ordinal of each factor, plus a trailing |E|.
    pub fn edge_offsets(&self) -> &[usize] {
        &self.edge_offsets
    }

    /// All edges in ordinal order.
    pub fn edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.factors
            .iter()
            .enumerate()
            .flat_map(|(fi, f)| (0..f.arity()).map(move |s| EdgeId::new(fi, s)))
    }

    pub fn check_edge(&self, e: EdgeId) -> Result<()> {
        if self.contains_edge(e) {
            Ok(())
        } else {
            Err(Error::UnknownEdge(e))
        }
    }

    /// Returns a copy with a body-empty AND factor pinning `variable` to the
    /// observed value. Existing edges keep their ids.
    pub fn clamp_evidence(&self, variable: VariableId, observed: bool) -> Result<Self> {
        if variable.index() >= self.num_variables {
            return Err(Error::InvalidGraph(format!(
                "cannot clamp variable {} in a graph of {} variables",
                variable.0, self.num_variables
            )));
        }
        let p = if observed { 1.0 } else { 0.0 };
        let mut factors = self.factors.clone();
        factors.push(Factor::prior(variable, p));
        let mut graph = Self::assemble(self.num_variables, factors);
        graph.names = self.names.clone();
        Ok(graph)
    }

    /// Serializes to the FASTFG text format.
    pub fn to_fastfg(&self) -> String {
        fastfg::write(self)
    }
}
