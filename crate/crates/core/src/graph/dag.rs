//! Conversion from a derivation DAG (tuples, grounded clauses, inputs) to an
//! AND/OR factor graph.
//!
//! Node roles and the factor each produces:
//!
//! * `input` — prior `P(X = 1) = p`: body-empty AND, `p1 = p2 = p`.
//! * `clause` — `X_g = 1` with probability `p` when every premise holds,
//!   never otherwise: AND over the premises, `p1 = p`, `p2 = 0`.
//! * `tuple` — holds iff some parent clause fires: OR over the parents,
//!   `p1 = 1`, `p2 = 0`.
//!
//! Edges run premise → clause and clause/input → derived tuple.

use std::collections::HashMap;

use super::fastfg::{parse_probability, significant_lines};
use super::{Factor, FactorGraph, VariableId, DEFAULT_PROBABILITY};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeRole {
    Clause,
    Tuple,
    Input,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DagNode {
    pub name: String,
    pub role: NodeRole,
    /// Clause/input probability; `None` falls back to 0.999.
    pub probability: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BayesianDag {
    pub nodes: Vec<DagNode>,
    /// `(from, to)` node indices.
    pub edges: Vec<(usize, usize)>,
}

impl BayesianDag {
    pub fn add_node(&mut self, name: impl Into<String>, role: NodeRole, probability: Option<f64>) -> usize {
        self.nodes.push(DagNode {
            name: name.into(),
            role,
            probability,
        });
        self.nodes.len() - 1
    }

    pub fn add_edge(&mut self, from: usize, to: usize) {
        self.edges.push((from, to));
    }

    /// Parses `node <id> <clause|tuple|input> [p=<prob>]` and
    /// `edge <from> <to>` lines.
    pub fn parse(text: &str) -> Result<Self> {
        let mut dag = BayesianDag::default();
        let mut ids: HashMap<String, usize> = HashMap::new();
        for (ln, line) in significant_lines(text) {
            let tok: Vec<&str> = line.split_whitespace().collect();
            match tok[..] {
                ["node", id, role, ref rest @ ..] => {
                    let role = match role {
                        "clause" => NodeRole::Clause,
                        "tuple" => NodeRole::Tuple,
                        "input" => NodeRole::Input,
                        other => return Err(Error::parse(ln, format!("unknown node role {other:?}"))),
                    };
                    let probability = match rest {
                        [] => None,
                        [p] => {
                            let value = p
                                .strip_prefix("p=")
                                .ok_or_else(|| Error::parse(ln, format!("expected p=<prob>, found {p:?}")))?;
                            Some(parse_probability(ln, "p", Some(value))?)
                        }
                        _ => return Err(Error::parse(ln, "too many tokens on node line")),
                    };
                    if ids.contains_key(id) {
                        return Err(Error::parse(ln, format!("duplicate node id {id:?}")));
                    }
                    let index = dag.add_node(id, role, probability);
                    ids.insert(id.to_string(), index);
                }
                ["edge", from, to] => {
                    let lookup = |id: &str| {
                        ids.get(id)
                            .copied()
                            .ok_or_else(|| Error::parse(ln, format!("edge references unknown node {id:?}")))
                    };
                    let edge = (lookup(from)?, lookup(to)?);
                    dag.edges.push(edge);
                }
                _ => return Err(Error::parse(ln, format!("expected node or edge line, found {line:?}"))),
            }
        }
        Ok(dag)
    }
}

/// One factor per DAG node, in node order; variable `i` is node `i`.
pub fn from_bayesian_dag(dag: &BayesianDag) -> Result<FactorGraph> {
    let n = dag.nodes.len();
    let mut parents: Vec<Vec<VariableId>> = vec![Vec::new(); n];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut conclusions = vec![0usize; n];

    for &(from, to) in &dag.edges {
        if from >= n || to >= n {
            return Err(Error::InvalidDag(format!(
                "edge {from} -> {to} references a missing node"
            )));
        }
        let (src, dst) = (&dag.nodes[from], &dag.nodes[to]);
        let legal = matches!(
            (src.role, dst.role),
            (NodeRole::Tuple | NodeRole::Input, NodeRole::Clause)
                | (NodeRole::Clause | NodeRole::Input, NodeRole::Tuple)
        );
        if !legal {
            return Err(Error::InvalidDag(format!(
                "edge {} -> {} joins a {:?} to a {:?}",
                src.name, dst.name, src.role, dst.role
            )));
        }
        if src.role == NodeRole::Clause {
            conclusions[from] += 1;
            if conclusions[from] > 1 {
                return Err(Error::InvalidDag(format!(
                    "clause {} has more than one conclusion",
                    src.name
                )));
            }
        }
        parents[to].push(VariableId(from as u32));
        children[from].push(to);
    }

    // Kahn's algorithm for acyclicity.
    let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut ready: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut visited = 0;
    while let Some(u) = ready.pop() {
        visited += 1;
        for &c in &children[u] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.push(c);
            }
        }
    }
    if visited < n {
        let on_cycle = (0..n).find(|&i| indegree[i] > 0).unwrap();
        return Err(Error::InvalidDag(format!(
            "derivation graph is cyclic (node {} is on or behind a cycle)",
            dag.nodes[on_cycle].name
        )));
    }

    let mut factors = Vec::with_capacity(n);
    for (i, node) in dag.nodes.iter().enumerate() {
        let head = VariableId(i as u32);
        let p = node.probability.unwrap_or(DEFAULT_PROBABILITY);
        let body = std::mem::take(&mut parents[i]);
        let factor = match node.role {
            NodeRole::Input => {
                if !body.is_empty() {
                    return Err(Error::InvalidDag(format!("input {} has incoming edges", node.name)));
                }
                Factor::prior(head, p)
            }
            NodeRole::Clause => {
                if body.is_empty() {
                    return Err(Error::InvalidDag(format!("clause {} has no premises", node.name)));
                }
                Factor::and(head, body, p, 0.0)
            }
            NodeRole::Tuple => {
                if body.is_empty() {
                    return Err(Error::InvalidDag(format!("tuple {} has no parent clause", node.name)));
                }
                Factor::or(head, body, 1.0, 0.0)
            }
        };
        factors.push(factor);
    }

    let names = dag.nodes.iter().map(|n| n.name.clone()).collect();
    FactorGraph::new(n, factors)?.with_names(names)
}
