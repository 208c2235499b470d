//! Flat CSR message buffers.
//!
//! `vtof` holds variable-to-factor messages with one row per factor, so its
//! index is exactly the edge ordinal. `ftov` holds factor-to-variable
//! messages with one row per variable, the transpose sparsity. Each slot has
//! an aux record pointing at the *other* buffer's row it reads from, with
//! `excluded` marking the dual slot of the same edge.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::graph::{EdgeId, FactorGraph};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Message {
    pub m0: f64,
    pub m1: f64,
}

impl Message {
    pub const UNIFORM: Message = Message { m0: 1.0, m1: 1.0 };

    #[inline]
    pub const fn new(m0: f64, m1: f64) -> Self {
        Message { m0, m1 }
    }

    #[inline]
    pub fn sum(self) -> f64 {
        self.m0 + self.m1
    }

    /// Scales to unit mass; `None` when the mass is below 1e-300.
    #[inline]
    pub fn normalized(self) -> Option<Message> {
        let s = self.sum();
        (s >= 1e-300).then(|| Message::new(self.m0 / s, self.m1 / s))
    }
}

/// Reads `ftov[start..end]` except `excluded`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AuxVtoF {
    pub start: u32,
    pub end: u32,
    pub excluded: u32,
}

/// Reads `vtof[start..end]` except `excluded`. `v0` is the head slot of
/// the factor's row; it equals `excluded` when the target is the head.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxFtoV {
    pub start: u32,
    pub end: u32,
    pub excluded: u32,
    pub v0: u32,
    pub p1: f64,
    pub p2: f64,
}

#[derive(Debug, Clone)]
pub struct MessageStore {
    pub(crate) vtof: Vec<Message>,
    pub(crate) ftov: Vec<Message>,
    pub(crate) aux_vtof: Vec<AuxVtoF>,
    pub(crate) aux_ftov: Vec<AuxFtoV>,
    rowptr_vtof: Vec<u32>,
    rowptr_ftov: Vec<u32>,
    // ftov slot → edge, for reporting.
    ftov_edge: Vec<EdgeId>,
}

impl MessageStore {
    pub fn initialize(graph: &FactorGraph) -> Result<Self> {
        let ne = graph.num_edges();
        if ne == 0 {
            return Err(Error::EmptyGraph);
        }
        if ne > u32::MAX as usize {
            return Err(Error::InvalidGraph(format!("{ne} edges exceed the 32-bit index space")));
        }
        let rowptr_vtof: Vec<u32> = graph.edge_offsets().iter().map(|&o| o as u32).collect();
        let mut rowptr_ftov = Vec::with_capacity(graph.num_variables() + 1);
        rowptr_ftov.push(0u32);
        for v in 0..graph.num_variables() {
            let deg = graph.degree(v.into()) as u32;
            rowptr_ftov.push(rowptr_ftov[v] + deg);
        }

        // vtof ordinal → ftov slot ("dual" position)
        let mut dual_of_vtof = vec![0u32; ne];
        let mut ftov_edge = Vec::with_capacity(ne);
        for (v, &row) in rowptr_ftov.iter().take(graph.num_variables()).enumerate() {
            for (k, &e) in graph.adjacent(v.into()).iter().enumerate() {
                dual_of_vtof[graph.edge_ordinal(e)] = row + k as u32;
                ftov_edge.push(e);
            }
        }

        let aux_vtof: Vec<AuxVtoF> = graph
            .edges()
            .map(|e| {
                let v = graph.edge_variable(e).index();
                AuxVtoF {
                    start: rowptr_ftov[v],
                    end: rowptr_ftov[v + 1],
                    excluded: dual_of_vtof[graph.edge_ordinal(e)],
                }
            })
            .collect();

        let aux_ftov: Vec<AuxFtoV> = ftov_edge
            .iter()
            .map(|&e| {
                let f = graph.factor(e.factor as usize);
                let start = rowptr_vtof[e.factor as usize];
                let excluded = start + e.slot;
                AuxFtoV {
                    start,
                    end: rowptr_vtof[e.factor as usize + 1],
                    excluded,
                    v0: if e.is_head() { excluded } else { start },
                    p1: f.p1,
                    p2: f.p2,
                }
            })
            .collect();

        Ok(MessageStore {
            vtof: vec![Message::UNIFORM; ne],
            ftov: vec![Message::UNIFORM; ne],
            aux_vtof,
            aux_ftov,
            rowptr_vtof,
            rowptr_ftov,
            ftov_edge,
        })
    }

    pub fn num_edges(&self) -> usize {
        self.vtof.len()
    }

    pub fn num_variables(&self) -> usize {
        self.rowptr_ftov.len() - 1
    }

    /// Resets every message to (1, 1).
    pub fn reset(&mut self) {
        self.vtof.fill(Message::UNIFORM);
        self.ftov.fill(Message::UNIFORM);
    }

    pub fn rowptr_vtof(&self) -> &[u32] {
        &self.rowptr_vtof
    }

    pub fn rowptr_ftov(&self) -> &[u32] {
        &self.rowptr_ftov
    }

    pub fn vtof(&self) -> &[Message] {
        &self.vtof
    }

    pub fn ftov(&self) -> &[Message] {
        &self.ftov
    }

    pub fn aux_vtof(&self) -> &[AuxVtoF] {
        &self.aux_vtof
    }

    pub fn aux_ftov(&self) -> &[AuxFtoV] {
        &self.aux_ftov
    }

    /// Positions of the edge's two directed messages: `(vtof, ftov)`.
    pub fn edge_indices(&self, graph: &FactorGraph, edge: EdgeId) -> (usize, usize) {
        let vtof = graph.edge_ordinal(edge);
        (vtof, self.aux_vtof[vtof].excluded as usize)
    }

    /// Edge owning an ftov slot.
    pub fn ftov_edge(&self, ftov_index: usize) -> EdgeId {
        self.ftov_edge[ftov_index]
    }

    /// Factor-to-variable message on an edge.
    pub fn factor_to_var(&self, graph: &FactorGraph, edge: EdgeId) -> Message {
        self.ftov[self.edge_indices(graph, edge).1]
    }

    /// Variable-to-factor message on an edge.
    pub fn var_to_factor(&self, graph: &FactorGraph, edge: EdgeId) -> Message {
        self.vtof[graph.edge_ordinal(edge)]
    }

    /// CSV `direction,row,slot,m0,m1`; rows are factors for `vtof` and
    /// variables for `ftov`.
    pub fn dump_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "direction,row,slot,m0,m1")?;
        for (dir, rowptr, buf) in [
            ("vtof", &self.rowptr_vtof, &self.vtof),
            ("ftov", &self.rowptr_ftov, &self.ftov),
        ] {
            for row in 0..rowptr.len() - 1 {
                let (lo, hi) = (rowptr[row] as usize, rowptr[row + 1] as usize);
                for (slot, m) in buf[lo..hi].iter().enumerate() {
                    writeln!(out, "{dir},{row},{slot},{},{}", m.m0, m.m1)?;
                }
            }
        }
        Ok(())
    }
}
