//! Batched sum-product message passing.
//!
//! An iteration walks the schedule batch by batch. Batch `i` first refreshes
//! the variable-to-factor messages in `t_i` from the factor-to-variable state
//! at the start of the batch, then recomputes the factor-to-variable messages
//! in `s_i` in four passes (AND body, AND head, OR body, OR head). Reads and
//! writes never touch the same buffer within a pass, and every slot is
//! computed independently, so results do not depend on the worker count.

pub mod kernels;

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::{Degenerate, Error, Result};
use crate::graph::{EdgeId, FactorGraph, FactorKind, VariableId};
use crate::schedule::{compile, Schedule, Strategy};
use crate::storage::{Message, MessageStore};
use kernels::{and_head, and_nonhead, or_head, or_nonhead, product_excluding, Scaled, Untallied};

const MIN_CHUNK: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct EngineOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub normalize_messages: bool,
    pub time_limit: Option<Duration>,
    /// Worker threads; 0 uses the global pool.
    pub workers: usize,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            max_iterations: 1000,
            tolerance: 1e-9,
            normalize_messages: true,
            time_limit: None,
            workers: 0,
        }
    }
}

impl EngineOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidOptions("max_iterations must be at least 1".into()));
        }
        if self.tolerance.is_nan() || self.tolerance < 0.0 {
            return Err(Error::InvalidOptions(format!(
                "tolerance must be nonnegative, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

/// `(P(X = 0), P(X = 1))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Marginal {
    pub p0: f64,
    pub p1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceResult {
    pub marginals: Vec<Marginal>,
    pub converged: bool,
    pub iterations: usize,
    pub last_delta: f64,
    /// Max marginal change after each iteration.
    pub deltas: Vec<f64>,
    /// Message updates performed, both directions.
    pub message_updates: u64,
    pub elapsed: Duration,
}

impl InferenceResult {
    pub fn p_true(&self, v: VariableId) -> f64 {
        self.marginals[v.index()].p1
    }
}

/// Factor-to-variable batch routed by factor kind and target slot.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SubBatches {
    pub and_nonhead: Vec<EdgeId>,
    pub and_head: Vec<EdgeId>,
    pub or_nonhead: Vec<EdgeId>,
    pub or_head: Vec<EdgeId>,
}

impl SubBatches {
    pub fn len(&self) -> usize {
        self.and_nonhead.len() + self.and_head.len() + self.or_nonhead.len() + self.or_head.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn split_ftov_batch(graph: &FactorGraph, batch: &[EdgeId]) -> SubBatches {
    let mut out = SubBatches::default();
    for &e in batch {
        let bucket = match (graph.factor(e.factor as usize).kind, e.is_head()) {
            (FactorKind::And, false) => &mut out.and_nonhead,
            (FactorKind::And, true) => &mut out.and_head,
            (FactorKind::Or, false) => &mut out.or_nonhead,
            (FactorKind::Or, true) => &mut out.or_head,
        };
        bucket.push(e);
    }
    out
}

#[inline]
/// `Err(true)` on overflow, `Err(false)` on zero mass.
fn finish(s: Scaled, normalize: bool) -> std::result::Result<Message, bool> {
    if normalize {
        return s.normalized().ok_or(false);
    }
    let v = s.value();
    let sum = v.sum();
    if !sum.is_finite() {
        Err(true)
    } else if sum < 1e-300 {
        Err(false)
    } else {
        Ok(v)
    }
}

fn vtof_pass(store: &mut MessageStore, graph: &FactorGraph, idx: &[u32], normalize: bool) -> Result<()> {
    let fresh: std::result::Result<Vec<Message>, (u32, bool)> = {
        let (ftov, aux) = (&store.ftov, &store.aux_vtof);
        idx.par_iter()
            .with_min_len(MIN_CHUNK)
            .map(|&vi| {
                let a = aux[vi as usize];
                let row = &ftov[a.start as usize..a.end as usize];
                let s = product_excluding(row, (a.excluded - a.start) as usize, &mut Untallied);
                finish(s, normalize).map_err(|over| (vi, over))
            })
            .collect()
    };
    let fresh = fresh.map_err(|(vi, over)| {
        let e = graph.edge_at(vi as usize);
        if over {
            Error::Overflow(e)
        } else {
            Error::Underflow(Degenerate::VarToFactor(e))
        }
    })?;
    for (&vi, m) in idx.iter().zip(fresh) {
        store.vtof[vi as usize] = m;
    }
    Ok(())
}

type Kernel = fn(&[Message], usize, f64, f64) -> Scaled;

fn k_and_nonhead(row: &[Message], t: usize, p1: f64, p2: f64) -> Scaled {
    and_nonhead(row, t, p1, p2, &mut Untallied)
}
fn k_and_head(row: &[Message], _: usize, p1: f64, p2: f64) -> Scaled {
    and_head(row, p1, p2, &mut Untallied)
}
fn k_or_nonhead(row: &[Message], t: usize, p1: f64, p2: f64) -> Scaled {
    or_nonhead(row, t, p1, p2, &mut Untallied)
}
fn k_or_head(row: &[Message], _: usize, p1: f64, p2: f64) -> Scaled {
    or_head(row, p1, p2, &mut Untallied)
}

fn ftov_pass(store: &mut MessageStore, idx: &[u32], kernel: Kernel, normalize: bool) -> Result<()> {
    let fresh: std::result::Result<Vec<Message>, (u32, bool)> = {
        let (vtof, aux) = (&store.vtof, &store.aux_ftov);
        idx.par_iter()
            .with_min_len(MIN_CHUNK)
            .map(|&fi| {
                let a = aux[fi as usize];
                let row = &vtof[a.start as usize..a.end as usize];
                let s = kernel(row, (a.excluded - a.start) as usize, a.p1, a.p2);
                finish(s, normalize).map_err(|over| (fi, over))
            })
            .collect()
    };
    let fresh = fresh.map_err(|(fi, over)| {
        let e = store.ftov_edge(fi as usize);
        if over {
            Error::Overflow(e)
        } else {
            Error::Underflow(Degenerate::FactorToVar(e))
        }
    })?;
    for (&fi, m) in idx.iter().zip(fresh) {
        store.ftov[fi as usize] = m;
    }
    Ok(())
}

fn ftov_indices(store: &MessageStore, graph: &FactorGraph, edges: &[EdgeId]) -> Vec<u32> {
    edges.iter().map(|&e| store.edge_indices(graph, e).1 as u32).collect()
}

fn vtof_indices(graph: &FactorGraph, edges: &[EdgeId]) -> Vec<u32> {
    edges.iter().map(|&e| graph.edge_ordinal(e) as u32).collect()
}

/// Refreshes the variable-to-factor messages of `t`, named by their edges.
pub fn update_batch_vtof(store: &mut MessageStore, graph: &FactorGraph, t: &[EdgeId], normalize: bool) -> Result<()> {
    vtof_pass(store, graph, &vtof_indices(graph, t), normalize)
}

/// Recomputes AND body-targeted messages.
pub fn update_and_nonhead(store: &mut MessageStore, graph: &FactorGraph, s: &[EdgeId], normalize: bool) -> Result<()> {
    let idx = ftov_indices(store, graph, s);
    ftov_pass(store, &idx, k_and_nonhead, normalize)
}

pub fn update_and_head(store: &mut MessageStore, graph: &FactorGraph, s: &[EdgeId], normalize: bool) -> Result<()> {
    let idx = ftov_indices(store, graph, s);
    ftov_pass(store, &idx, k_and_head, normalize)
}

pub fn update_or_nonhead(store: &mut MessageStore, graph: &FactorGraph, s: &[EdgeId], normalize: bool) -> Result<()> {
    let idx = ftov_indices(store, graph, s);
    ftov_pass(store, &idx, k_or_nonhead, normalize)
}

pub fn update_or_head(store: &mut MessageStore, graph: &FactorGraph, s: &[EdgeId], normalize: bool) -> Result<()> {
    let idx = ftov_indices(store, graph, s);
    ftov_pass(store, &idx, k_or_head, normalize)
}

/// Per-variable normalized product of incoming factor-to-variable messages.
pub fn compute_marginals(store: &MessageStore) -> Result<Vec<Marginal>> {
    let rowptr = store.rowptr_ftov();
    let out: std::result::Result<Vec<Marginal>, usize> = (0..store.num_variables())
        .into_par_iter()
        .with_min_len(MIN_CHUNK)
        .map(|v| {
            let row = &store.ftov[rowptr[v] as usize..rowptr[v + 1] as usize];
            let mut p = product_excluding(row, usize::MAX, &mut Untallied).message;
            if !p.sum().is_finite() {
                // unnormalized inputs; rescaling each factor leaves the ratio intact
                let unit: Vec<Message> = row.iter().filter_map(|m| m.normalized()).collect();
                p = product_excluding(&unit, usize::MAX, &mut Untallied).message;
            }
            let m = p.normalized().ok_or(v)?;
            Ok(Marginal { p0: m.m0, p1: m.m1 })
        })
        .collect();
    out.map_err(|v| Error::Underflow(Degenerate::Marginal(VariableId(v as u32))))
}

#[derive(Debug, Clone)]
struct BatchPlan {
    vtof: Vec<u32>,
    and_nonhead: Vec<u32>,
    and_head: Vec<u32>,
    or_nonhead: Vec<u32>,
    or_head: Vec<u32>,
}

/// Message store plus the compiled batch plan for one graph.
pub struct Engine<'g> {
    graph: &'g FactorGraph,
    store: MessageStore,
    plan: Vec<BatchPlan>,
    options: EngineOptions,
    pool: Option<rayon::ThreadPool>,
    updates_per_iteration: u64,
    iterations: usize,
}

impl<'g> Engine<'g> {
    pub fn new(graph: &'g FactorGraph, schedule: &Schedule, options: EngineOptions) -> Result<Self> {
        options.validate()?;
        let store = MessageStore::initialize(graph)?;
        let total: usize = schedule.factor_to_var.iter().map(Vec::len).sum();
        if total != graph.num_edges() || schedule.var_to_factor.len() != schedule.factor_to_var.len() {
            return Err(Error::InvalidStrategy(format!(
                "schedule covers {total} of {} edges with {} t-batches for {} s-batches",
                graph.num_edges(),
                schedule.var_to_factor.len(),
                schedule.factor_to_var.len()
            )));
        }
        for e in schedule.factor_to_var.iter().chain(&schedule.var_to_factor).flatten() {
            graph.check_edge(*e)?;
        }
        let plan = schedule
            .factor_to_var
            .iter()
            .zip(&schedule.var_to_factor)
            .map(|(s, t)| {
                let sub = split_ftov_batch(graph, s);
                BatchPlan {
                    vtof: vtof_indices(graph, t),
                    and_nonhead: ftov_indices(&store, graph, &sub.and_nonhead),
                    and_head: ftov_indices(&store, graph, &sub.and_head),
                    or_nonhead: ftov_indices(&store, graph, &sub.or_nonhead),
                    or_head: ftov_indices(&store, graph, &sub.or_head),
                }
            })
            .collect();
        let pool = match options.workers {
            0 => None,
            n => Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::InvalidOptions(format!("cannot start {n} workers: {e}")))?,
            ),
        };
        Ok(Engine {
            graph,
            store,
            plan,
            options,
            pool,
            updates_per_iteration: schedule.updates_per_iteration() as u64,
            iterations: 0,
        })
    }

    pub fn graph(&self) -> &FactorGraph {
        self.graph
    }

    pub fn store(&self) -> &MessageStore {
        &self.store
    }

    pub fn options(&self) -> &EngineOptions {
        &self.options
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Back to uniform messages.
    pub fn reset(&mut self) {
        self.store.reset();
        self.iterations = 0;
    }

    fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> T {
        match &self.pool {
            Some(pool) => pool.install(f),
            None => f(),
        }
    }

    /// One full iteration over every batch.
    pub fn step(&mut self) -> Result<()> {
        let normalize = self.options.normalize_messages;
        let Engine {
            graph,
            store,
            plan,
            pool,
            ..
        } = self;
        let graph: &FactorGraph = graph;
        let mut body = || -> Result<()> {
            for b in plan.iter() {
                vtof_pass(store, graph, &b.vtof, normalize)?;
                ftov_pass(store, &b.and_nonhead, k_and_nonhead, normalize)?;
                ftov_pass(store, &b.and_head, k_and_head, normalize)?;
                ftov_pass(store, &b.or_nonhead, k_or_nonhead, normalize)?;
                ftov_pass(store, &b.or_head, k_or_head, normalize)?;
            }
            Ok(())
        };
        match pool {
            Some(pool) => pool.install(body)?,
            None => body()?,
        }
        self.iterations += 1;
        Ok(())
    }

    pub fn marginals(&self) -> Result<Vec<Marginal>> {
        self.install(|| compute_marginals(&self.store))
    }

    /// Iterates until the max change of `P(X = 1)` drops below tolerance,
    /// the iteration budget runs out, or the time limit passes.
    pub fn run(&mut self) -> Result<InferenceResult> {
        let start = Instant::now();
        let first = self.iterations;
        let mut prev = self.marginals()?;
        let mut deltas = Vec::new();
        let mut converged = false;
        for _ in 0..self.options.max_iterations {
            self.step()?;
            let next = self.marginals()?;
            let delta = prev
                .iter()
                .zip(&next)
                .map(|(a, b)| (a.p1 - b.p1).abs())
                .fold(0.0, f64::max);
            deltas.push(delta);
            prev = next;
            if delta < self.options.tolerance {
                converged = true;
                break;
            }
            if self.options.time_limit.is_some_and(|limit| start.elapsed() >= limit) {
                break;
            }
        }
        let iterations = self.iterations - first;
        Ok(InferenceResult {
            marginals: prev,
            converged,
            iterations,
            last_delta: deltas.last().copied().unwrap_or(0.0),
            deltas,
            message_updates: self.updates_per_iteration * iterations as u64,
            elapsed: start.elapsed(),
        })
    }
}

/// Runs a compiled schedule from uniform messages.
pub fn run(graph: &FactorGraph, schedule: &Schedule, options: &EngineOptions) -> Result<InferenceResult> {
    Engine::new(graph, schedule, options.clone())?.run()
}

/// Compiles `strategy` and runs it.
pub fn infer(graph: &FactorGraph, strategy: &Strategy, options: &EngineOptions) -> Result<InferenceResult> {
    options.validate()?;
    let (_, schedule) = compile(graph, strategy)?;
    run(graph, &schedule, options)
}
