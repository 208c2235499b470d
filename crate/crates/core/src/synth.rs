//! Synthetic derivation graphs shaped like static-analysis output: input
//! tuples, AND clauses over earlier tuples, derived tuples ORing their
//! clauses, and alarms drawn from the sink tuples.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{from_bayesian_dag, BayesianDag, FactorGraph, NodeRole, VariableId, DEFAULT_PROBABILITY};
use crate::ranking::AlarmSet;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    /// Tuples, inputs included.
    pub num_tuples: usize,
    pub num_clauses: usize,
    pub max_premises: usize,
    /// Chance of each premise beyond the first.
    pub premise_decay: f64,
    /// Lower bound on the share of tuples that are inputs.
    pub input_fraction: f64,
    pub num_alarms: usize,
    pub true_rate: f64,
    pub probability: f64,
    /// Every tuple feeds at most one clause, so the factor graph is a forest.
    pub tree_only: bool,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(num_tuples: usize, num_clauses: usize) -> Self {
        SynthSpec {
            num_tuples,
            num_clauses,
            max_premises: 8,
            premise_decay: 0.25,
            input_fraction: 0.2,
            num_alarms: (num_tuples / 20).max(1),
            true_rate: 0.3,
            probability: DEFAULT_PROBABILITY,
            tree_only: false,
            seed: 0,
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn tree(mut self) -> Self {
        self.tree_only = true;
        self
    }

    pub fn alarms(mut self, n: usize) -> Self {
        self.num_alarms = n;
        self
    }

    fn num_inputs(&self) -> usize {
        let frac = (self.input_fraction * self.num_tuples as f64).ceil() as usize;
        frac.max(1)
            .max(self.num_tuples.saturating_sub(self.num_clauses))
            .min(self.num_tuples)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InfeasibleSpec(m));
        if self.num_tuples == 0 {
            return bad("at least one tuple is required".into());
        }
        if self.max_premises == 0 {
            return bad("max_premises must be at least 1".into());
        }
        for (name, p) in [
            ("premise_decay", self.premise_decay),
            ("input_fraction", self.input_fraction),
            ("true_rate", self.true_rate),
            ("probability", self.probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        if self.premise_decay >= 1.0 && self.max_premises == usize::MAX {
            return bad("unbounded premise count".into());
        }
        Ok(())
    }
}

enum Event {
    Clause { conclusion: Option<usize> },
    Produce(usize),
}

/// Builds the graph and alarm set. Variables are the tuples and clauses;
/// FactorGraph variable names are `t<i>` and `c<j>`.
pub fn generate(spec: &SynthSpec) -> Result<(FactorGraph, AlarmSet)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let t = spec.num_tuples;
    let c = spec.num_clauses;
    let inputs = spec.num_inputs();
    let derived = t - inputs;

    let mut per_tuple = vec![1usize; derived];
    if derived > 0 {
        for _ in derived..c {
            per_tuple[rng.random_range(0..derived)] += 1;
        }
    }
    if spec.tree_only {
        per_tuple.sort_unstable();
    }
    let mut events = Vec::with_capacity(t + c);
    for (d, &k) in per_tuple.iter().enumerate() {
        let tuple = inputs + d;
        events.extend((0..k).map(|_| Event::Clause {
            conclusion: Some(tuple),
        }));
        events.push(Event::Produce(tuple));
    }
    if derived == 0 {
        events.extend((0..c).map(|_| Event::Clause { conclusion: None }));
    }

    // Minimal free-tuple pool each tree-mode event still needs.
    let mut need_after = vec![0usize; events.len()];
    if spec.tree_only {
        let mut need = 0usize;
        for (i, e) in events.iter().enumerate().rev() {
            need_after[i] = need;
            need = match e {
                Event::Clause { .. } => need + 1,
                Event::Produce(_) => need.saturating_sub(1),
            };
        }
        if need > inputs {
            return Err(Error::InfeasibleSpec(format!(
                "a forest with {t} tuples cannot host {c} clauses"
            )));
        }
    }

    let mut dag = BayesianDag::default();
    let mut tuple_node = vec![usize::MAX; t];
    for (i, node) in tuple_node.iter_mut().enumerate().take(inputs) {
        *node = dag.add_node(format!("t{i}"), NodeRole::Input, Some(spec.probability));
    }
    let mut used = vec![false; t];
    let mut free: Vec<usize> = (0..inputs).collect();
    let mut clause_count = 0;
    let mut pending: Vec<usize> = Vec::new();

    for (i, event) in events.iter().enumerate() {
        match *event {
            Event::Clause { conclusion } => {
                let mut k = 1;
                while k < spec.max_premises && rng.random_bool(spec.premise_decay) {
                    k += 1;
                }
                let premises: Vec<usize> = if spec.tree_only {
                    let k = k.min(free.len() - need_after[i]);
                    (0..k)
                        .map(|_| free.swap_remove(rng.random_range(0..free.len())))
                        .collect()
                } else {
                    let avail = conclusion.unwrap_or(t);
                    sample(&mut rng, avail, k.min(avail)).into_vec()
                };
                let node = dag.add_node(format!("c{clause_count}"), NodeRole::Clause, Some(spec.probability));
                clause_count += 1;
                for p in premises {
                    used[p] = true;
                    dag.add_edge(tuple_node[p], node);
                }
                if conclusion.is_some() {
                    pending.push(node);
                }
            }
            Event::Produce(tuple) => {
                let node = dag.add_node(format!("t{tuple}"), NodeRole::Tuple, None);
                tuple_node[tuple] = node;
                for clause in pending.drain(..) {
                    dag.add_edge(clause, node);
                }
                free.push(tuple);
            }
        }
    }

    let graph = from_bayesian_dag(&dag)?;

    let sinks: Vec<usize> = (0..t).filter(|&i| !used[i]).collect();
    let derived_sinks: Vec<usize> = sinks.iter().copied().filter(|&i| i >= inputs).collect();
    let pool = if derived_sinks.is_empty() { sinks } else { derived_sinks };
    let n = spec.num_alarms.min(pool.len());
    let mut chosen: Vec<usize> = sample(&mut rng, pool.len(), n).into_iter().map(|i| pool[i]).collect();
    chosen.sort_unstable();
    let alarms: Vec<VariableId> = chosen.iter().map(|&i| VariableId(tuple_node[i] as u32)).collect();
    let mut labels: Vec<bool> = (0..n).map(|_| rng.random_bool(spec.true_rate)).collect();
    if n > 0 && !labels.contains(&true) {
        labels[rng.random_range(0..n)] = true;
    }
    Ok((graph, AlarmSet::new(alarms, labels)?))
}
