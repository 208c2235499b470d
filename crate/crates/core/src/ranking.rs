//! Alarm ranking with simulated user feedback, and ranking-quality metrics.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::time::Instant;

use crate::engine::{infer, EngineOptions, Marginal};
use crate::error::{Error, Result};
use crate::graph::fastfg::significant_lines;
use crate::graph::{EdgeId, FactorGraph, VariableId};
use crate::schedule::Strategy;

/// Alarm variables with their ground-truth labels.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AlarmSet {
    alarms: Vec<VariableId>,
    labels: Vec<bool>,
}

impl AlarmSet {
    pub fn new(alarms: Vec<VariableId>, labels: Vec<bool>) -> Result<Self> {
        if alarms.len() != labels.len() {
            return Err(Error::InvalidGraph(format!(
                "{} alarms but {} labels",
                alarms.len(),
                labels.len()
            )));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = alarms.iter().find(|a| !seen.insert(**a)) {
            return Err(Error::InvalidGraph(format!("alarm {dup} listed twice")));
        }
        Ok(AlarmSet { alarms, labels })
    }

    /// Lines `alarm <var> <0|1>`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut alarms = Vec::new();
        let mut labels = Vec::new();
        let mut seen = HashSet::new();
        for (ln, line) in significant_lines(text) {
            let (v, l) = match line.split_whitespace().collect::<Vec<_>>()[..] {
                ["alarm", v, l] => (v, l),
                _ => {
                    return Err(Error::parse(
                        ln,
                        format!("expected `alarm <var> <0|1>`, found {line:?}"),
                    ))
                }
            };
            let v: u32 = v
                .parse()
                .map_err(|_| Error::parse(ln, format!("bad variable index {v:?}")))?;
            let label = match l {
                "0" => false,
                "1" => true,
                _ => return Err(Error::parse(ln, format!("label must be 0 or 1, found {l:?}"))),
            };
            if !seen.insert(v) {
                return Err(Error::parse(ln, format!("alarm {v} listed twice")));
            }
            alarms.push(VariableId(v));
            labels.push(label);
        }
        Ok(AlarmSet { alarms, labels })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (a, l) in self.alarms.iter().zip(&self.labels) {
            writeln!(out, "alarm {} {}", a.0, u8::from(*l)).unwrap();
        }
        out
    }

    pub fn check(&self, graph: &FactorGraph) -> Result<()> {
        match self.alarms.iter().find(|a| a.index() >= graph.num_variables()) {
            Some(a) => Err(Error::InvalidGraph(format!(
                "alarm {a} out of range for {} variables",
                graph.num_variables()
            ))),
            None => Ok(()),
        }
    }

    pub fn alarms(&self) -> &[VariableId] {
        &self.alarms
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.alarms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alarms.is_empty()
    }

    pub fn num_true(&self) -> usize {
        self.labels.iter().filter(|l| **l).count()
    }
}

/// Unlabeled alarms by descending `P(X = 1)`, ties by ascending id.
/// `labeled[i]` refers to `alarms.alarms()[i]`.
pub fn rank_alarms(marginals: &[Marginal], alarms: &AlarmSet, labeled: &[bool]) -> Vec<VariableId> {
    let mut out: Vec<VariableId> = alarms
        .alarms
        .iter()
        .zip(labeled)
        .filter(|(_, l)| !**l)
        .map(|(a, _)| *a)
        .collect();
    out.sort_by(|a, b| {
        marginals[b.index()]
            .p1
            .total_cmp(&marginals[a.index()].p1)
            .then(a.cmp(b))
    });
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Round {
    pub alarm: VariableId,
    pub label: bool,
    /// Probability the alarm was ranked with.
    pub p_true: f64,
    pub seconds: f64,
    /// Whether that round's inference converged.
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct InteractionTrace {
    pub rounds: Vec<Round>,
}

impl InteractionTrace {
    pub fn label_sequence(&self) -> Vec<bool> {
        self.rounds.iter().map(|r| r.label).collect()
    }

    /// CSV `round,alarm,label,p_true,seconds`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("round,alarm,label,p_true,seconds\n");
        for (i, r) in self.rounds.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{}",
                i + 1,
                r.alarm.0,
                u8::from(r.label),
                r.p_true,
                r.seconds
            )
            .unwrap();
        }
        out
    }

    pub fn total_seconds(&self) -> f64 {
        self.rounds.iter().map(|r| r.seconds).sum()
    }
}

/// Ranks, reveals the top alarm's label, clamps it as evidence, and
/// repeats until every true alarm is found. Inference restarts from uniform
/// messages on the grown graph each round.
pub fn interaction_loop(
    graph: &FactorGraph,
    alarms: &AlarmSet,
    strategy: &Strategy,
    options: &EngineOptions,
) -> Result<InteractionTrace> {
    alarms.check(graph)?;
    if alarms.num_true() == 0 {
        return Err(Error::InvalidOptions("alarm set has no true alarm".into()));
    }
    let mut graph = graph.clone();
    let mut strategy = strategy.clone();
    let mut labeled = vec![false; alarms.len()];
    let mut found = 0;
    let mut trace = InteractionTrace::default();
    while found < alarms.num_true() {
        let start = Instant::now();
        let result = infer(&graph, &strategy, options)?;
        let top = rank_alarms(&result.marginals, alarms, &labeled)[0];
        let i = alarms.alarms.iter().position(|a| *a == top).unwrap();
        let label = alarms.labels[i];
        labeled[i] = true;
        found += usize::from(label);
        graph = graph.clamp_evidence(top, label)?;
        if let Strategy::SeqFix(Some(order)) = &mut strategy {
            order.push(EdgeId::new(graph.num_factors() - 1, 0));
        }
        trace.rounds.push(Round {
            alarm: top,
            label,
            p_true: result.marginals[top.index()].p1,
            seconds: start.elapsed().as_secs_f64(),
            converged: result.converged,
        });
    }
    Ok(trace)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub rank100t: usize,
    pub rank90t: usize,
    pub inversions: u64,
    pub auc: f64,
    pub num_true: u64,
    pub num_false: u64,
}

/// Metrics over an inspection sequence. With no true labels both ranks
/// are 0.
pub fn compute_metrics(labels: &[bool]) -> Metrics {
    let num_true = labels.iter().filter(|l| **l).count() as u64;
    let num_false = labels.len() as u64 - num_true;
    let mut rank100t = 0;
    let mut rank90t = 0;
    let mut seen = 0u64;
    // concordant: (true, false) pairs with the true one first
    let mut concordant = 0u64;
    for (i, &l) in labels.iter().enumerate() {
        if l {
            seen += 1;
        } else {
            concordant += seen;
        }
        if rank90t == 0 && num_true > 0 && 10 * seen >= 9 * num_true {
            rank90t = i + 1;
        }
        if rank100t == 0 && num_true > 0 && seen == num_true {
            rank100t = i + 1;
        }
    }
    let pairs = num_true * num_false;
    let inversions = pairs - concordant;
    let auc = if pairs == 0 {
        1.0
    } else {
        concordant as f64 / pairs as f64
    };
    Metrics {
        rank100t,
        rank90t,
        inversions,
        auc,
        num_true,
        num_false,
    }
}

/// `Σ_i (1 − l_i) · Σ_{j>i} l_j`.
pub fn inversion_formula(labels: &[bool]) -> u64 {
    let mut trues_after = 0u64;
    let mut total = 0u64;
    for &l in labels.iter().rev() {
        if l {
            trues_after += 1;
        } else {
            total += trues_after;
        }
    }
    total
}

/// One `(cumulative false, cumulative true)` point per inspected alarm.
pub fn roc_points(labels: &[bool]) -> Vec<(u64, u64)> {
    let (mut f, mut t) = (0, 0);
    labels
        .iter()
        .map(|&l| {
            if l {
                t += 1;
            } else {
                f += 1;
            }
            (f, t)
        })
        .collect()
}

/// Area under the ROC step curve in units of `N_F · N_T` cells.
pub fn roc_area(points: &[(u64, u64)]) -> u64 {
    let mut prev = (0, 0);
    let mut area = 0;
    for &p in points {
        if p.0 > prev.0 {
            area += (p.0 - prev.0) * prev.1;
        }
        prev = p;
    }
    area
}

/// CSV `round,false_positives,true_positives`, starting from the origin.
pub fn roc_csv(labels: &[bool]) -> String {
    let mut out = String::from("round,false_positives,true_positives\n0,0,0\n");
    for (i, (f, t)) in roc_points(labels).into_iter().enumerate() {
        writeln!(out, "{},{f},{t}", i + 1).unwrap();
    }
    out
}
