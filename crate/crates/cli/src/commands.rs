use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{Context, Result};
use hornlbp::engine::kernels::{normalized_factor_message, MulCounter};
use hornlbp::oracle::{
    exact_marginals, materialize_table, naive_factor_message, SequentialReference, MAX_ENUMERATION_VARIABLES,
};
use hornlbp::ranking::{compute_metrics, interaction_loop, roc_csv};
use hornlbp::schedule::{compile, verify_schedule, Strategy};
use hornlbp::synth::{generate, SynthSpec};
use hornlbp::{EdgeId, Engine, EngineOptions, Factor, FactorGraph, FactorKind, Message, VariableId};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::input::{load_alarms, load_graph, load_strategy, output, write_file, EXIT_CHECK, EXIT_NOT_CONVERGED};
use crate::Shared;

fn options(s: &Shared) -> EngineOptions {
    EngineOptions {
        max_iterations: s.max_iters,
        tolerance: s.tol,
        workers: s.workers,
        ..EngineOptions::default()
    }
}

pub fn infer(
    s: &Shared,
    graph: &Path,
    strategy: &str,
    no_normalize: bool,
    time_limit: Option<f64>,
    out: Option<&Path>,
) -> Result<ExitCode> {
    let g = load_graph(graph)?;
    let strategy = load_strategy(strategy)?;
    let mut opts = options(s);
    opts.normalize_messages = !no_normalize;
    if let Some(t) = time_limit {
        opts.time_limit = Some(Duration::try_from_secs_f64(t).context("--time-limit")?);
    }
    let r = hornlbp::infer(&g, &strategy, &opts)?;
    let mut w = output(out)?;
    writeln!(w, "var,p0,p1,converged_flag")?;
    let flag = u8::from(r.converged);
    for (v, m) in r.marginals.iter().enumerate() {
        writeln!(w, "{v},{},{},{flag}", m.p0, m.p1)?;
    }
    w.flush()?;
    eprintln!(
        "{} after {} iterations (last delta {:e}, {:.3?})",
        if r.converged { "converged" } else { "stopped" },
        r.iterations,
        r.last_delta,
        r.elapsed
    );
    Ok(if r.converged {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_NOT_CONVERGED)
    })
}

pub fn rank(
    s: &Shared,
    graph: &Path,
    alarms: &Path,
    strategy: &str,
    out_trace: Option<&Path>,
    out_roc: Option<&Path>,
) -> Result<ExitCode> {
    let g = load_graph(graph)?;
    let alarms = load_alarms(alarms)?;
    let strategy = load_strategy(strategy)?;
    let trace = interaction_loop(&g, &alarms, &strategy, &options(s))?;
    let labels = trace.label_sequence();
    if let Some(p) = out_trace {
        write_file(p, &trace.to_csv())?;
    }
    if let Some(p) = out_roc {
        write_file(p, &roc_csv(&labels))?;
    }
    let m = compute_metrics(&labels);
    println!(
        "rounds={} rank100t={} rank90t={} inversions={} auc={:.6}",
        labels.len(),
        m.rank100t,
        m.rank90t,
        m.inversions,
        m.auc
    );
    let all_converged = trace.rounds.iter().all(|r| r.converged);
    Ok(if all_converged {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_NOT_CONVERGED)
    })
}

fn join<T: ToString>(items: &[T], sep: &str) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(sep)
}

pub fn schedule(graph: &Path, strategy: &str, verify: bool, members: bool) -> Result<ExitCode> {
    let g = load_graph(graph)?;
    let strategy = load_strategy(strategy)?;
    let (poset, sched) = compile(&g, &strategy)?;
    println!("k={}, sizes=[{}]", sched.num_batches(), join(&sched.batch_sizes(), ","));
    if members {
        for (i, (s, t)) in sched.factor_to_var.iter().zip(&sched.var_to_factor).enumerate() {
            println!("s{}: {}", i + 1, join(s, " "));
            println!("t{}: {}", i + 1, join(t, " "));
        }
    }
    if verify {
        let violations = verify_schedule(&g, &poset, &sched);
        if !violations.is_empty() {
            for v in &violations {
                println!("violation: {v:?}");
            }
            return Ok(ExitCode::from(EXIT_CHECK));
        }
        println!("verified");
    }
    Ok(ExitCode::SUCCESS)
}

fn random_strategy(rng: &mut impl Rng, g: &FactorGraph) -> Strategy {
    let mut order: Vec<EdgeId> = g.edges().collect();
    order.shuffle(rng);
    match rng.random_range(0..3) {
        0 => Strategy::Parall,
        1 => Strategy::SeqFix(Some(order)),
        _ => {
            let density = [0.02, 0.1, 0.3][rng.random_range(0..3)];
            let mut pairs = Vec::new();
            for i in 0..order.len() {
                for j in i + 1..order.len() {
                    if rng.random_bool(density) {
                        pairs.push((order[i], order[j]));
                    }
                }
            }
            Strategy::Custom(pairs)
        }
    }
}

pub fn oracle_check(
    s: &Shared,
    graph: &Path,
    strategy: Option<&str>,
    trials: usize,
    steps: usize,
    threshold: f64,
) -> Result<ExitCode> {
    let g = load_graph(graph)?;
    let fixed = strategy.map(load_strategy).transpose()?;
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let opts = options(s);
    // a fixed strategy is deterministic, so one trial covers it
    let trials = if fixed.is_some() { trials.min(1) } else { trials };
    let mut worst = 0.0f64;
    for trial in 0..trials {
        let strategy = fixed.clone().unwrap_or_else(|| random_strategy(&mut rng, &g));
        let (poset, sched) = compile(&g, &strategy)?;
        let mut engine = Engine::new(&g, &sched, opts.clone())?;
        let mut reference = SequentialReference::new(&g, &poset)?;
        let mut dev = 0.0f64;
        for _ in 0..steps {
            engine.step()?;
            reference.step()?;
            let a = engine.marginals()?;
            let b = reference.marginals()?;
            dev = a.iter().zip(&b).map(|(x, y)| (x.p1 - y.p1).abs()).fold(dev, f64::max);
        }
        println!("trial {trial} {}: max deviation {dev:e}", strategy.name());
        worst = worst.max(dev);
    }
    let mut failed = worst > threshold;
    println!("reference: max deviation {worst:e} over {trials} trials (threshold {threshold:e})");

    let is_tree = compile(&g, &Strategy::Topo).is_ok();
    if is_tree && g.num_variables() <= MAX_ENUMERATION_VARIABLES {
        let exact = exact_marginals(&g)?;
        let r = hornlbp::infer(&g, &Strategy::Topo, &opts)?;
        let dev = r
            .marginals
            .iter()
            .zip(&exact)
            .map(|(x, y)| (x.p1 - y.p1).abs())
            .fold(0.0, f64::max);
        println!("exact: max deviation {dev:e}");
        failed |= dev > threshold || !r.converged;
    }
    Ok(if failed {
        ExitCode::from(EXIT_CHECK)
    } else {
        ExitCode::SUCCESS
    })
}

pub fn synth(spec: &SynthSpec, out: &Path, alarms_out: Option<&Path>) -> Result<ExitCode> {
    let (g, alarms) = generate(spec)?;
    write_file(out, &g.to_fastfg())?;
    if let Some(p) = alarms_out {
        write_file(p, &alarms.to_text())?;
    }
    println!(
        "{} variables, {} factors, {} edges, {} alarms ({} true)",
        g.num_variables(),
        g.num_factors(),
        g.num_edges(),
        alarms.len(),
        alarms.num_true()
    );
    Ok(ExitCode::SUCCESS)
}

pub enum BenchSource {
    File(PathBuf),
    Synth(usize, usize),
}

pub fn bench(
    s: &Shared,
    source: &BenchSource,
    strategies: &str,
    repeats: usize,
    iters: usize,
    out: Option<&Path>,
) -> Result<ExitCode> {
    let (name, g) = match source {
        BenchSource::File(p) => (p.display().to_string(), load_graph(p)?),
        BenchSource::Synth(t, c) => {
            let (g, _) = generate(&SynthSpec::new(*t, *c).seed(s.seed))?;
            (format!("synth-{t}-{c}"), g)
        }
    };
    // fixed budget: never stop early
    let opts = EngineOptions {
        max_iterations: iters,
        tolerance: 0.0,
        workers: s.workers,
        ..EngineOptions::default()
    };
    let mut w = output(out)?;
    writeln!(
        w,
        "graph,strategy,repeat,iterations,wall_seconds,messages_per_second,converged"
    )?;
    for arg in strategies.split(',').map(str::trim).filter(|a| !a.is_empty()) {
        let strategy = load_strategy(arg)?;
        let (_, sched) = compile(&g, &strategy)?;
        let mut engine = Engine::new(&g, &sched, opts.clone())?;
        for rep in 0..repeats {
            engine.reset();
            let r = engine.run()?;
            let secs = r.elapsed.as_secs_f64();
            writeln!(
                w,
                "{name},{},{rep},{},{secs:.6},{:.1},{}",
                strategy.name(),
                r.iterations,
                r.message_updates as f64 / secs.max(1e-12),
                u8::from(r.last_delta < s.tol)
            )?;
        }
    }
    w.flush()?;
    Ok(ExitCode::SUCCESS)
}

pub fn bench_naive(n: usize, out: Option<&Path>) -> Result<ExitCode> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let row: Vec<Message> = (0..=n)
        .map(|_| Message::new(rng.random_range(0.01..1.0), rng.random_range(0.01..1.0)))
        .collect();
    let body: Vec<VariableId> = (1..=n as u32).map(VariableId).collect();
    let mut w = output(out)?;
    writeln!(w, "kind,n,target,closed_form_multiplies,naive_multiplies")?;
    for kind in [FactorKind::And, FactorKind::Or] {
        let factor = match kind {
            FactorKind::And => Factor::and(VariableId(0), body.clone(), 0.9, 0.1),
            FactorKind::Or => Factor::or(VariableId(0), body.clone(), 0.9, 0.1),
        };
        let table = materialize_table(&factor)?;
        let targets: &[usize] = if n == 0 { &[0] } else { &[0, 1] };
        for &target in targets {
            let mut closed = MulCounter::default();
            normalized_factor_message(kind, &row, target, 0.9, 0.1, &mut closed);
            let incoming: Vec<Message> = (0..=n).filter(|&k| k != target).map(|k| row[k]).collect();
            let mut naive = MulCounter::default();
            naive_factor_message(&table, &incoming, target, &mut naive);
            let which = if target == 0 { "head" } else { "body" };
            writeln!(w, "{kind},{n},{which},{},{}", closed.0, naive.0)?;
        }
    }
    w.flush()?;
    Ok(ExitCode::SUCCESS)
}

pub fn dump_store(s: &Shared, graph: &Path, strategy: &str, steps: usize, out: Option<&Path>) -> Result<ExitCode> {
    let g = load_graph(graph)?;
    let strategy = load_strategy(strategy)?;
    let (_, sched) = compile(&g, &strategy)?;
    let mut engine = Engine::new(&g, &sched, options(s))?;
    for _ in 0..steps {
        engine.step()?;
    }
    let mut w = output(out)?;
    engine.store().dump_csv(&mut w)?;
    w.flush()?;
    Ok(ExitCode::SUCCESS)
}
