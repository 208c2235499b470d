mod commands;
mod input;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Loopy belief propagation over AND/OR factor graphs.
#[derive(Parser, Debug)]
#[command(name = "hornlbp", version, about)]
struct Cli {
    #[command(flatten)]
    shared: Shared,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Shared {
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Convergence tolerance on max |ΔP(v = 1)|.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long = "max-iters", global = true, default_value_t = 1000)]
    pub max_iters: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run inference and write per-variable marginals as CSV.
    Infer {
        #[arg(long)]
        graph: PathBuf,
        /// Builtin name (PARALL, SEQFIX, TOPO) or strategy file.
        #[arg(long, default_value = "PARALL")]
        strategy: String,
        #[arg(long)]
        no_normalize: bool,
        /// Wall-clock limit in seconds.
        #[arg(long)]
        time_limit: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Interactive alarm ranking with simulated user feedback.
    Rank {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        alarms: PathBuf,
        #[arg(long, default_value = "PARALL")]
        strategy: String,
        #[arg(long)]
        out_trace: Option<PathBuf>,
        #[arg(long)]
        out_roc: Option<PathBuf>,
    },
    /// Compile a strategy and print its batches.
    Schedule {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value = "PARALL")]
        strategy: String,
        /// Check the batch dependency property.
        #[arg(long)]
        verify: bool,
        /// Print every batch's edges.
        #[arg(long)]
        members: bool,
    },
    /// Compare the engine with the sequential reference and, on small trees,
    /// with exact enumeration.
    OracleCheck {
        #[arg(long)]
        graph: PathBuf,
        /// Fixed strategy; otherwise each trial draws a random one.
        #[arg(long)]
        strategy: Option<String>,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        /// Iterations compared per trial.
        #[arg(long, default_value_t = 10)]
        steps: usize,
        #[arg(long, default_value_t = 1e-8)]
        threshold: f64,
    },
    /// Generate a synthetic derivation graph and alarm file.
    Synth {
        #[arg(long)]
        tuples: usize,
        #[arg(long)]
        clauses: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        alarms_out: Option<PathBuf>,
        #[arg(long)]
        num_alarms: Option<usize>,
        #[arg(long)]
        true_rate: Option<f64>,
        #[arg(long)]
        probability: Option<f64>,
        /// Forest-shaped output, usable with TOPO.
        #[arg(long)]
        tree: bool,
    },
    /// Time fixed iteration budgets, or count multiplies with --naive.
    Bench {
        #[arg(long, conflicts_with_all = ["tuples", "naive"])]
        graph: Option<PathBuf>,
        #[arg(long, requires = "clauses")]
        tuples: Option<usize>,
        #[arg(long)]
        clauses: Option<usize>,
        /// Comma-separated strategy names or files.
        #[arg(long, default_value = "PARALL")]
        strategies: String,
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        #[arg(long, default_value_t = 10)]
        iters: usize,
        /// Closed-form vs table message multiply counts.
        #[arg(long)]
        naive: bool,
        /// Body size for --naive.
        #[arg(long, default_value_t = 16)]
        arity: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a few iterations and dump the message store as CSV.
    DumpStore {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value = "PARALL")]
        strategy: String,
        #[arg(long, default_value_t = 1)]
        steps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn dispatch(cli: Cli) -> anyhow::Result<ExitCode> {
    let s = &cli.shared;
    match cli.command {
        Command::Infer {
            graph,
            strategy,
            no_normalize,
            time_limit,
            out,
        } => commands::infer(s, &graph, &strategy, no_normalize, time_limit, out.as_deref()),
        Command::Rank {
            graph,
            alarms,
            strategy,
            out_trace,
            out_roc,
        } => commands::rank(s, &graph, &alarms, &strategy, out_trace.as_deref(), out_roc.as_deref()),
        Command::Schedule {
            graph,
            strategy,
            verify,
            members,
        } => commands::schedule(&graph, &strategy, verify, members),
        Command::OracleCheck {
            graph,
            strategy,
            trials,
            steps,
            threshold,
        } => commands::oracle_check(s, &graph, strategy.as_deref(), trials, steps, threshold),
        Command::Synth {
            tuples,
            clauses,
            out,
            alarms_out,
            num_alarms,
            true_rate,
            probability,
            tree,
        } => {
            let mut spec = hornlbp::synth::SynthSpec::new(tuples, clauses).seed(s.seed);
            spec.tree_only = tree;
            if let Some(n) = num_alarms {
                spec.num_alarms = n;
            }
            if let Some(r) = true_rate {
                spec.true_rate = r;
            }
            if let Some(p) = probability {
                spec.probability = p;
            }
            commands::synth(&spec, &out, alarms_out.as_deref())
        }
        Command::Bench {
            graph,
            tuples,
            clauses,
            strategies,
            repeats,
            iters,
            naive,
            arity,
            out,
        } => {
            if naive {
                return commands::bench_naive(arity, out.as_deref());
            }
            let source = match (graph, tuples, clauses) {
                (Some(path), _, _) => commands::BenchSource::File(path),
                (None, Some(t), Some(c)) => commands::BenchSource::Synth(t, c),
                _ => anyhow::bail!("bench needs --graph or --tuples/--clauses"),
            };
            commands::bench(s, &source, &strategies, repeats, iters, out.as_deref())
        }
        Command::DumpStore {
            graph,
            strategy,
            steps,
            out,
        } => commands::dump_store(s, &graph, &strategy, steps, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(input::exit_code(&e))
        }
    }
}
