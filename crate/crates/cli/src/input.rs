use std::fs;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{Context, Result};
use hornlbp::graph::{from_bayesian_dag, parse_factor_graph, BayesianDag};
use hornlbp::ranking::AlarmSet;
use hornlbp::schedule::{parse_strategy, Strategy};
use hornlbp::{Error, FactorGraph};

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NOT_CONVERGED: u8 = 3;
pub const EXIT_CHECK: u8 = 4;

/// Numerical breakdowns are runtime failures; everything else is bad input.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::Underflow(_) | Error::Overflow(_)) => EXIT_FAILURE,
        _ => EXIT_INPUT,
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// FASTFG if the first significant line says so, otherwise the DAG format.
pub fn load_graph(path: &Path) -> Result<FactorGraph> {
    let text = read(path)?;
    let first = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .find(|l| !l.is_empty())
        .unwrap_or("");
    let graph = if first.starts_with("FASTFG") {
        parse_factor_graph(&text)
    } else {
        BayesianDag::parse(&text).and_then(|dag| from_bayesian_dag(&dag))
    };
    graph.with_context(|| format!("in {}", path.display()))
}

/// A builtin name, or a path to a strategy file.
pub fn load_strategy(arg: &str) -> Result<Strategy> {
    if let Some(s) = Strategy::from_name(arg) {
        return Ok(s);
    }
    let path = Path::new(arg);
    if !path.exists() {
        anyhow::bail!("unknown strategy {arg:?} (expected PARALL, SEQFIX, TOPO or a strategy file)");
    }
    parse_strategy(&read(path)?).with_context(|| format!("in {}", path.display()))
}

pub fn load_alarms(path: &Path) -> Result<AlarmSet> {
    AlarmSet::parse(&read(path)?).with_context(|| format!("in {}", path.display()))
}

/// A file, or stdout when no path is given.
pub fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(
            fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::BufWriter::new(io::stdout().lock())),
    })
}

pub fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
