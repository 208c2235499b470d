use std::fmt;

use crate::graph::{EdgeId, VariableId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid factor graph: {0}")]
    InvalidGraph(String),

    #[error("invalid Bayesian DAG: {0}")]
    InvalidDag(String),

    #[error("update order is cyclic through edge {0}")]
    CyclicOrder(EdgeId),

    #[error("edge {0} does not exist in the factor graph")]
    UnknownEdge(EdgeId),

    #[error("TOPO requires a tree-structured factor graph; edge {0} closes a cycle")]
    NotATree(EdgeId),

    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),

    #[error("numerical underflow: {0}")]
    Underflow(Degenerate),

    #[error("unnormalized message on edge {0} overflowed")]
    Overflow(EdgeId),

    #[error("{what} exceeds the enumeration limit ({size} > {limit})")]
    SizeGuard {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("invalid options: {0}")]
    InvalidOptions(String),

    #[error("infeasible synthetic spec: {0}")]
    InfeasibleSpec(String),

    #[error("graph has no edges")]
    EmptyGraph,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which quantity collapsed to zero mass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Degenerate {
    VarToFactor(EdgeId),
    FactorToVar(EdgeId),
    Marginal(VariableId),
    /// Every assignment of the joint has zero weight.
    Joint,
}

impl fmt::Display for Degenerate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Degenerate::VarToFactor(e) => write!(f, "variable-to-factor message on edge {e} has zero mass"),
            Degenerate::FactorToVar(e) => write!(f, "factor-to-variable message on edge {e} has zero mass"),
            Degenerate::Marginal(v) => write!(f, "marginal of variable {v} has zero mass (contradictory evidence?)"),
            Degenerate::Joint => write!(f, "joint distribution has zero total weight (contradictory evidence?)"),
        }
    }
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
