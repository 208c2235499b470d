//! Loopy belief propagation over binary AND/OR factor graphs derived from
//! Horn-clause derivations, with update strategies given as strict partial
//! orders over edges and compiled into race-free parallel batches.

pub mod engine;
pub mod error;
pub mod graph;
pub mod oracle;
pub mod ranking;
pub mod schedule;
pub mod storage;
pub mod synth;

pub use engine::{infer, run, Engine, EngineOptions, InferenceResult, Marginal};
pub use error::{Degenerate, Error, Result};
pub use graph::{EdgeId, Factor, FactorGraph, FactorKind, VariableId};
pub use schedule::{compile, Schedule, Strategy, UpdatePoset};
pub use storage::{Message, MessageStore};
