use thiserror::Error;

use crate::controller::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("sequence rejected with {} violation(s)", .0.len())]
    InvalidSequence(Vec<Violation>),

    #[error("capacity exceeded: {requested} qubits requested, {capacity} cells available")]
    Capacity { requested: usize, capacity: usize },

    #[error("no herald after {0} trials")]
    HeraldTimeout(u64),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
