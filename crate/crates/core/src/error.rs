use thiserror::Error;

/// Errors produced by samplers, estimators and geometric constructions.
#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate hull: {0}")]
    DegenerateHull(String),

    #[error("degenerate simplex: {0}")]
    DegenerateSimplex(String),

    #[error("non-finite value from functional `{label}` at replication {replication} (master_seed={master_seed}, experiment={experiment})")]
    NonFiniteValue {
        label: String,
        replication: u64,
        master_seed: u64,
        experiment: u64,
    },

    #[error("kernel not admissible: {0}")]
    InadmissibleKernel(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
