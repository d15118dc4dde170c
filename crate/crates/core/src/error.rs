//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NqsError {
    #[error("{quantity} exceeds the size cap: {got} > {cap}")]
    SizeCap {
        quantity: &'static str,
        cap: usize,
        got: usize,
    },
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid driver spec: {0}")]
    InvalidSpec(String),
    #[error("empty sample batch")]
    EmptyBatch,
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("training diverged at iteration {iteration}: energy estimate is not finite")]
    Diverged { iteration: usize },
    #[error("state vector is not normalized (|1 - norm^2| = {defect:e})")]
    NotNormalized { defect: f64 },
    #[error("covariance {0} outside [-1, 1]")]
    EtaOutOfRange(f64),
    #[error("coupling W[{k}][{m}] is zero; the pair has no oscillation frequency")]
    ZeroWeight { k: usize, m: usize },
    #[error("grid too short: need at least {need} points, got {got}")]
    DegenerateGrid { need: usize, got: usize },
    #[error("training history carries no parameter snapshots")]
    MissingSnapshots,
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NqsError>;
