use thiserror::Error;

use crate::lattice::RegimeKind;

#[derive(Debug, Error)]
pub enum Error {
    #[error("step set needs at least two odd steps, got {0}")]
    EmptySet(usize),
    #[error("step {0} is the zero vector")]
    ZeroVector(usize),
    #[error("step {0} has a non-finite coordinate")]
    NonFinite(usize),
    #[error("steps {0} and {1} coincide")]
    DuplicateVector(usize, usize),
    #[error("step {0} is the negation of step {1}; odd and even step sets must be disjoint")]
    OverlapViolation(usize, usize),
    #[error("step {index} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("unknown lattice name {0:?}")]
    UnknownName(String),
    #[error("{name} = {value} is out of range ({expected})")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
    #[error("spectral basis check failed: residual {0:e}")]
    DiagonalizationCheckFailed(f64),
    #[error("walk length {0} is too short (need at least 2 steps)")]
    TooShort(u64),
    #[error("degenerate parameters (gamma = {gamma}, delta = {delta}): the walk is deterministic after the first step")]
    DegenerateParams { gamma: f64, delta: f64 },
    #[error("operation requires the {expected} regime, parameters are {actual}")]
    WrongRegime {
        expected: RegimeKind,
        actual: RegimeKind,
    },
    #[error("invalid tolerance {0}")]
    InvalidTolerance(f64),
    #[error("series did not reach tolerance {tolerance:e} within {terms} terms (error estimate {estimate:e})")]
    NotConverged {
        tolerance: f64,
        terms: u64,
        estimate: f64,
    },
    #[error("state space too large: {states} states exceeds the limit {limit}")]
    TooLarge { states: u64, limit: u64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
