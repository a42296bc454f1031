use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error in {path}: line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("zero total mass")]
    ZeroMass,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("cost {0} has no metric ball conversion; use a full scan")]
    UnsupportedCost(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("functional estimate degenerate (|J| = {0:e})")]
    DegenerateFunctional(f64),

    #[error("target starved: index {index}, received mass {mass:e}")]
    TargetStarved { index: usize, mass: f64 },

    #[error("invalid parameter {name}: {msg}")]
    InvalidParameter { name: String, msg: String },

    #[error("iteration cap {0} exceeded")]
    IterationCap(usize),

    #[error("antipodal degeneracy in sphere log map (distance {0})")]
    Antipodal(f64),

    #[error("weight update produced a zero weight at index {0}")]
    ZeroWeight(usize),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(name: &str, msg: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
