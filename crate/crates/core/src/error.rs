use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
///
/// The variants are grouped so that callers (the CLI in particular) can map
/// them onto usage, data, and resource failures without string matching.
#[derive(Debug, Error)]
pub enum Error {
    #[error("vertex {vertex} out of range for graph with {n} vertices")]
    Index { vertex: usize, n: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("graph has {n} vertices, brute force is limited to {max_n}")]
    SizeGuard { n: usize, max_n: usize },

    #[error("search budget of {budget} nodes exhausted (best known upper bound {upper_bound})")]
    Budget { budget: u64, upper_bound: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("integrity check failed: {0}")]
    Integrity(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch} (lr {lr})")]
    Diverged { epoch: usize, batch: usize, lr: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn shape(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        Error::Shape {
            op,
            left: left.to_vec(),
            right: right.to_vec(),
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
