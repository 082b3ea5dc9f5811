use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("entry ({row}, {col}) is not 0 or 1")]
    NonBinaryEntry { row: usize, col: usize },

    #[error("response matrix has no rows or no columns")]
    EmptyMatrix,

    #[error("row {row} has {found} entries, expected {expected}")]
    RaggedRows {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("label vector has length {found}, expected {expected}")]
    LabelLength { expected: usize, found: usize },

    #[error("partition does not fit the data: {0}")]
    PartitionShapeMismatch(String),

    #[error("log probability is not finite (s={successes}, f={failures}, a0={a0}, b0={b0})")]
    NonFiniteResult {
        successes: usize,
        failures: usize,
        a0: f64,
        b0: f64,
    },

    #[error("partition has {blocks} blocks but the prior supports at most {k_max}")]
    BlockCountExceedsSupport { blocks: usize, k_max: usize },

    #[error("invalid hyperparameter {name} = {value}")]
    InvalidHyperparameter { name: &'static str, value: f64 },

    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),

    #[error("trace contains no kept states")]
    EmptyTrace,

    #[error("no kept state has the requested column partition")]
    NoMatchingState,

    #[error("partitions cover {left} and {right} items")]
    LengthMismatch { left: usize, right: usize },

    #[error("rand index needs at least two items")]
    SingleItem,

    #[error("design violates its invariants: {0}")]
    DesignInvariantViolation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
