use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("alternative `{id}`: {reason}")]
    Domain { id: String, reason: String },

    #[error("{0}: empty input")]
    EmptyInput(&'static str),

    #[error("opportunity cost needs at least 2 alternatives, got {0}")]
    InsufficientOptions(usize),

    #[error("duplicate alternative id `{0}`")]
    DuplicateId(String),

    #[error("comparator is incomplete: {0} pair(s) cannot be compared")]
    Incomplete(usize),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch} (loss is not finite)")]
    Divergence { epoch: usize },

    #[error("objective returned a non-finite value at {point:?}")]
    NonFiniteObjective { point: Vec<f64> },

    #[error("series has {len} value(s), forecast order {order} needs at least that many")]
    InsufficientHistory { len: usize, order: usize },

    #[error("row {row}: {message}")]
    Row { row: usize, message: String },

    #[error("{0}")]
    Load(String),

    #[error("no conflict rows to control")]
    NoConflicts,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn row(row: usize, message: impl Into<String>) -> Self {
        Error::Row { row, message: message.into() }
    }

    /// Process exit code: 1 for input or configuration problems, 2 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Divergence { .. } | Error::NonFiniteObjective { .. } => 2,
            _ => 1,
        }
    }
}
