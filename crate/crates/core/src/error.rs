use thiserror::Error;

/// Errors produced by the sensing library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} out of range for {what} of size {size}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid scene geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate direction vector (zero length) between {0}")]
    DegenerateDirection(&'static str),

    #[error("column {0} of the measurement matrix is zero (unobservable block)")]
    DegenerateColumn(usize),

    #[error("sparsity {sparsity} exceeds the number of measurements {measurements}")]
    SparsityTooLarge {
        sparsity: usize,
        measurements: usize,
    },

    #[error("infeasible configuration matrix: {0} simplex violations")]
    InfeasibleConfiguration(usize),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("non-finite loss at epoch {epoch}: learning rate likely too large")]
    DivergentTraining { epoch: usize },

    #[error("artifact I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed artifact {path} at line {line}: {reason}")]
    MalformedArtifact {
        path: String,
        line: usize,
        reason: String,
    },

    #[error("artifact hash mismatch for {what}: expected {expected}, found {found}")]
    HashMismatch {
        what: &'static str,
        expected: String,
        found: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
