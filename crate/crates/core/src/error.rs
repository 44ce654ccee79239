use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A precondition of an operation was violated (non-finite input,
    /// out-of-range parameter, inconsistent arguments).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    /// The assembled global system has no unique solution, usually because
    /// the structure is insufficiently supported. `dof` is the first free
    /// degree of freedom whose pivot vanished.
    #[error("singular global system at free dof {dof}: {detail}")]
    SingularSystem { dof: usize, detail: String },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("requested {k} neighbors from a dataset of {p} points")]
    TooManyNeighbors { k: usize, p: usize },

    #[error("shape functions not covered at ({x}, {y}): {reason}")]
    Coverage { x: f64, y: f64, reason: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("nnls did not terminate after {0} outer iterations")]
    NnlsStalled(usize),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
