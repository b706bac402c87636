use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GrfError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: self-loop on node {node}")]
    SelfLoop { line: usize, node: usize },
    #[error("line {line}: duplicate edge {{{a}, {b}}}")]
    DuplicateEdge { line: usize, a: usize, b: usize },
    #[error("line {line}: edge weight must be positive, got {weight}")]
    InvalidWeight { line: usize, weight: f64 },
    #[error("node {node} out of range for graph with {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("invalid parameter `{name}`: {message}")]
    InvalidParameter { name: &'static str, message: String },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("matrix is singular")]
    Singular,
    #[error("dense computation on {n} nodes exceeds the limit of {limit}")]
    TooLargeForDense { n: usize, limit: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for GrfError {
    fn from(e: std::io::Error) -> Self {
        GrfError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, GrfError>;

pub(crate) fn invalid(name: &'static str, message: impl Into<String>) -> GrfError {
    GrfError::InvalidParameter { name, message: message.into() }
}
