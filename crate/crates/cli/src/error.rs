use std::path::PathBuf;

use grf_core::GrfError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Grf(#[from] GrfError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// Stable identifier for the `error` field of the JSON report.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Grf(e) => match e {
                GrfError::Parse { .. } => "parse",
                GrfError::SelfLoop { .. } => "self_loop",
                GrfError::DuplicateEdge { .. } => "duplicate_edge",
                GrfError::InvalidWeight { .. } => "invalid_weight",
                GrfError::NodeOutOfRange { .. } => "node_out_of_range",
                GrfError::InvalidParameter { .. } => "invalid_parameter",
                GrfError::DimensionMismatch { .. } => "dimension_mismatch",
                GrfError::NotSymmetric { .. } => "not_symmetric",
                GrfError::Singular => "singular",
                GrfError::TooLargeForDense { .. } => "too_large_for_dense",
                GrfError::Unsupported(_) => "unsupported",
                GrfError::Io(_) => "io",
            },
            CliError::Io { .. } => "io",
            CliError::Usage(_) => "usage",
            CliError::Validation(_) => "validation",
            CliError::Json(_) => "json",
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
