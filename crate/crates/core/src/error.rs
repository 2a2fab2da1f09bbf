use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A corpus line that is not well-formed JSON.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A well-formed line whose fields violate the record schema.
    #[error("schema error: {0}")]
    Schema(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Internal consistency failure (mismatched matrix shapes and the like).
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// The synthetic-corpus request cannot be satisfied.
    #[error("unsatisfiable synthetic spec: {0}")]
    UnsatisfiableSpec(String),

    /// Training aborted because the objective stopped being finite.
    #[error("non-finite loss: {0}")]
    NonFiniteLoss(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, Error>;
