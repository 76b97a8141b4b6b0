use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("response column `{column}` has non-binary value `{value}` on data row {row}")]
    NonBinaryResponse {
        column: String,
        value: String,
        row: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("model of size {size} is too large for n = {n} observations")]
    ModelTooLarge { size: usize, n: usize },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("enumeration over {count} configurations exceeds the limit of {limit}")]
    InstanceTooLarge { count: u128, limit: u128 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
