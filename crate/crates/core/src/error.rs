//! Error type shared across the crate.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("no entries in input")]
    Empty,

    #[error("duplicate index {index:?}")]
    DuplicateIndex { index: Vec<u32> },

    #[error("non-positive value {value} at index {index:?}")]
    NonPositiveValue { index: Vec<u32>, value: f64 },

    #[error("index {index:?} out of range for dims {dims:?}")]
    IndexOutOfRange { index: Vec<u32>, dims: Vec<u32> },

    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimMismatch { expected: Vec<u32>, got: Vec<u32> },

    #[error("dense cell count {cells} exceeds cap {cap}")]
    DenseCapExceeded { cells: u64, cap: u64 },

    #[error("invalid model file: {0}")]
    InvalidModel(String),

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),
}
