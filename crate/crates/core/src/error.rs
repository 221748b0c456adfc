use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("IDX format error in {path}: bad magic number {found:#010x}, expected {expected:#010x}")]
    IdxBadMagic {
        path: PathBuf,
        expected: u32,
        found: u32,
    },

    #[error("IDX file {path} is truncated: expected {expected} bytes, found {found}")]
    IdxTruncated {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("IDX count mismatch: {images} images but {labels} labels")]
    IdxCountMismatch { images: usize, labels: usize },

    #[error("partition produced an empty shard after {attempts} attempts")]
    PartitionRetriesExhausted { attempts: usize },

    #[error("infeasible partition: {0}")]
    InfeasiblePartition(String),

    #[error("configuration invalid:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),

    #[error("training diverged at round {round}, client {client}: {detail}")]
    Diverged {
        round: usize,
        client: usize,
        detail: String,
    },

    #[error("client {client} has no other participant in the previous round")]
    NoNonSelfHistory { client: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("state corruption: {0}")]
    StateCorruption(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn dims(context: &'static str, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            context,
            expected,
            found,
        }
    }
}
