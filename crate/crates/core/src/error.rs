use thiserror::Error;

use crate::gateway::GatewayError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("collection <{0}> has no instances")]
    EmptyCollection(String),
    #[error(
        "no path partitions the collection under the quota of {quota} (tried up to {max_unique_values} unique values); raise the quota or the path depth"
    )]
    Unpartitionable { quota: usize, max_unique_values: usize },
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown path index {0}")]
    UnknownPath(usize),
    #[error("unknown zone {0}")]
    UnknownZone(usize),
    #[error("unknown entity id {0}")]
    UnknownEntity(usize),
    #[error("the query is scoped to the current selection but none was given")]
    NoCurrentSelection,
    #[error("invalid selection query: {0}")]
    InvalidQuery(String),
    #[error("a selection query needs at least one condition")]
    EmptyQuery,
    #[error("zone and lasso conditions need a projected map")]
    NoMap,
    #[error("bit rows differ in length ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("a two-sample test needs non-empty samples")]
    EmptySample,
    #[error("{file}: format version {found} is not supported (expected {expected}); re-run ingest to migrate")]
    Version { file: String, found: u32, expected: u32 },
    #[error("{file}: {message}")]
    Format { file: String, message: String },
    #[error("job cancelled")]
    Cancelled,
    #[error("selection does not match the summaries it is exported with: {0}")]
    Unresolved(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("zip error: {0}")]
    Zip(#[from] zip::result::ZipError),
}

impl Error {
    pub(crate) fn format(file: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format { file: file.into(), message: message.into() }
    }
}
