use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A correlation was requested from a table with no coincidences.
    #[error("no coincidences: correlation is undefined")]
    NoCoincidences,

    #[error("threshold {0} outside the supported range {1}")]
    ThresholdOutOfRange(f64, &'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid probability table: {0}")]
    InvalidPmf(String),

    #[error("{path}: line {line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("event stream is not sorted by t_ns (record {index})")]
    Unsorted { index: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}
