use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: line {line_no}: {reason}")]
    MalformedLine {
        path: String,
        line_no: usize,
        reason: String,
    },
    #[error("duplicate pair id {0:?}")]
    DuplicateId(String),
    #[error("cannot read corpus {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("no cached response for key {0} in replay mode")]
    ReplayMiss(String),
    #[error("model returned no parseable input")]
    GenerationEmpty,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("response cache: {0}")]
    Cache(#[from] io::Error),
}

impl GatewayError {
    /// Whether re-running the same pair later may succeed.
    pub fn is_retriable(&self) -> bool {
        matches!(self, GatewayError::ProviderUnavailable(_) | GatewayError::Cache(_))
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("cannot parse config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("result store {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("result store {path} has an unexpected header: {found}")]
    BadHeader { path: PathBuf, found: String },
    #[error("result store {path}: line {line_no} is not a result record")]
    BadRecord { path: PathBuf, line_no: usize },
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Core(#[from] hyclone_core::CoreError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("pair {0} has no ground-truth label")]
    MissingLabel(String),
    #[error("{0}")]
    Invalid(String),
}
