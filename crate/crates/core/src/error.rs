//! Error type shared by every pipeline stage.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    MissingArtifact,
    Budget,
    Numerical,
    Data,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown {kind} `{name}`")]
    UnknownName { kind: &'static str, name: String },

    #[error("record too short: need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error("unknown class label `{0}`")]
    UnknownLabel(String),

    #[error("class `{class}` has {n} samples, at least 2 are required")]
    UnderSampled { class: String, n: usize },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("compute budget exceeded: {needed} optimizer steps requested, cap is {cap}")]
    BudgetExceeded { needed: u64, cap: u64 },

    #[error("memory budget violated: {0}")]
    MemoryBudget(String),

    #[error("missing artifact: {}", .0.display())]
    MissingArtifact(PathBuf),

    #[error("I/O error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("stream sample {position}: {source}")]
    Stream {
        position: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn at_stream(self, position: u64) -> Self {
        Error::Stream {
            position,
            source: Box::new(self),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Stream { source, .. } => source.kind(),
            Error::Config(_) | Error::UnknownName { .. } => ErrorKind::Config,
            Error::MissingArtifact(_) => ErrorKind::MissingArtifact,
            Error::BudgetExceeded { .. } | Error::MemoryBudget(_) => ErrorKind::Budget,
            Error::NotPositiveDefinite(_) | Error::NonFinite(_) => ErrorKind::Numerical,
            Error::Io { .. } => ErrorKind::Io,
            _ => ErrorKind::Data,
        }
    }

    /// Short machine-readable tag for error reports.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::Stream { source, .. } => source.tag(),
            Error::Config(_) => "config",
            Error::UnknownName { .. } => "unknown_name",
            Error::TooShort { .. } => "too_short",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::EmptyInput(_) => "empty_input",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Format(_) => "format",
            Error::UnknownLabel(_) => "unknown_label",
            Error::UnderSampled { .. } => "under_sampled",
            Error::NotPositiveDefinite(_) => "not_positive_definite",
            Error::NonFinite(_) => "non_finite",
            Error::BudgetExceeded { .. } => "budget_exceeded",
            Error::MemoryBudget(_) => "memory_budget",
            Error::MissingArtifact(_) => "missing_artifact",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }
}
