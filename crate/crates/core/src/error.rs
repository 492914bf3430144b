use std::path::PathBuf;

/// Errors produced by ingestion, scoring, training, and persistence.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate id `{id}` in {path}")]
    DuplicateId { path: PathBuf, id: String },

    #[error("unknown relevance grade {0}")]
    UnknownGrade(i32),

    #[error("embedding for `{token}` has {got} components, expected {expected}")]
    InconsistentDim {
        token: String,
        expected: usize,
        got: usize,
    },

    #[error("cannot compute statistics over an empty corpus")]
    EmptyCorpus,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite gradient in parameter group `{0}`")]
    NonFiniteGradient(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("triple sampling: {0}")]
    Sampling(String),

    #[error("no strategy registered under `{0}`")]
    UnknownStrategy(String),

    #[error("config: {0}")]
    Config(String),

    #[error("missing data: {0}")]
    MissingData(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// True for errors caused by the invocation itself (bad config, unknown
    /// strategy names) rather than by the data it points at.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::Config(_) | Error::UnknownStrategy(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
