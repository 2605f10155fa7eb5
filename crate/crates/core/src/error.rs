use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
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

    #[error("duplicate {kind} id {id:?}")]
    DuplicateId { kind: &'static str, id: String },

    #[error("{kind} {id:?} has empty text")]
    EmptyText { kind: &'static str, id: String },

    #[error("example {example_id:?}: gold_ctx_id {ctx_id:?} does not name one of its contexts")]
    UnknownGoldContext { example_id: String, ctx_id: String },

    #[error("example {example_id:?} has no gold context")]
    MissingGoldContext { example_id: String },

    #[error("example {example_id:?} has an empty context set")]
    EmptyContextSet { example_id: String },

    #[error("cannot build an index over an empty corpus")]
    EmptyCorpus,

    #[error("empty candidate set")]
    EmptyCandidates,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown {kind} id {id:?}")]
    UnknownId { kind: &'static str, id: String },

    #[error("vector {id:?} has {found} components, expected {expected}")]
    DimensionMismatch {
        id: String,
        expected: usize,
        found: usize,
    },

    #[error("vector {id:?} has a non-finite component")]
    NonFinite { id: String },

    #[error("cosine similarity is undefined for zero vector {id:?}")]
    ZeroVector { id: String },

    #[error("scorer {scorer:?} has no embeddings; vector composition needs an embedding scorer")]
    NoEmbeddings { scorer: String },

    #[error("unknown metric {0:?}")]
    UnknownMetric(String),

    #[error("unknown judge {0:?}")]
    UnknownJudge(String),

    #[error("empty sweep grid")]
    EmptyGrid,

    #[error("invalid ranked list: {0}")]
    InvalidRanking(String),
}

impl Error {
    /// Stable machine-readable code used by the command-line front end.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "E_IO",
            Error::Parse { .. } => "E_PARSE",
            Error::DuplicateId { .. } => "E_DUPLICATE_ID",
            Error::EmptyText { .. } => "E_EMPTY_TEXT",
            Error::UnknownGoldContext { .. } => "E_GOLD_CONTEXT",
            Error::MissingGoldContext { .. } => "E_MISSING_GOLD_CONTEXT",
            Error::EmptyContextSet { .. } => "E_EMPTY_CONTEXT_SET",
            Error::EmptyCorpus => "E_EMPTY_CORPUS",
            Error::EmptyCandidates => "E_EMPTY_CANDIDATES",
            Error::InvalidParameter(_) => "E_INVALID_PARAMETER",
            Error::UnknownId { .. } => "E_UNKNOWN_ID",
            Error::DimensionMismatch { .. } => "E_DIMENSION_MISMATCH",
            Error::NonFinite { .. } => "E_NON_FINITE",
            Error::ZeroVector { .. } => "E_ZERO_VECTOR",
            Error::NoEmbeddings { .. } => "E_NO_EMBEDDINGS",
            Error::UnknownMetric(_) => "E_UNKNOWN_METRIC",
            Error::UnknownJudge(_) => "E_UNKNOWN_JUDGE",
            Error::EmptyGrid => "E_EMPTY_GRID",
            Error::InvalidRanking(_) => "E_INVALID_RANKING",
        }
    }

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
}
