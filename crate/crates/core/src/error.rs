use std::path::PathBuf;

/// Errors produced anywhere in the forecasting pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed {what}: {message}")]
    Format { what: &'static str, message: String },

    #[error("activity label {0:?} is empty after sanitization")]
    EmptyActivity(String),

    #[error("need at least {required} traces, log has {available}")]
    InsufficientTraces { required: usize, available: usize },

    #[error("activity {0:?} is not part of the universe / vocabulary")]
    UnknownActivity(String),

    #[error("token id {id} out of range for vocabulary of size {vocab_size}")]
    TokenOutOfRange { id: usize, vocab_size: usize },

    #[error("matrices are defined over different activity universes; align them first")]
    UniverseMismatch,

    #[error("encoder produced no outputs to attend over")]
    EmptyEncoderOutputs,

    #[error("non-finite {what} at epoch {epoch}, pair {pair}")]
    NonFinite {
        what: &'static str,
        epoch: usize,
        pair: usize,
    },

    #[error("generation produced no complete trace")]
    NoCompleteTrace,

    #[error("stage {stage} failed: {source}; completed artifacts: {completed:?}")]
    Stage {
        stage: &'static str,
        completed: Vec<PathBuf>,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(what: &'static str, message: impl Into<String>) -> Self {
        Error::Format {
            what,
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
