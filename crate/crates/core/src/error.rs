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

    #[error("{context}: malformed JSON: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    /// Input data violates a documented invariant (duplicate ids, dangling keys, ...).
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("SQL syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unresolved reference `{name}`: {message}")]
    Unresolved { name: String, message: String },

    #[error("unsupported SQL construct: {0}")]
    Unsupported(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value {what} at step {step}")]
    NonFinite { what: String, step: usize },

    #[error("value store: {0}")]
    ValueStore(String),

    #[error("database execution: {0}")]
    Execution(String),

    #[error("LLM client: {0}")]
    Llm(String),

    #[error("checkpoint fingerprint mismatch: index built with {expected}, encoder is {found}")]
    Fingerprint { expected: String, found: String },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }

    /// Errors a user can fix by changing inputs or flags, as opposed to internal failures.
    pub fn is_user_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Json { .. }
                | Error::Invalid(_)
                | Error::Syntax { .. }
                | Error::Unresolved { .. }
                | Error::Unsupported(_)
                | Error::ValueStore(_)
                | Error::Fingerprint { .. }
        )
    }
}
