use thiserror::Error;

/// Errors produced anywhere in the detection pipeline.
///
/// The variants follow the failure classes the command-line driver maps to
/// exit codes: configuration and usage mistakes, malformed input data, and
/// numeric breakdowns during training.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("load error in {source_name}: {message}")]
    Load { source_name: String, message: String },

    #[error("generation error: {0}")]
    Generation(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn load(source_name: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Load {
            source_name: source_name.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
