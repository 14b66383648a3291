use thiserror::Error;

/// Errors raised by the analysis pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("unknown system '{0}'")]
    UnknownSystem(String),

    #[error("parameter out of admissible range: {0}")]
    ParameterRange(String),

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no convergence in {stage}: {detail}")]
    NonConvergence { stage: String, detail: String },

    #[error("hypothesis {which} fails: {detail}")]
    Hypothesis { which: String, detail: String },

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn no_conv(stage: &str, detail: impl Into<String>) -> Error {
    Error::NonConvergence {
        stage: stage.to_string(),
        detail: detail.into(),
    }
}
