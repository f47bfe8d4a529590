use thiserror::Error;

/// Errors raised by the simulator library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("invalid zone: {0}")]
    Zone(String),

    #[error("line {line}: key `{key}`: {reason}")]
    Config { line: usize, key: String, reason: String },

    #[error("invalid scenario: {0}")]
    Scenario(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
