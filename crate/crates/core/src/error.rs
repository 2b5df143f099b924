use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Invalid parameters; `key` names the offending field.
    #[error("invalid configuration `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// A NaN or infinity appeared at iteration `t`.
    #[error("numerical failure at t={t}: {detail}")]
    Numerical { t: u64, detail: String },

    /// A theorem bound was requested outside its parameter regime.
    #[error("parameters outside the theorem's regime: {0}")]
    InvalidRegime(String),

    #[error("run incomplete: failed at t={failed_at}")]
    IncompleteRun { failed_at: u64 },
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
