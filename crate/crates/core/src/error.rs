use std::path::PathBuf;

use thiserror::Error;

pub use crate::boundary::SyntaxKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid dimension, weights, names or any other user-supplied setting.
    #[error("configuration error: {0}")]
    Config(String),

    /// Shape or wiring mistakes: wrong input length, unknown parameter node.
    #[error("structural error: {0}")]
    Structure(String),

    /// A numeric evaluation produced NaN or infinity.
    #[error("evaluation error: {0}")]
    Eval(String),

    /// A point that no boundary piece governs.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("syntax error at offset {offset}: {message}")]
    Syntax {
        offset: usize,
        kind: SyntaxKind,
        message: String,
    },

    #[error("non-finite loss at epoch {epoch}: {detail}")]
    NonFiniteLoss { epoch: usize, detail: String },

    #[error("unsupported checkpoint version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("malformed file {path}: {message}")]
    Malformed { path: PathBuf, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn structure(msg: impl Into<String>) -> Self {
        Error::Structure(msg.into())
    }

    pub(crate) fn eval(msg: impl Into<String>) -> Self {
        Error::Eval(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable code printed by the CLI.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Config(_) => "E_CONFIG",
            Error::Structure(_) => "E_STRUCTURE",
            Error::Eval(_) => "E_EVAL",
            Error::Domain(_) => "E_DOMAIN",
            Error::Syntax { .. } => "E_SYNTAX",
            Error::NonFiniteLoss { .. } => "E_NONFINITE",
            Error::Version { .. } => "E_VERSION",
            Error::Malformed { .. } => "E_MALFORMED",
            Error::Io { .. } => "E_IO",
        }
    }

    /// Validation failures exit with 1, numeric/runtime failures with 2.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Structure(_)
                | Error::Domain(_)
                | Error::Syntax { .. }
                | Error::Version { .. }
                | Error::Malformed { .. }
        )
    }
}
