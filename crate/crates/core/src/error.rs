use thiserror::Error;

/// Errors surfaced by the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Bad caller-supplied values (ranges, lengths, empty inputs).
    #[error("invalid input: {0}")]
    Input(String),

    /// Inconsistent setup: shape mismatches, disconnected domains, short trajectories.
    #[error("configuration error: {0}")]
    Config(String),

    /// A non-finite value appeared during evaluation.
    #[error("numeric error in {component}: {detail}")]
    Numeric { component: String, detail: String },

    /// Violated internal precondition (e.g. a warm start without a previous result).
    #[error("logic error: {0}")]
    Logic(String),

    /// The privacy budget has no spendable remainder.
    #[error("privacy budget exhausted: remaining {remaining:.3e}")]
    BudgetExhausted { remaining: f64 },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn numeric(component: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Numeric {
            component: component.into(),
            detail: detail.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse {
            line: e.line(),
            detail: e.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
