use thiserror::Error;

/// Errors raised by the solvers and constructors in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("cannot merge knots with weights {left} and {right}: weights must share a nonzero sign")]
    InvalidMerge { left: f64, right: f64 },

    #[error("run choice t = {0} is outside [0, 1]")]
    InvalidChoice(f64),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
