use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("precision exhausted: {0}")]
    Precision(String),
    #[error("operands do not match: {0}")]
    Mismatch(String),
    #[error("window overflow: {0}")]
    Window(String),
    #[error("out of desk scope: {0}")]
    OutOfScope(String),
    #[error("not converged: {0}")]
    NotConverged(String),
}

pub type Result<T> = std::result::Result<T, Error>;
