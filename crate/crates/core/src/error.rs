use thiserror::Error;

/// Errors raised by the workbench.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("arity mismatch for `{symbol}`: expected {expected}, found {found}")]
    ArityMismatch {
        symbol: String,
        expected: usize,
        found: usize,
    },
    #[error("unbound variable x{0}")]
    UnboundVariable(u32),
    #[error("not a sentence: free variables {0:?}")]
    NotASentence(Vec<u32>),
    #[error("signature mismatch: {0}")]
    SignatureMismatch(String),
    #[error("invalid structure: {0}")]
    InvalidStructure(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("inconsistent theory: no model of size at most {0}")]
    Inconsistent(usize),
    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),
    #[error("{0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Invalid(format!("json: {e}"))
    }
}
