use thiserror::Error;

/// Errors raised by fitting, transforming, evaluating and file handling.
#[derive(Debug, Error)]
pub enum SalError {
    /// Input data violates a structural requirement (non-finite entries, too few rows).
    #[error("data error: {0}")]
    Data(String),

    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A decomposition or optimizer failed to produce a usable result.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A text file could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A serialized eraser is malformed or has the wrong version.
    #[error("load error: {0}")]
    Load(String),

    /// A requested key (word, class) does not exist.
    #[error("lookup error: {0}")]
    Lookup(String),

    /// A metric is mathematically undefined for the given inputs.
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SalError {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        SalError::Contract(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        SalError::Numeric(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        SalError::Parse {
            line,
            message: msg.into(),
        }
    }

    /// True for errors caused by numerical breakdown rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, SalError::Numeric(_))
    }
}

pub type Result<T> = std::result::Result<T, SalError>;
