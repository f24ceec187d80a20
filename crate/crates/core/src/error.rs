use thiserror::Error;

/// Errors raised by table construction, agreement indices, fiber enumeration
/// and the annealing search.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid weighting scheme: {0}")]
    InvalidScheme(String),

    #[error("rater index {index} out of range 1..={raters}")]
    RaterOutOfRange { index: usize, raters: usize },

    #[error("empty table (N = 0)")]
    EmptyTable,

    /// Expected agreement equals one, so kappa has a zero denominator.
    #[error("kappa undefined: expected agreement is 1 for this table")]
    KappaUndefined,

    #[error("move would make a cell negative")]
    MoveRejected,

    #[error("fiber too large: node budget of {budget} exceeded")]
    FiberTooLarge { budget: u64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable tag, used in CLI error objects and FFI codes.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::InvalidScheme(_) => "invalid_scheme",
            Error::RaterOutOfRange { .. } => "rater_out_of_range",
            Error::EmptyTable => "empty_table",
            Error::KappaUndefined => "kappa_undefined",
            Error::MoveRejected => "move_rejected",
            Error::FiberTooLarge { .. } => "fiber_too_large",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
