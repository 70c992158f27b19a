use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A rescaled response fell outside the unit interval.
    #[error("basis argument {value} outside [0, 1]")]
    Domain { value: f64 },

    #[error("invalid argument `{field}`: {reason}")]
    InvalidArgument { field: String, reason: String },

    /// Shape or size problem in the data handed to `fit`.
    #[error("invalid fit input `{field}`: {reason}")]
    InvalidInput { field: String, reason: String },

    #[error("response column {column} is constant; density estimation is degenerate")]
    DegenerateResponse { column: usize },

    #[error("criterion `mse` requires a univariate response, got {dim} response columns")]
    UnsupportedCriterion { dim: usize },

    #[error("cannot load model, field `{field}`: {reason}")]
    Load { field: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn arg(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn input(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn load(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Load {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
