use thiserror::Error;

/// Errors produced across the planning toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A query point fell outside the field domain or the mesh cover.
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed input data (CSV lattice, exported tables).
    #[error("format error: {0}")]
    Format(String),

    /// Invalid model or mesh construction.
    #[error("construction error: {0}")]
    Construction(String),

    #[error("mesh error: {0}")]
    Mesh(String),

    /// Linear solve failed or missed its residual target.
    #[error("numerical error: {message} (residual {residual:.3e})")]
    Numerical { message: String, residual: f64 },

    #[error("iteration limit of {limit} reached without convergence")]
    IterationLimit { limit: usize },

    /// Configuration problem; `field` names the offending key.
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Exit status for the command-line front end: 2 for bad input, 3 for
    /// solver failures, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Format(_) => 2,
            Error::Io(_) | Error::Csv(_) => 1,
            _ => 3,
        }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn numerical(message: impl Into<String>, residual: f64) -> Self {
        Error::Numerical {
            message: message.into(),
            residual,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
