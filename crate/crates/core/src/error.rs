use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid value for `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },

    #[error("antenna count {n} outside [{min}, {max}]")]
    AntennasOutOfRange { n: usize, min: usize, max: usize },

    #[error("cannot build a precoder from a zero channel estimate")]
    ZeroVector,

    #[error("energy efficiency undefined for zero total power")]
    ZeroPower,

    #[error("problem is infeasible: {0}")]
    Infeasible(String),

    #[error("transmit power is unbounded: {0}")]
    Unbounded(String),

    #[error("{solver} did not converge after {iterations} iterations")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
    },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Process exit code under the CLI contract: 1 for solver failures,
    /// 2 for bad input.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Infeasible(_) | Error::Unbounded(_) | Error::NonConvergence { .. } => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
