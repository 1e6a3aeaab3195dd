use std::fmt;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the library.
///
/// Validation and input problems map to CLI exit code 2, solver failures to 3
/// (see [`Error::exit_code`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: Location, message: String },

    #[error("solver failure for {context}: {reason}")]
    Solver { context: String, reason: String },

    #[error("internal error: {message}\n{dump}")]
    Internal { message: String, dump: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn solver(context: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Solver {
            context: context.into(),
            reason: reason.into(),
        }
    }

    pub fn parse(location: Location, message: impl Into<String>) -> Self {
        Error::Parse {
            location,
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Solver { .. } | Error::Internal { .. } => 3,
            _ => 2,
        }
    }
}

/// Where in an input document a parse error occurred.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Location {
    pub source: String,
    /// 1-based data row (header excluded), when applicable.
    pub row: Option<usize>,
    pub column: Option<String>,
}

impl Location {
    pub fn document(source: impl Into<String>) -> Self {
        Location {
            source: source.into(),
            row: None,
            column: None,
        }
    }

    pub fn cell(source: impl Into<String>, row: usize, column: impl Into<String>) -> Self {
        Location {
            source: source.into(),
            row: Some(row),
            column: Some(column.into()),
        }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.source)?;
        if let Some(row) = self.row {
            write!(f, " row {row}")?;
        }
        if let Some(col) = &self.column {
            write!(f, " column '{col}'")?;
        }
        Ok(())
    }
}
