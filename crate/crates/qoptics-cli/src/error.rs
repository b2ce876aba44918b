//! CLI error type with the exit-code contract: validation failures exit with
//! code 2, numerical failures with code 3.

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or parameters (exit code 2).
    Validation(String),
    /// Numerical failure during computation (exit code 3).
    Numerical(String),
    /// I/O failure (exit code 1).
    Io(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        CliError::Numerical(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical error: {m}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<qoptics::Error> for CliError {
    fn from(e: qoptics::Error) -> Self {
        use qoptics::Error as E;
        match e {
            E::InvalidTruncation(_)
            | E::DimensionMismatch { .. }
            | E::SiteOutOfRange { .. }
            | E::BadKeepSet
            | E::SpaceMismatch(..)
            | E::InvalidState(_)
            | E::InvalidModel(_)
            | E::SingularDistance
            | E::UndefinedAngle
            | E::BadEfficiency(_)
            | E::TimeDependentChannels
            | E::Invalid(_) => CliError::Validation(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}
