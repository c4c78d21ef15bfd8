//! Exit-code classification: 2 for bad input, 1 for everything else.

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Unreadable, malformed or inconsistent input.
    User(anyhow::Error),
    Internal(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::User(_) => 2,
            CliError::Internal(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::User(e) | CliError::Internal(e) => write!(f, "{e:#}"),
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Internal(e.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub trait UserContext<T> {
    /// Marks a failure as caused by the input, with context.
    fn user(self, what: impl fmt::Display) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> UserContext<T> for Result<T, E> {
    fn user(self, what: impl fmt::Display) -> CliResult<T> {
        self.map_err(|e| CliError::User(e.into().context(what.to_string())))
    }
}

pub fn user_error(msg: impl fmt::Display) -> CliError {
    CliError::User(anyhow::anyhow!("{msg}"))
}
