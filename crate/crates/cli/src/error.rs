use std::fmt;

/// Errors are split by who has to act on them; the split decides the exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable or invalid inputs. Exit code 1.
    User(String),
    /// Failures that are not the caller's fault. Exit code 2.
    Internal(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn user(msg: impl Into<String>) -> Self {
        Self::User(msg.into())
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        Self::Internal(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::User(_) => 1,
            Self::Internal(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::User(m) => write!(f, "error: {m}"),
            Self::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl From<dora_core::Error> for CliError {
    fn from(e: dora_core::Error) -> Self {
        use dora_core::Error::*;
        match e {
            Diverged { .. } | NonFinite(_) | DimensionMismatch(_) | EmptySurface => Self::Internal(e.to_string()),
            _ => Self::User(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Internal(format!("json: {e}"))
    }
}
