use std::fmt;

use serde_json::json;
use tcpure_runner::RunError;

pub const EXIT_USER: i32 = 1;
pub const EXIT_INTERNAL: i32 = 2;

/// A failure with its exit class, printed to stderr as one JSON line.
#[derive(Debug)]
pub struct CliError {
    pub user: bool,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn user(kind: &'static str, message: impl Into<String>) -> Self {
        CliError {
            user: true,
            kind,
            message: message.into(),
        }
    }

    pub fn internal(kind: &'static str, message: impl Into<String>) -> Self {
        CliError {
            user: false,
            kind,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.user {
            EXIT_USER
        } else {
            EXIT_INTERNAL
        }
    }

    pub fn to_json(&self) -> String {
        json!({
            "error": {
                "kind": self.kind,
                "message": self.message,
                "exit_code": self.exit_code(),
            }
        })
        .to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

impl From<tcpure_core::Error> for CliError {
    fn from(e: tcpure_core::Error) -> Self {
        CliError {
            user: e.is_user_error(),
            kind: e.kind(),
            message: e.to_string(),
        }
    }
}

impl From<RunError> for CliError {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Config(_) => CliError::user("config", e.to_string()),
            RunError::Unreachable { .. } => CliError::user("unreachable", e.to_string()),
            RunError::Client(_) => CliError::internal("http_client", e.to_string()),
        }
    }
}
