use std::fmt::Display;
use std::process::ExitCode;

use aas_server::ServerError;
use serde_json::{json, Value};

pub const USAGE: u8 = 1;
pub const VALIDATION: u8 = 2;
pub const RUNTIME: u8 = 3;

/// A failed invocation: its exit code and the one-line JSON error printed to stderr.
#[derive(Debug)]
pub struct Failure {
    pub exit: u8,
    pub code: String,
    pub message: String,
    pub extra: Vec<(String, Value)>,
}

impl Failure {
    pub fn new(exit: u8, code: impl Into<String>, message: impl Display) -> Self {
        Self { exit, code: code.into(), message: message.to_string(), extra: Vec::new() }
    }

    pub fn validation(code: impl Into<String>, message: impl Display) -> Self {
        Self::new(VALIDATION, code, message)
    }

    pub fn runtime(code: impl Into<String>, message: impl Display) -> Self {
        Self::new(RUNTIME, code, message)
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.extra.push((key.to_string(), value.into()));
        self
    }

    pub fn io(context: impl Display, e: std::io::Error) -> Self {
        Self::runtime("IoError", format!("{context}: {e}"))
    }

    pub fn report(&self) -> ExitCode {
        let mut line = json!({ "error": self.code, "message": self.message });
        if let Value::Object(m) = &mut line {
            m.extend(self.extra.clone());
        }
        eprintln!("{line}");
        ExitCode::from(self.exit)
    }
}

impl From<ServerError> for Failure {
    fn from(e: ServerError) -> Self {
        let exit = if e.is_validation() { VALIDATION } else { RUNTIME };
        let failure = Failure::new(exit, e.code(), &e);
        match &e {
            ServerError::Environment { path, .. } | ServerError::Telemetry { path, .. } => {
                failure.with("file", path.display().to_string())
            }
            _ => failure,
        }
    }
}
