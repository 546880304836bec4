use std::path::PathBuf;

use gclab::GclabError;
use serde_json::json;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Inconclusive(String),
    Io { message: String, written: Vec<PathBuf> },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Io { .. } => 3,
            CliError::Inconclusive(_) => 4,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let (kind, message, written) = match self {
            CliError::Config(m) => ("config", m.as_str(), None),
            CliError::Numerical(m) => ("numerical", m.as_str(), None),
            CliError::Inconclusive(m) => ("inconclusive", m.as_str(), None),
            CliError::Io { message, written } => ("io", message.as_str(), Some(written)),
        };
        let mut err = json!({ "kind": kind, "message": message, "exit_code": self.exit_code() });
        if let Some(w) = written {
            err["written"] = json!(w);
        }
        json!({ "error": err })
    }
}

impl From<GclabError> for CliError {
    fn from(e: GclabError) -> Self {
        match e {
            GclabError::Inconclusive(_) => CliError::Inconclusive(e.to_string()),
            GclabError::InvalidArgument(_) => CliError::Config(e.to_string()),
            GclabError::Io(io) => CliError::Io {
                message: io.to_string(),
                written: Vec::new(),
            },
            other => CliError::Numerical(other.to_string()),
        }
    }
}
