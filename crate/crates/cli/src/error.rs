use coulomb_core::Error as CoreError;
use serde_json::json;
use thiserror::Error;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    /// `key` is the dotted path of the offending entry, empty if unknown.
    #[error("configuration error at `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config { key: key.into(), message: message.into() }
    }

    /// A core validation error raised while checking section `section`.
    pub fn from_core(section: &str, e: CoreError) -> Self {
        match e {
            CoreError::InvalidParameter { name, reason } => CliError::config(format!("{section}.{name}"), reason),
            other => CliError::config(section, other.to_string()),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            CliError::Config { key, message } => json!({ "error": "config", "key": key, "message": message }),
            CliError::Runtime(message) => json!({ "error": "runtime", "message": message }),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
