use std::fmt;
use std::io;
use std::path::Path;

use kljn_core::KljnError;

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or parameters.
    Config(String),
    Io(String),
}

impl CliError {
    pub fn io(path: &Path, err: io::Error) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Io(msg) => write!(f, "i/o error: {msg}"),
        }
    }
}

impl From<KljnError> for CliError {
    fn from(err: KljnError) -> Self {
        CliError::Config(err.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(err: csv::Error) -> Self {
        CliError::Io(err.to_string())
    }
}
