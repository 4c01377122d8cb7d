//! Monte-Carlo harness around `mprx-core`: experiment configuration,
//! paired-seed sweep orchestration, append-only result records with CSV
//! summaries, and the validation suites behind `mprx check`.

pub mod check;
pub mod config;
pub mod records;
pub mod sweep;

use std::fmt;
use std::path::{Path, PathBuf};

#[derive(Debug)]
pub enum SimError {
    /// A config file failed to parse.
    ConfigParse { line: usize, message: String },
    /// A config parsed but violates invariants; every violation listed.
    ConfigInvalid(Vec<String>),
    /// A results file is not in the documented format.
    MalformedResults { path: PathBuf, line: usize, message: String },
    Io { path: PathBuf, source: std::io::Error },
}

impl SimError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        SimError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::ConfigParse { line, message } => {
                write!(f, "config parse error at line {line}: {message}")
            }
            SimError::ConfigInvalid(violations) => {
                write!(f, "invalid config: {}", violations.join("; "))
            }
            SimError::MalformedResults { path, line, message } => {
                write!(f, "malformed results {} line {line}: {message}", path.display())
            }
            SimError::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl std::error::Error for SimError {}
