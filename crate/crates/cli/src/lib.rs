//! Front end for the bulkvac solver and simulator: configuration files,
//! the `solve`, `simulate`, `compare` and `sweep` workflows, and their
//! output files.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use bulkvac::ErrorKind;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at {path}: {reason}")]
    Config { path: String, reason: String },

    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },

    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Model(#[from] bulkvac::Error),

    #[error("{failed} of {total} quantities disagree beyond |z| = {limit}")]
    Compare { failed: usize, total: usize, limit: f64 },
}

impl CliError {
    /// 0 success, 2 bad input, 3 unstable model, 4 solver failure,
    /// 5 solver and simulator disagree.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Read { .. } => 2,
            CliError::Write { .. } => 4,
            CliError::Model(e) => match e.kind() {
                ErrorKind::Input => 2,
                ErrorKind::Unstable => 3,
                ErrorKind::Solver => 4,
            },
            CliError::Compare { .. } => 5,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
