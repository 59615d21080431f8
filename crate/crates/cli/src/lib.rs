//! Scenario runner around `manipcost-core`: reads a TOML scenario, runs the
//! closed forms and the brute-force oracle, and writes CSV tables.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod parallel;

use manipcost_core::Error;

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Success = 0,
    Config = 2,
    /// Infeasible target or unmet hypotheses.
    Unmet = 3,
    VerificationFailed = 4,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("output error: {0}")]
    Io(String),
    #[error(transparent)]
    Solver(#[from] Error),
}

impl CliError {
    pub fn exit(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Solver(Error::Invalid { .. }) => Exit::Config as i32,
            CliError::Io(_) => 1,
            CliError::Solver(_) => Exit::Unmet as i32,
        }
    }
}
