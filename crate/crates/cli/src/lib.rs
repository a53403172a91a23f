//! Batch front end for `bellvol`: sampling, membership batteries, reports,
//! self-tests and program export.

pub mod commands;
pub mod config;
pub mod verify;

use std::fmt;

pub use config::RunConfig;

/// Command failure with its process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration, arguments or input files; exit code 2.
    Config(String),
    /// The sampler or a solver could not proceed; exit code 3.
    Numerical(String),
    /// A self-test failed; exit code 1.
    Verify(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Verify(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Verify(n) => write!(f, "{n} check(s) failed"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<bellvol_core::Error> for CliError {
    fn from(e: bellvol_core::Error) -> Self {
        use bellvol_core::Error as E;
        match e {
            E::Infeasible | E::DegenerateInterval { .. } => CliError::Numerical(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}
