//! Command implementations behind the `jumpest` binary.
//!
//! Every command takes a parsed [`ConfigDocument`] and returns a [`Run`]:
//! a [`ReportDocument`], human-readable lines for the terminal and whether
//! the verdict was negative (exit status 2).

pub mod commands;
pub mod config;
pub mod examples;
pub mod report;

pub use commands::{cmd_analyze, cmd_simulate, cmd_solve, cmd_wonham, Run, SimulateOptions};
pub use config::ConfigDocument;
pub use report::ReportDocument;

/// Environment variable holding the default worker count for `simulate`.
pub const WORKERS_ENV: &str = "JUMPEST_WORKERS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    /// The model itself is the problem: undetectable, divergent, no decomposition.
    #[error("{0}")]
    Analysis(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Analysis(_) => 2,
        }
    }
}

impl From<jumpest_core::Error> for CliError {
    fn from(e: jumpest_core::Error) -> Self {
        use jumpest_core::Error as E;
        match e {
            E::Diverged { .. }
            | E::NotConverged { .. }
            | E::Unstable { .. }
            | E::NotStabilizing
            | E::NotDetectable(_)
            | E::TooManyOutputs { .. }
            | E::NoDecomposition { .. }
            | E::SubsystemUndetectable { .. } => CliError::Analysis(e.to_string()),
            E::Io(msg) => CliError::Io(msg),
            other => CliError::Config(other.to_string()),
        }
    }
}
