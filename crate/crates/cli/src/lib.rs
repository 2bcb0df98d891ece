//! Scenario files, Monte Carlo batches and reports for the rendezvous simulator.

pub mod experiment;
pub mod report;
pub mod scenario;

pub use experiment::{run_experiment, Outcome, RunOptions, TraceMode};
pub use report::{emit_report, Format, Report};
pub use scenario::{parse_scenario, Scenario};

/// Errors are either problems with the input (exit code 2) or failures
/// while running or writing results (exit code 3).
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CliError {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}
