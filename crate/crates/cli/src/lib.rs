//! Scenario files, reports and the subcommands behind the `qdetect` binary.

pub mod commands;
pub mod formats;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Malformed or inconsistent input; exit code 1.
    #[error("input error: {0}")]
    Input(String),
    /// The numerical method failed; exit code 2.
    #[error("solver failure: {0}")]
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Solver(_) => 2,
        }
    }
}

impl From<qdetect::Error> for CliError {
    fn from(e: qdetect::Error) -> Self {
        use qdetect::Error as E;
        match e {
            E::Solver { .. } | E::EigenNoConvergence | E::Singular | E::InvalidProblem(_) => {
                CliError::Solver(e.to_string())
            }
            E::NotPositiveDefinite { .. } => CliError::Solver(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}
