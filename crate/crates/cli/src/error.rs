use std::process::ExitCode;

use crate::config::ConfigError;

/// Failures of a lab invocation, each with its own exit code.
#[derive(Debug)]
pub enum LabError {
    Config(String),
    Budget(String),
    Module(cat1lab::Error),
    Io(std::io::Error),
}

impl LabError {
    /// 2 config, 3 budget, 5 other module errors, 6 I/O. Failed verdicts exit with 4.
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            LabError::Config(_) => 2,
            LabError::Budget(_) => 3,
            LabError::Module(_) => 5,
            LabError::Io(_) => 6,
        })
    }
}

impl std::fmt::Display for LabError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LabError::Config(m) => write!(f, "config error: {m}"),
            LabError::Budget(m) => write!(f, "budget exceeded: {m}"),
            LabError::Module(e) => write!(f, "{e}"),
            LabError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<ConfigError> for LabError {
    fn from(e: ConfigError) -> Self {
        LabError::Config(e.0)
    }
}

impl From<cat1lab::Error> for LabError {
    fn from(e: cat1lab::Error) -> Self {
        match e {
            cat1lab::Error::BudgetExceeded { cap } => LabError::Budget(format!(
                "the orbit would exceed the point cap of {cap}; lower orbit.max_dist or raise orbit.point_cap"
            )),
            other => LabError::Module(other),
        }
    }
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e)
    }
}
