use std::path::Path;

use thiserror::Error;

/// Failure classes of the runner, each with its own process exit code.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("oracle failure: {0}")]
    Oracle(String),

    #[error("{0}")]
    Io(String),

    #[error(transparent)]
    Core(nsrl_core::Error),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Oracle(_) => 3,
            HarnessError::Io(_) | HarnessError::Core(_) => 1,
        }
    }

    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        HarnessError::Io(format!("{}: {err}", path.display()))
    }
}

impl From<nsrl_core::Error> for HarnessError {
    fn from(e: nsrl_core::Error) -> Self {
        use nsrl_core::Error as E;
        match e {
            E::NoConvergence { .. } | E::NonErgodic | E::SingularSystem => HarnessError::Oracle(e.to_string()),
            E::InvalidParams(_) | E::InvalidSchedule(_) | E::InvalidHorizon(_) | E::InvalidSnapshot(_) => {
                HarnessError::Config(e.to_string())
            }
            other => HarnessError::Core(other),
        }
    }
}
