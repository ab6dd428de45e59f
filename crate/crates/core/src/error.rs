use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("induced Markov chain is not ergodic: power iteration did not contract")]
    NonErgodic,

    #[error("linear system is singular")]
    SingularSystem,

    #[error("relative value iteration did not converge{}", .t.map(|t| format!(" at t = {t}")).unwrap_or_default())]
    NoConvergence { t: Option<usize> },

    #[error("time index {t} outside horizon [0, {horizon})")]
    IndexOutOfHorizon { t: usize, horizon: usize },

    #[error("length mismatch: trace has {trace} steps, benchmark has {benchmark}")]
    LengthMismatch { trace: usize, benchmark: usize },

    #[error("invalid horizon {0}")]
    InvalidHorizon(usize),

    #[error("invalid probability vector: {0}")]
    InvalidProbability(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid MDP snapshot: {0}")]
    InvalidSnapshot(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
}
