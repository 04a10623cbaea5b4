use thiserror::Error;

/// Errors raised across the simulation, master-equation, continuum and
/// analytic routes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid jump: {0}")]
    InvalidJump(String),

    #[error("dimension mismatch: expected {expected} agents, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("agent {loser} holds {units} units and cannot lose one (kernel ignores bankruptcy)")]
    Underflow { loser: usize, units: i64 },

    #[error("state space has {size} states, above the limit of {limit}")]
    StateSpaceTooLarge { size: u128, limit: u128 },

    #[error("time step {tau} violates the stability bound {limit}")]
    Cfl { tau: f64, limit: f64 },

    #[error("initial point is not usable on the grid: {0}")]
    OffGrid(String),

    #[error("reduction is only provided for 2 or 3 agents, got {0}")]
    UnsupportedAgents(usize),

    #[error("degenerate time: t must be strictly after t0 (t = {t}, t0 = {t0})")]
    DegenerateTime { t: f64, t0: f64 },

    #[error("quadratic form is not positive definite (eigenvalues {0:?})")]
    NonviableForm([f64; 2]),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("incompatible domains: {0}")]
    IncompatibleDomains(String),

    #[error("ensemble is empty")]
    EmptyEnsemble,

    #[error("time mismatch: {0}")]
    TimeMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
