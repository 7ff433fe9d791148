use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid delay model: {0}")]
    InvalidModel(String),

    #[error("invalid system configuration: {0}")]
    InvalidConfig(String),

    /// The conditioning set of the state-2 moments has (numerically) zero mass.
    #[error("conditioning set has probability {mass:e} at k = {k}; use the periodic path")]
    DegenerateConditioning { k: f64, mass: f64 },

    #[error("state-1 period must be positive, got {0}")]
    InvalidK(f64),

    #[error("invalid threshold {0}")]
    InvalidBeta(f64),

    #[error("could not bracket the threshold root after {doublings} doublings (upper = {upper})")]
    BracketFailure { doublings: u32, upper: f64 },

    #[error("invalid search range: {0}")]
    InvalidRange(String),

    #[error("k = {k} is outside the periodic window ({lo}, {hi})")]
    OutsidePeriodicWindow { k: f64, lo: f64, hi: f64 },

    #[error("invalid optimizer configuration: {0}")]
    InvalidOptimizer(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid simulation configuration: {0}")]
    InvalidSimConfig(String),

    #[error("event cap of {0} reached")]
    EventCapExceeded(u64),

    #[error("trace output failed: {0}")]
    TraceIo(String),

    #[error("ACK at t = {time} does not follow previous ACK at t = {previous}")]
    AckOrderViolation { time: f64, previous: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
