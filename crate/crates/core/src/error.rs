use thiserror::Error;

pub type Result<T, E = WaitError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WaitError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("level index {k} is below the schedule start {k_start}")]
    IndexOutOfRange { k: u64, k_start: u64 },

    #[error("x = {x} is outside the profile range [0, {x_max}]")]
    OutOfRange { x: f64, x_max: f64 },

    #[error("profile exponent undefined at x = {x}: W(x) = 0")]
    UndefinedExponent { x: f64 },

    #[error("counting function requires an unweighted schedule, got `{0}`")]
    WrongScheduleKind(String),

    #[error("level count at x = {x} exceeds the exactly representable integers")]
    CountNotRepresentable { x: f64 },

    #[error("running maximum {h} exceeds the profile range {x_max}; rebuild the profile")]
    ProfileRangeExceeded { h: f64, x_max: f64 },

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("time {0} is not on the simulation grid")]
    NotOnGrid(u64),

    #[error("null-side aggregate overflowed in linear space (log M = {0})")]
    Overflow(f64),

    #[error("unknown schedule key `{0}`")]
    UnknownSchedule(String),

    #[error("{0}")]
    Io(String),
}

impl From<std::io::Error> for WaitError {
    fn from(e: std::io::Error) -> Self {
        WaitError::Io(e.to_string())
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> WaitError {
    WaitError::InvalidParameter(msg.into())
}
