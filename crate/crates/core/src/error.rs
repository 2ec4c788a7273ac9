use thiserror::Error;

/// Errors raised by the simulator library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum KljnError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("sample rate {sample_rate} Hz is below twice the noise bandwidth {bandwidth} Hz")]
    Aliasing { sample_rate: f64, bandwidth: f64 },

    #[error("sample grids differ: {0}")]
    GridMismatch(String),

    #[error("theta = {theta} violates the no-wave limit (must be below 1)")]
    NoWaveLimit { theta: f64 },

    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),

    #[error(
        "key exchange exceeded the cap of {cap} bit periods with {kept} of {target} bits kept"
    )]
    Timeout {
        cap: u64,
        kept: usize,
        target: usize,
    },

    #[error("attack window [{start}, {stop}) out of bounds for {len} samples")]
    WindowOutOfBounds {
        start: usize,
        stop: usize,
        len: usize,
    },

    #[error("topology error: {0}")]
    Topology(String),
}

pub type Result<T> = std::result::Result<T, KljnError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> KljnError {
    KljnError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
