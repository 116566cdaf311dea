use thiserror::Error;

/// Errors raised by the detection core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("graph is disconnected ({components} components)")]
    DisconnectedGraph { components: usize },

    #[error("weight matrix violates the spectral gap condition: sigma2 = {sigma2}")]
    SpectralGapViolation { sigma2: f64 },

    #[error("invalid topology: {0}")]
    InvalidTopology(&'static str),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("bit fraction {fraction} is degenerate (must lie strictly inside (0, 1))")]
    DegenerateBits { fraction: f64 },

    #[error("logarithm argument {value} is not positive ({context})")]
    DegenerateLogArgument { value: f64, context: &'static str },

    #[error("oracle instance too large: N = {n}, M + K = {len}")]
    OracleScaleExceeded { n: usize, len: usize },

    #[error("value {value} outside the domain of {name}")]
    DomainError { name: &'static str, value: f64 },

    #[error("MN = {mn} does not exceed ln 2 / upsilon* = {critical}")]
    InfeasibleMN { mn: f64, critical: f64 },

    #[error("invalid scenario: {field}: {reason}")]
    InvalidScenario { field: &'static str, reason: &'static str },

    #[error("sensor {sensor}: mu = {mu} is below the attack floor b = {b}")]
    AttackBelowFloor { sensor: usize, mu: f64, b: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;
