//! Error types shared by the simulation kernels.

use std::fmt;

/// Errors raised by the arithmetic and simulation kernels.
///
/// Overflow is always an error here: a correctly sized datapath never
/// overflows, so a silent wrap would only hide a sizing bug.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two fixed-point values with different scales were combined.
    ScaleMismatch { left: String, right: String },
    /// A value does not fit the configured register width.
    Overflow {
        what: &'static str,
        value: i128,
        width: u32,
    },
    /// A spike vector and a weight row disagree in length.
    LengthMismatch { expected: usize, actual: usize },
    /// Layer-level shapes (weights, params, state) are inconsistent.
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    /// An adder-tree input list exceeds the configured fan-in.
    FanInExceeded { limit: usize, actual: usize },
    /// A floating-point input was NaN or infinite.
    NonFiniteInput { what: &'static str },
    /// A raster with zero cycles or zero channels cannot be summarized.
    EmptyRaster,
    /// A Bernoulli spike probability fell outside [0, 1].
    RateOutOfRange { probability: f64 },
    /// A stream violated its ordering or channel-bound invariants.
    StreamInvariant(String),
    /// Parameters or configuration values are out of bounds.
    InvalidConfig(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ScaleMismatch { left, right } => {
                write!(f, "scale mismatch: {left} vs {right}")
            }
            Error::Overflow { what, value, width } => {
                write!(f, "overflow: {what} value {value} does not fit {width} bits")
            }
            Error::LengthMismatch { expected, actual } => {
                write!(f, "length mismatch: expected {expected}, got {actual}")
            }
            Error::DimensionMismatch {
                what,
                expected,
                actual,
            } => write!(f, "dimension mismatch for {what}: expected {expected}, got {actual}"),
            Error::FanInExceeded { limit, actual } => {
                write!(f, "fan-in exceeded: {actual} inputs, limit {limit}")
            }
            Error::NonFiniteInput { what } => write!(f, "non-finite input: {what}"),
            Error::EmptyRaster => write!(f, "empty raster"),
            Error::RateOutOfRange { probability } => {
                write!(f, "spike probability {probability} outside [0, 1]")
            }
            Error::StreamInvariant(msg) => write!(f, "stream invariant violated: {msg}"),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
