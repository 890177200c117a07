//! Error type shared across the crate.

use std::fmt;

/// Errors reported by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An alpha value of exactly 1 was supplied.
    AlphaIsOne,
    /// The operation requires alpha in [0, 1).
    AlphaOutsideMonotoneRange(f64),
    /// Argument outside the mathematical domain of the function.
    Domain(String),
    /// A requested mean statistic lies outside the image of the
    /// log-partition gradient (e.g. a non positive-definite implied
    /// covariance). Callers typically shrink gamma and retry.
    Image(String),
    /// A covariance/scale matrix failed its positive-definiteness check.
    NotPositiveDefinite(String),
    /// The weight-update bracket for a component was non-positive.
    NonpositiveBracket { component: usize, value: f64 },
    /// The target density vanished at an evaluation point.
    ZeroTargetDensity,
    /// A quadrature precondition failed (normalisation, mass, ...).
    Quadrature(String),
    /// Malformed input data (grid files, state files, ...).
    Parse(String),
    /// Invalid configuration value.
    Config(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::AlphaIsOne => write!(f, "alpha = 1 is excluded"),
            Error::AlphaOutsideMonotoneRange(a) => {
                write!(f, "alpha = {a} outside the monotone-update range [0, 1)")
            }
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::Image(msg) => write!(f, "statistic outside the solvable image: {msg}"),
            Error::NotPositiveDefinite(msg) => write!(f, "matrix not positive definite: {msg}"),
            Error::NonpositiveBracket { component, value } => write!(
                f,
                "non-positive weight-update bracket {value} for component {component}"
            ),
            Error::ZeroTargetDensity => write!(f, "target density is zero at evaluation point"),
            Error::Quadrature(msg) => write!(f, "quadrature error: {msg}"),
            Error::Parse(msg) => write!(f, "parse error: {msg}"),
            Error::Config(msg) => write!(f, "config error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
