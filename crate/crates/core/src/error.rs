use std::fmt;

use thiserror::Error;

/// One of the eight consistency conditions between boundary data and initial data.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchingFailure {
    pub condition: &'static str,
    pub expected: f64,
    pub actual: f64,
}

impl fmt::Display for MatchingFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: boundary {:.6e} vs initial {:.6e} (|diff| = {:.3e})",
            self.condition,
            self.expected,
            self.actual,
            (self.expected - self.actual).abs()
        )
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("time must be non-negative, got {0}")]
    NegativeTime(f64),

    #[error("derivative order must be 0, 1 or 2, got {0}")]
    InvalidOrder(u8),

    #[error("{required} modes needed for the requested tolerance, {given} supplied")]
    InsufficientModes { required: usize, given: usize },

    #[error("matching conditions violated:\n{}", format_failures(.0))]
    MatchingViolation(Vec<MatchingFailure>),

    #[error("parity violation: {0}")]
    ParityViolation(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("source returned a non-finite value at x = {x}, t = {t}")]
    NonFiniteSource { x: f64, t: f64 },

    #[error("Picard iteration diverged after {} iterations (last norm {:.3e})", .norms.len(), .norms.last().copied().unwrap_or(f64::NAN))]
    IterationDiverged { norms: Vec<f64> },

    #[error("residual needs at least 5 time levels, got {0}")]
    TooFewTimeLevels(usize),

    #[error("winding number ambiguous: (u(2π) - u(0))/2π = {0}")]
    AmbiguousWinding(f64),
}

fn format_failures(failures: &[MatchingFailure]) -> String {
    failures
        .iter()
        .map(|f| format!("  {f}"))
        .collect::<Vec<_>>()
        .join("\n")
}

pub type Result<T> = std::result::Result<T, Error>;
