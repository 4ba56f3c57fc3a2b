//! Error taxonomy for the drift laboratory.
//!
//! Numeric routines fail loudly on domain violations rather than clamping
//! or substituting defaults. Anything that reaches `Err` here is a caller
//! mistake or a broken precondition, never a silently degraded result.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A drift profile or per-trial probability violates model constraints.
    #[error("admissibility error: {0}")]
    Admissibility(String),

    /// Inconsistent or malformed configuration, including mismatched
    /// threshold/statistic pairings.
    #[error("configuration error: {0}")]
    Config(String),

    /// Calibration could not produce a usable threshold.
    #[error("calibration failure: {0}")]
    Calibration(String),

    /// Too few points or replications to compute the requested summary.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Malformed input data (unsorted grids, empty curves, bad files).
    #[error("input error: {0}")]
    Input(String),

    /// A subcommand needs an artifact another subcommand produces.
    #[error("missing prerequisite: {needed}; run `driftlab {produced_by}` first")]
    MissingDependency { needed: String, produced_by: String },

    /// Request refused by an explicit guard (for example the exact
    /// enumeration cap).
    #[error("refused: {0}")]
    Refused(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
