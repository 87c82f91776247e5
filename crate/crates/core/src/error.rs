// SPDX-License-Identifier: MIT OR Apache-2.0

//! Error type shared by every module of the crate.

use std::path::PathBuf;

/// Errors produced by bandit construction, policy updates, scoring,
/// steering, the latent toy model and the experiment harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// The bandit instance violates a construction invariant.
    #[error("invalid bandit instance: {0}")]
    InvalidInstance(String),

    /// All arms share the optimal scalar reward, so gaps and the
    /// conditioning constant are undefined.
    #[error("degenerate instance: every arm attains the optimal scalar reward")]
    DegenerateInstance,

    /// A probability vector is not on the simplex (or lacks required support).
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    /// Two objects that must agree on the arm count do not.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A population score denominator vanished.
    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    /// A rollout group does not have the shape a score expects.
    #[error("invalid rollout group: {0}")]
    InvalidGroup(String),

    /// A steering contrast is outside [-1, 1] or not policy-centred.
    #[error("invalid contrast: {0}")]
    InvalidContrast(String),

    /// A scalar parameter is out of range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A computation produced NaN or an infinity where a finite value is required.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// The run configuration failed to parse or validate.
    #[error("config error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Rendering a plot failed.
    #[error("plot: {0}")]
    Plot(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors that stem from user configuration rather than a failed run.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::InvalidInstance(_)
                | Error::InvalidDistribution(_)
                | Error::InvalidContrast(_)
                | Error::InvalidParameter(_)
                | Error::DimensionMismatch { .. }
                | Error::DegenerateInstance
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
