//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by distribution constructors, posterior updates, racing,
/// SMC, and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A distribution or algorithm parameter is outside its legal range
    /// (e.g. a non-positive rate, a confidence level outside (0, 1)).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An observation or mean vector lies outside the support of the family
    /// it was used with (e.g. a Bernoulli reward of 0.5).
    #[error("domain error: {0}")]
    Domain(String),

    /// Two paired inputs disagree in length.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// A posterior built from an improper prior was sampled before its first
    /// observation, so it does not yet integrate to one.
    #[error("posterior for arm {arm} is improper until its first observation")]
    ImproperPosterior { arm: usize },

    /// Every weight in a categorical draw is zero (or every log-weight is
    /// negative infinity), so no normalized distribution exists.
    #[error("degenerate weights: {0}")]
    DegenerateWeights(String),

    /// Rejection sampling from a truncated distribution accepted nothing in
    /// a large probe, indicating the truncation region has negligible mass.
    #[error(
        "truncated sampler accepted {accepted} of {proposed} proposals; \
         acceptance below {min_acceptance:e}"
    )]
    TruncationTooSevere {
        accepted: u64,
        proposed: u64,
        min_acceptance: f64,
    },

    /// A covariance matrix is not symmetric positive definite.
    #[error("covariance matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    /// An experiment configuration could not be parsed or validated.
    #[error("config error: {0}")]
    Config(String),

    /// Filesystem failure while reading a config or writing results.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// JSON encoding failure while rendering results or metadata.
    #[error("serialization error: {0}")]
    Serialize(#[from] serde_json::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
