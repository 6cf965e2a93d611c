//! Error taxonomy shared by the whole crate.
//!
//! Every failure carries a stable category string so that callers (the CLI in
//! particular) can map errors onto exit codes and machine-readable reports
//! without parsing messages.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Dataset-level invariant violations (non-positive times, non-binary
    /// status values, mismatched column lengths, ...). Messages name the
    /// offending row where one exists.
    #[error("invalid data: {0}")]
    Validation(String),

    /// A referenced column does not exist or has the wrong role.
    #[error("unknown column: {0}")]
    Binding(String),

    /// Formula could not be parsed.
    #[error("formula error: {0}")]
    Formula(String),

    /// A column has the wrong type for the requested operation, e.g. a
    /// continuous stratification variable.
    #[error("type error: {0}")]
    InvalidType(String),

    /// The requested quantity is not identified from the data at hand, e.g.
    /// an empty stratum-by-treatment cell or an evaluation time past the
    /// estimable range of a curve.
    #[error("not estimable: {0}")]
    Estimability(String),

    /// Estimated treatment probabilities are numerically zero for some rows.
    #[error("positivity violation for rows {rows:?}: {message}")]
    Positivity { message: String, rows: Vec<usize> },

    /// An iterative fit did not converge.
    #[error("did not converge: {0}")]
    Convergence(String),

    /// Rank-deficient or otherwise unsolvable linear system; names the
    /// design column at the failing pivot.
    #[error("singular system at column '{column}': {message}")]
    LinearAlgebra { message: String, column: String },

    /// The combination of method and requested output is unsupported, e.g.
    /// analytic confidence intervals for a method that has none.
    #[error("not supported: {0}")]
    Capability(String),

    /// An argument lies outside its valid range.
    #[error("out of range: {0}")]
    Range(String),

    /// Input that makes the estimand collapse (no events, a single
    /// treatment level, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Too many bootstrap replicates failed for the resampling distribution
    /// to be trustworthy.
    #[error("unstable bootstrap: {0}")]
    Instability(String),

    /// Invalid configuration or usage (reserved for front ends).
    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    /// Stable category identifier for reports and exit-code mapping.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Validation(_) => "validation",
            Error::Binding(_) => "binding",
            Error::Formula(_) => "formula",
            Error::InvalidType(_) => "type",
            Error::Estimability(_) => "estimability",
            Error::Positivity { .. } => "positivity",
            Error::Convergence(_) => "convergence",
            Error::LinearAlgebra { .. } => "linear_algebra",
            Error::Capability(_) => "capability",
            Error::Range(_) => "range",
            Error::Degenerate(_) => "degenerate",
            Error::Instability(_) => "instability",
            Error::Config(_) => "config",
        }
    }

    /// True for errors caused by how the run was set up rather than by the
    /// data or the estimation itself.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Binding(_) | Error::Formula(_) | Error::Config(_)
        )
    }
}
