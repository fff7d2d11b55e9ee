use std::path::PathBuf;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("exponent p = {p} is not subcritical in dimension N = {dimension} (need 1 < p < {bound})")]
    Supercritical { dimension: usize, p: f64, bound: f64 },

    #[error("shooting bracket failed on U(0) in [{lo}, {hi}]: {reason}")]
    BracketFailure { lo: f64, hi: f64, reason: String },

    #[error("ODE residual {achieved:e} exceeds requested tolerance {requested:e}")]
    ToleranceNotMet { achieved: f64, requested: f64 },

    #[error("tail constant did not reach a plateau: {0}")]
    TailNotConverged(String),

    #[error("requested {requested} eigenvalues but the discretization has only {size}")]
    InsufficientGrid { requested: usize, size: usize },

    #[error("logarithm domain violated: {0}")]
    LogDomain(String),

    #[error("critical-point iteration diverged after {iterations} iterations at (r, h) = ({r}, {h})")]
    Divergence { iterations: usize, r: f64, h: f64 },

    #[error("critical-point iteration did not converge in {iterations} iterations (gradient norm {gradient_norm:e})")]
    NoConvergence { iterations: usize, gradient_norm: f64 },

    #[error("configuration rejected: {0}")]
    Configuration(String),

    #[error("profile cache {path}: {reason}")]
    Cache { path: PathBuf, reason: String },

    #[error("profile cache version {found} does not match expected {expected}")]
    CacheVersion { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
