use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Query beyond the simulated range. `limit` carries the attained
    /// bound (e.g. the clock horizon) so callers can extend and retry.
    #[error("range error: {msg} (limit = {limit})")]
    Range { msg: String, limit: f64 },

    /// A numeric procedure failed to converge or lost all precision.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// The caller violated an API contract (empty sample, short grid, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// The requested law is degenerate for these parameters.
    #[error("degenerate law: {0}")]
    Degenerate(String),

    /// Simulation stopped before the requested time.
    #[error("truncated at t = {achieved_t}: {msg}")]
    Truncated { msg: String, achieved_t: f64 },

    /// Operation not defined for this representation.
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
