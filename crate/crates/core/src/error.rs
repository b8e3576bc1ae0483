use thiserror::Error;

/// Errors raised by the beam propagation and quantity-of-interest engines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GbError {
    #[error("degenerate slowness |p| = {norm:e}")]
    DegenerateSlowness { norm: f64 },

    #[error("stationary phase point at z = {z:?} (|grad phi0| = {norm:e})")]
    StationaryPhasePoint { z: Vec<f64>, norm: f64 },

    #[error("integrator failure at t = {t}: {reason}")]
    IntegratorFailure { t: f64, reason: String },

    #[error("invariant breach at t = {t}: {what} (measured {value:e})")]
    InvariantBreach { t: f64, what: String, value: f64 },

    #[error("beam launched at z = {z:?} failed: {source}")]
    BeamFailure { z: Vec<f64>, source: Box<GbError> },

    #[error("grid too coarse: h = {h} exceeds {limit} (epsilon / 8)")]
    GridTooCoarse { h: f64, limit: f64 },

    #[error("unsupported derivative order p = {p}, alpha = {alpha:?}")]
    UnsupportedOrder { p: usize, alpha: Vec<usize> },

    #[error("unsupported scenario: {0}")]
    UnsupportedScenario(String),

    #[error("validation failure: {assumption} violated at {witness:?} ({detail})")]
    ValidationFailure {
        assumption: String,
        witness: Vec<f64>,
        detail: String,
    },

    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    #[error("stencil out of domain: {0}")]
    StencilOutOfDomain(String),

    #[error("sweep aborted: {failed} of {total} cells failed (first: {first})")]
    SweepAborted {
        failed: usize,
        total: usize,
        first: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, GbError>;
