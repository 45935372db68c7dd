use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("energy drift {drift:e} exceeds tolerance {tol:e} at t = {time}")]
    EnergyDrift { time: f64, drift: f64, tol: f64 },

    #[error("non-finite state at t = {time}")]
    NonFinite { time: f64 },

    #[error("quadrature error estimate {estimate:e} exceeds tolerance {tol:e}")]
    QuadratureFailure { estimate: f64, tol: f64 },

    #[error("no sign change on shooting bracket [{lo}, {hi}] for (t, x) = ({t}, {x})")]
    BracketFailure { t: f64, x: f64, lo: f64, hi: f64 },

    #[error("orbit leaves q > 0 before t = {t} (min q = {min_q:e})")]
    PositivityViolation { t: f64, min_q: f64 },

    #[error("time step {dt:e} violates CFL bound {bound:e}")]
    CflViolation { dt: f64, bound: f64 },

    #[error("no shock detected before t = {t_max}")]
    NotFound { t_max: f64 },

    #[error("test function support is not covered by the sampled solution")]
    SupportNotCovered,

    #[error("footprint map is not nondecreasing ({count} violations)")]
    NonMonotoneFeet { count: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
