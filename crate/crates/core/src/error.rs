use thiserror::Error;

/// Errors produced by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("state (n = {n:e}, S = {s:e}) is not a steady state: relative residual {residual:e}")]
    NotSteadyState { n: f64, s: f64, residual: f64 },

    #[error("steady state is not stable (Gamma = {gamma:e}, det M = {det:e}); no stationary statistics exist")]
    Unstable { gamma: f64, det: f64 },

    #[error("quadrature did not converge: estimate {estimate:e}, error estimate {error:e} after {evaluations} evaluations")]
    QuadratureNotConverged {
        estimate: f64,
        error: f64,
        evaluations: usize,
    },

    #[error("step size underflow at t = {t:e} (h = {h:e}); problem too stiff for the requested tolerance")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("integration exceeded {max_steps} steps, reached t = {t:e}")]
    TooManySteps { t: f64, max_steps: usize },

    #[error("oscillation fit failed: {0}")]
    FitFailed(String),

    #[error("series of {len} samples is shorter than one segment of {min}; need at least {min} samples for the requested resolution")]
    SegmentTooShort { len: usize, min: usize },

    #[error("invalid stochastic run: {0}")]
    InvalidRun(String),

    #[error("no stable steady state for the given parameters")]
    NoStableState,
}

pub type Result<T> = std::result::Result<T, Error>;
