use thiserror::Error;

/// Errors shared by every numeric module in the crate.
///
/// Diagnostic payloads are reported in `f64` regardless of the scalar type
/// the computation ran at.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("integrand evaluated to a non-finite value at u = {at}")]
    NonFiniteIntegrand { at: f64 },

    #[error("adaptive quadrature exhausted its budget: requested error {requested}, achieved {achieved} after {evals} evaluations")]
    ToleranceNotMet {
        requested: f64,
        achieved: f64,
        evals: usize,
    },

    #[error("degenerate transition: s = t = {at}")]
    DegenerateTransition { at: f64 },

    #[error("time grid reaches past the admissible horizon: last point {last}, horizon {horizon}")]
    GridBeyondHorizon { last: f64, horizon: f64 },

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("Euler drift blow-up: |drift * dt| = {magnitude} at t = {at}")]
    DriftBlowup { at: f64, magnitude: f64 },

    #[error("Riccati family constant must satisfy C > 0, got {0}")]
    InvalidC(f64),

    #[error("drift identification requires lim alpha(t) = 1 at the horizon, probed {probed}")]
    AlphaLimitNotOne { probed: f64 },

    #[error("derivative unavailable at t = {at}")]
    DerivativeUnavailable { at: f64 },

    #[error("empty sample")]
    EmptySample,

    #[error("bridge specifications disagree on the horizon: {a} vs {b}")]
    HorizonMismatch { a: f64, b: f64 },

    #[error("evaluation point {at} outside the tabulated range [{lo}, {hi}]")]
    OutOfRange { at: f64, lo: f64, hi: f64 },

    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
