use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    /// The right-hand side produced a non-finite value at the given component.
    #[error("non-finite value in component {index}")]
    NonFinite { index: usize },

    /// Krylov iteration exhausted its basis budget at the minimum substep.
    #[error("Krylov iteration did not converge (last residual estimate {residual:.3e}, tolerance {tol:.3e})")]
    KrylovConvergence { residual: f64, tol: f64 },

    #[error("inadmissible state at cell ({i}, {j}): {what} = {value:.6e}")]
    Inadmissible {
        i: usize,
        j: usize,
        what: &'static str,
        value: f64,
    },

    /// Adaptive integration required a step below the configured minimum.
    #[error("step size underflow at t = {t:.6e}: h = {h:.3e} < h_min = {h_min:.3e} ({accepted} steps accepted, {rejected} rejected)")]
    StepSizeUnderflow {
        t: f64,
        h: f64,
        h_min: f64,
        accepted: usize,
        rejected: usize,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("reference solutions disagree: {difference:.3e} > {threshold:.3e}")]
    ReferenceDisagreement { difference: f64, threshold: f64 },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}
