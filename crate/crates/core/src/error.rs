use thiserror::Error;

use crate::evolve::FieldState;

/// Errors produced by the spectral and evolution routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("similarity map needs t < T (t = {t}, T = {blowup_time})")]
    PastBlowup { t: f64, blowup_time: f64 },

    #[error("series at rho = {rho} did not converge within {terms} terms")]
    SeriesNotConverged { rho: f64, terms: usize },

    #[error("order reduction has a pole at lambda = {lambda} (n = {n})")]
    ReductionPole { lambda: f64, n: i64 },

    #[error("closed-form side of the eigenvalue equation has a pole at lambda = {lambda}")]
    ResidualPole { lambda: f64 },

    #[error("continued fraction denominator vanished at n = {n} (lambda = {lambda})")]
    ContinuedFractionBreakdown { lambda: f64, n: i64 },

    #[error("boundary data at rho = 1 degenerates at lambda = {lambda}")]
    DegenerateBoundary { lambda: f64 },

    #[error("ODE integration failed at rho = {rho}: {reason}")]
    Integration { rho: f64, reason: String },

    #[error("seam mismatch {mismatch:e} at rho = {rho} exceeds accuracy budget")]
    SeamMismatch { rho: f64, mismatch: f64 },

    #[error("non-finite field at t = {}", last_valid.t)]
    BlowupOverflow { last_valid: Box<FieldState> },

    #[error("fit rejected: {0}")]
    FitRejected(String),

    #[error("ill-conditioned design matrix (condition number {0:e})")]
    IllConditioned(f64),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
