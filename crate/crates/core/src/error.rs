//! Error type shared by every module of the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    Param(String),

    /// Input is well-formed but mathematically unusable (zero energy, singular matrix, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A curtain feasibility inequality is violated.
    #[error("curtain infeasible: {0}")]
    Curtain(#[from] CurtainViolation),

    /// A sequence could not be classified as a delta or a chirp.
    #[error("classification failed: {0}")]
    Classification(String),

    /// The solver produced a non-finite objective.
    #[error("solver diverged at iteration {iteration}: {detail}")]
    Diverged { iteration: usize, detail: String },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Which curtain or curtain-set inequality failed.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CurtainViolation {
    #[error("parity: [xi*N - q] mod 2 = [{xi}*{n} - ({q})] mod 2 = 1, need 0")]
    Parity { n: usize, xi: i64, q: i64 },

    #[error("zone size: |xi|*tau_max + omega_max = {lhs} must be < N = {n}")]
    ZoneSize { lhs: u64, n: usize },

    #[error("extension: tau_max = {tau_max} must be <= tau_ext = {tau_ext}")]
    ExtensionShort { tau_max: usize, tau_ext: usize },

    #[error("extension: tau_ext = {tau_ext} violates {rule} (bound {bound})")]
    ExtensionLong { tau_ext: usize, bound: usize, rule: &'static str },

    #[error("coprimality: |xi_a - xi_b| = |{xi_a} - ({xi_b})| shares factor {gcd} with N = {n}")]
    NotCoprime { xi_a: i64, xi_b: i64, gcd: u64, n: usize },

    #[error("parity mix: q = {qa} and q = {qb} have different parity")]
    ParityMix { qa: i64, qb: i64 },

    #[error("gap: half-gap d = {d} between q = {qa} and q = {qb} must exceed |xi|*tau_max + omega_max = {bound}")]
    GapTooSmall { qa: i64, qb: i64, d: u64, bound: u64 },

    #[error("zero-CAF sets share one slope, got xi = {xi_a} and xi = {xi_b}")]
    SlopeMismatch { xi_a: i64, xi_b: i64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Param(msg.into()))
}
