//! Error types shared across the crate.

use nalgebra::Vector3;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("basis {{g1, g2, [g1,g2]}} is span-deficient at {at:?} (condition number {cond:.3e})")]
    SpanDeficient { at: Vector3<f64>, cond: f64 },
}

#[derive(Debug, Error)]
pub enum WeightError {
    #[error("{name} must be symmetric (|a12 - a21| = {skew:.3e})")]
    NotSymmetric { name: &'static str, skew: f64 },
    #[error("{name} is not positive definite (eigenvalue {eigenvalue:.3e})")]
    NotPositiveDefinite { name: &'static str, eigenvalue: f64 },
}

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("state {x:?} is outside the admissible domain of `{system}`")]
    OutOfDomain { system: String, x: Vector3<f64> },
    #[error("Legendre-Clebsch condition violated: {what} = {value:.3e}")]
    LegendreClebschViolated { what: &'static str, value: f64 },
    #[error("|u1| = {u1:.3e} below the singular-division guard {guard:.3e}")]
    U1NearZero { u1: f64, guard: f64 },
}

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("controller failed at t = {t}: {source}")]
    Controller {
        t: f64,
        #[source]
        source: ControlError,
    },
    #[error("integration left the domain at t = {t}")]
    OutOfDomain { t: f64 },
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("segment starting at t = {t0} has only {len} samples (need at least {min})")]
    GridTooCoarse { t0: f64, len: usize, min: usize },
    #[error("log is empty or lacks the columns required for residual evaluation")]
    EmptyLog,
}
