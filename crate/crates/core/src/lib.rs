//! Estimation and inference for matrix-valued time series with time-varying
//! grand mean and row/column main effects (MEFM), alongside the plain matrix
//! factor model (FM).
//!
//! The crate covers the full pipeline:
//!
//! - [`fit`] — mean/effect estimation, double-centering, eigendecomposition-based
//!   loading and factor estimation, FM fitting and the FM→MEFM conversion;
//! - [`rank`] — perturbed eigenvalue-ratio selection of the core ranks;
//! - [`inference`] — variance estimates for the effect estimators, standardized
//!   statistics, rotation matrices for simulation checks, and HAC covariance
//!   estimators for loading rows;
//! - [`fmtest`] — the residual-based test of FM sufficiency against MEFM;
//! - [`dgp`] — the simulation data-generating process with named presets;
//! - [`harness`] — Monte Carlo replication runner and accuracy metrics.
//!
//! All fits are pure functions of their inputs. With the `parallel` feature
//! (default) the replication loops and covariance accumulations run on rayon
//! with a fixed reduction order, so results are bit-identical to the
//! sequential build.

pub mod dgp;
pub mod fit;
pub mod fmtest;
pub mod harness;
pub mod inference;
pub mod linalg;
mod par;
pub mod rank;
pub mod series;

pub use nalgebra::{DMatrix, DVector};

/// Caps the number of worker threads for all parallel regions in this crate.
///
/// Must be called before any parallel work runs; later calls have no effect.
/// A no-op in the sequential build.
#[cfg(feature = "parallel")]
pub fn configure_threads(n: usize) {
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
}

#[cfg(not(feature = "parallel"))]
pub fn configure_threads(_n: usize) {}

/// Errors shared across the estimation, simulation and inference modules.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("rank out of range: {0}")]
    RankOutOfRange(String),
    #[error("matrix is not symmetric within tolerance")]
    NotSymmetric,
    #[error("rank-deficient input: {0}")]
    RankDeficient(String),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("non-stationary AR coefficients: companion spectral radius {0} >= 1")]
    NonStationaryAr(f64),
    #[error("empty sample")]
    EmptySample,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown setting: {0}")]
    UnknownSetting(String),
    #[error("degenerate variance estimate (zero gamma) at index {0}")]
    DegenerateGamma(usize),
    #[error("non-finite value: {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, Error>;
