//! Crate-wide error types.

use thiserror::Error;

/// Construction/validation failures for the array, prior and channel types.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid prior: {0}")]
    InvalidPrior(String),
}

/// Failures in the Fisher-information / PCRB computations.
#[derive(Debug, Error)]
pub enum PcrbError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Failures in the semidefinite-program interface.
#[derive(Debug, Error)]
pub enum SdpError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("not Hermitian within 1e-12: max asymmetry {0:.3e}")]
    NotHermitian(f64),
}

/// Failures in the beamforming design pipeline.
#[derive(Debug, Error)]
pub enum BeamError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("scenario infeasible: {0}")]
    Infeasible(String),
    #[error("inner problem returned status {0:?}")]
    SolverStatus(crate::sdp::SdpStatus),
    #[error("rank-one reconstruction certificate failed: {0}")]
    CertificateFailure(String),
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error(transparent)]
    Pcrb(#[from] PcrbError),
}
