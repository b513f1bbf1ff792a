//! Quantum instrument gate set tomography: experiment design, simulation,
//! reconstruction, and error metrics for gate sets that contain mid-circuit
//! measurements.
//!
//! A mid-circuit measurement is modelled by a *quantum instrument*: one
//! completely positive map per classical outcome, summing to a trace
//! preserving map. This crate represents all operations in the Pauli
//! transfer matrix picture, generates the fiducial-sandwich experiment
//! design that makes the instrument tomographable alongside the gates,
//! simulates datasets (optionally with outcome- and position-dependent
//! post-measurement errors), reconstructs the gate set by linear inversion
//! and maximum likelihood, and scores estimates with diamond distance,
//! readout fidelities, TVD, and likelihood-ratio model violation.

pub mod design;
pub mod estimate;
pub mod gauge;
pub mod gateset;
pub mod linalg;
pub mod metrics;
pub mod mle;
pub mod models;
pub mod opt;
pub mod ptm;
pub mod reference;
pub mod sdp;
pub mod simulate;
pub mod stark;

use thiserror::Error;

/// Errors produced by validation, reconstruction, and numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("unknown operation label: {0}")]
    UnknownLabel(String),
    #[error("informationally incomplete: {0}")]
    RankDeficient(String),
    #[error("missing data: {0}")]
    MissingData(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by bad inputs rather than numerical breakdown.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Numerical(_))
    }
}
