//! Uplink OFDMA simulation with raised-cosine receiver windowing and
//! quasi-banded interference-matrix CFO compensation.
//!
//! The library models the uplink of an OFDMA system in which every user
//! arrives at the base station with its own carrier frequency offset (CFO).
//! The CFOs break subcarrier orthogonality and couple all subcarriers
//! through an N x N interference matrix. Applying a raised-cosine window
//! (with time-domain aliasing) at the receiver concentrates that coupling
//! around the diagonal, so the matrix can be approximated by a quasi-banded
//! one (a band plus two wrap-around corner blocks) and solved in O(N*D^2)
//! by a banded LU factorization with a low-rank corner correction.
//!
//! Module map:
//! - [`numerics`]: unitary radix-2 DFT, dense complex solve, Gray-coded QAM,
//!   seeded Gaussian noise.
//! - [`waveform`]: per-user transmitter chain (allocation, subcarrier
//!   mapping, IDFT, cyclic extension).
//! - [`channel`]: multipath Rayleigh channels, CFO ramps, uplink
//!   superposition.
//! - [`receiver`]: windowing, aliasing, interference-matrix construction,
//!   quasi-banded extraction.
//! - [`solver`]: banded LU + low-rank corner correction, direct ZF and
//!   CG-MMSE baselines, complexity accounting.
//! - [`detection`]: composite-channel equalization, hard decisions, BER and
//!   SINR statistics.
//! - [`scenario`] / [`harness`]: experiment configuration, Monte-Carlo
//!   orchestration and CSV/heatmap outputs.

pub mod channel;
pub mod detection;
pub mod harness;
pub mod numerics;
pub mod receiver;
pub mod scenario;
pub mod solver;
pub mod waveform;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("transform length {0} is not a power of two")]
    FftSize(usize),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is numerically singular (pivot {pivot:.3e} at step {step})")]
    Singular { step: usize, pivot: f64 },

    #[error(
        "quasi-banded factorization hit a near-zero pivot {pivot:.3e} at step {step}; \
         fall back to a dense solve"
    )]
    NearSingular { step: usize, pivot: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
