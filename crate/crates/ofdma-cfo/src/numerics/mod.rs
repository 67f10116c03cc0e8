//! Deterministic complex-arithmetic foundation: unitary DFT, dense linear
//! solves, Gray-coded QAM mapping and seeded Gaussian sampling.

mod fft;
mod matrix;
mod qam;
mod rng;

pub use fft::{dft, idft};
pub use matrix::{dense_solve, CMatrix, DenseLu};
pub use qam::{qam_demap, qam_map, QamOrder};
pub use rng::{gaussian_noise, RngStream};
