//! Shared helpers for the integration suites: an explicit matrix-product
//! oracle for the interference matrix, random quasi-banded test systems,
//! and path helpers for the committed scenario files.
#![allow(dead_code)] // each test binary uses a different subset

use num_complex::Complex64;
use ofdma_cfo::channel::CfoSet;
use ofdma_cfo::numerics::{CMatrix, RngStream};
use ofdma_cfo::receiver::{extract_quasi_banded, make_window};
use ofdma_cfo::waveform::{Allocation, OfdmaConfig};
use rand::Rng;
use std::path::PathBuf;

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

/// Dense DFT matrix with unitary scaling: `[F]_{n,k} = e^{-j2pi nk/N}/sqrt(N)`.
pub fn dft_matrix(n: usize) -> CMatrix {
    let mut f = CMatrix::zeros(n, n);
    let scale = 1.0 / (n as f64).sqrt();
    for row in 0..n {
        for col in 0..n {
            let angle = -2.0 * std::f64::consts::PI * (row * col) as f64 / n as f64;
            f[(row, col)] = Complex64::from_polar(scale, angle);
        }
    }
    f
}

pub fn adjoint(m: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(m.cols(), m.rows());
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            out[(j, i)] = m[(i, j)].conj();
        }
    }
    out
}

/// Explicit-materialization oracle for the interference matrix: builds the
/// receive-block extension, window, CFO ramp and per-user projections as
/// actual matrices and multiplies them out.
pub fn interference_matrix_oracle(
    cfos: &CfoSet,
    alloc: &Allocation,
    cfg: &OfdmaConfig,
    windowed: bool,
) -> CMatrix {
    let n = cfg.n;
    let half = if windowed { cfg.n_w / 2 } else { 0 };
    let ext_len = n + 2 * half;

    // Extension matrix: [last `half` rows of I; I; first `half` rows of I].
    let mut ext = CMatrix::zeros(ext_len, n);
    for r in 0..half {
        ext[(r, n - half + r)] = Complex64::new(1.0, 0.0);
    }
    for r in 0..n {
        ext[(half + r, r)] = Complex64::new(1.0, 0.0);
    }
    for r in 0..half {
        ext[(half + n + r, r)] = Complex64::new(1.0, 0.0);
    }

    let mut weights = CMatrix::zeros(ext_len, ext_len);
    if windowed {
        let win = make_window(n, cfg.n_w).unwrap();
        for (i, &w) in win.taps().iter().enumerate() {
            weights[(i, i)] = Complex64::new(w, 0.0);
        }
    } else {
        weights = CMatrix::identity(ext_len);
    }

    let f = dft_matrix(n);
    let f_h = adjoint(&f);
    let ext_t = adjoint(&ext); // real entries, transpose == adjoint

    let mut lambda = CMatrix::zeros(n, n);
    for user in 0..alloc.users() {
        let mut ramp = CMatrix::zeros(ext_len, ext_len);
        for m in 0..ext_len {
            ramp[(m, m)] = Complex64::from_polar(
                1.0,
                2.0 * std::f64::consts::PI * cfos.0[user] * m as f64 / n as f64,
            );
        }
        let mut projector = CMatrix::zeros(n, n);
        for &bin in alloc.set(user) {
            projector[(bin, bin)] = Complex64::new(1.0, 0.0);
        }
        let product = f
            .mul_mat(&ext_t)
            .mul_mat(&weights)
            .mul_mat(&ramp)
            .mul_mat(&ext)
            .mul_mat(&f_h)
            .mul_mat(&projector);
        for i in 0..n {
            for j in 0..n {
                lambda[(i, j)] += product[(i, j)];
            }
        }
    }
    lambda
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    let mut max = 0.0f64;
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            max = max.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    max
}

/// Fraction of the squared Frobenius norm outside the quasi-banded mask.
pub fn off_band_rel_energy(mat: &CMatrix, d: usize) -> f64 {
    let rec = extract_quasi_banded(mat, d).unwrap().to_dense();
    let mut off = 0.0;
    let mut total = 0.0;
    for i in 0..mat.rows() {
        for j in 0..mat.cols() {
            total += mat[(i, j)].norm_sqr();
            off += (mat[(i, j)] - rec[(i, j)]).norm_sqr();
        }
    }
    off / total
}

/// Seeded diagonally dominant quasi-banded dense matrix.
pub fn random_quasi_banded_dense(n: usize, d: usize, seed: u64) -> CMatrix {
    let mut rng = RngStream::new(seed, 70).rng();
    let mut dense = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i.abs_diff(j) <= d || i.abs_diff(j) >= n - d {
                dense[(i, j)] =
                    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            }
        }
    }
    for i in 0..n {
        let row_sum: f64 = (0..n)
            .filter(|&j| j != i)
            .map(|j| dense[(i, j)].norm())
            .sum();
        dense[(i, i)] = Complex64::new(row_sum + 1.0, 0.0);
    }
    dense
}

pub fn random_rhs(n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = RngStream::new(seed, 71).rng();
    (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

pub fn relative_deviation(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    num / den.max(1e-300)
}
