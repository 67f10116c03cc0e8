//! Receiver-side processing: guard removal, raised-cosine windowing with
//! time-domain aliasing, interference-matrix construction and quasi-banded
//! extraction.
//!
//! The windowed receive path keeps `N + N_w` samples, weights them with the
//! raised-cosine taper and folds the `N_w/2` excess samples of each end onto
//! the opposite end before the N-point DFT. The taper's two ramps are
//! complementary (`w[k] + w[k+N] == 1`), so at zero CFO the fold
//! reconstructs the core symbol exactly and the interference matrix is the
//! identity.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::{cfo_ramp, CfoSet};
use crate::numerics::{dft, idft, CMatrix};
use crate::waveform::{Allocation, OfdmaConfig};
use crate::{Error, Result};

/// Discrete raised-cosine receiver window of length `n + n_w`.
#[derive(Debug, Clone)]
pub struct ReceiverWindow {
    n: usize,
    n_w: usize,
    taps: Vec<f64>,
}

impl ReceiverWindow {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_w(&self) -> usize {
        self.n_w
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    #[cfg(test)]
    pub(crate) fn from_taps(n: usize, n_w: usize, taps: Vec<f64>) -> Self {
        assert_eq!(taps.len(), n + n_w);
        ReceiverWindow { n, n_w, taps }
    }
}

/// Builds the discrete raised-cosine window.
///
/// The ramp samples sit at half-sample offsets,
/// `w[k] = 0.5 (1 - cos(pi (k + 0.5) / n_w))` for `k < n_w`, which makes the
/// complementarity `w[k] + w[k+n] == 1` exact without special-casing the
/// endpoints; the window is flat at one on `[n_w, n)` and mirrored on
/// `[n, n + n_w)`.
pub fn make_window(n: usize, n_w: usize) -> Result<ReceiverWindow> {
    if n_w == 0 || n_w % 2 != 0 || n_w >= n {
        return Err(Error::InvalidParameter(format!(
            "window length {n_w} must be even, positive and smaller than n = {n}"
        )));
    }
    let mut taps = vec![1.0; n + n_w];
    for k in 0..n_w {
        let ramp = 0.5 * (1.0 - (std::f64::consts::PI * (k as f64 + 0.5) / n_w as f64).cos());
        taps[k] = ramp;
        taps[n + n_w - 1 - k] = ramp;
    }
    Ok(ReceiverWindow { n, n_w, taps })
}

/// Closed-form magnitude spectrum of the raised-cosine window at normalized
/// frequency `f` (cycles per sample): returns `(|G(f)|, |C(f)|)` with
/// `|C(f)| = |cos(pi f T_w) / (1 - 4 f^2 T_w^2)|` and
/// `|G(f)| = T_fft |sinc(f T_fft)| * |C(f)|`, `T_fft = n`, `T_w = n_w`.
/// The removable singularity at `f = 1/(2 T_w)` evaluates to pi/4.
pub fn window_spectrum(n: usize, n_w: usize, f: f64) -> (f64, f64) {
    let x = f * n_w as f64;
    let denom = 1.0 - 4.0 * x * x;
    let c = if denom.abs() < 1e-9 {
        std::f64::consts::FRAC_PI_4
    } else {
        ((std::f64::consts::PI * x).cos() / denom).abs()
    };
    let g = n as f64 * sinc(f * n as f64).abs() * c;
    (g, c)
}

fn sinc(y: f64) -> f64 {
    if y.abs() < 1e-12 {
        1.0
    } else {
        (std::f64::consts::PI * y).sin() / (std::f64::consts::PI * y)
    }
}

/// Band half-width D = floor(1.1 N / N_w): the window spectrum has dropped
/// below -12 dB past 1.1/T_w, so interference beyond D subcarriers is
/// negligible. Computed in integer arithmetic (11 N / 10 N_w).
pub fn default_band_halfwidth(n: usize, n_w: usize) -> usize {
    assert!(n_w > 0, "band half-width undefined for n_w = 0");
    (11 * n) / (10 * n_w)
}

/// Drops the first `n_gi = n_t - (n + n_w)` samples of the extended symbol,
/// leaving the `n + n_w` samples the window operates on.
pub fn remove_gi(extended: &[Complex64], cfg: &OfdmaConfig) -> Result<Vec<Complex64>> {
    if extended.len() != cfg.total_len() {
        return Err(Error::Dimension(format!(
            "expected {} received samples, got {}",
            cfg.total_len(),
            extended.len()
        )));
    }
    Ok(extended[cfg.guard_len()..].to_vec())
}

/// Applies the window and folds the excess samples: the weighted head
/// (`n_w/2` samples) adds onto the tail of the core block and the weighted
/// tail onto its head, yielding the N-point vector the DFT sees.
pub fn window_and_alias(block: &[Complex64], win: &ReceiverWindow) -> Result<Vec<Complex64>> {
    let n = win.n;
    let half = win.n_w / 2;
    if block.len() != n + win.n_w {
        return Err(Error::Dimension(format!(
            "window expects {} samples, got {}",
            n + win.n_w,
            block.len()
        )));
    }
    let w = &win.taps;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        out.push(w[half + i] * block[half + i]);
    }
    for i in 0..half {
        // Head excess folds onto the tail, tail excess onto the head.
        out[n - half + i] += w[i] * block[i];
        out[i] += w[n + half + i] * block[n + half + i];
    }
    Ok(out)
}

/// N-point unitary DFT of the windowed block.
pub fn receiver_dft(block: &[Complex64]) -> Result<Vec<Complex64>> {
    dft(block, false)
}

/// Full windowed receive chain: guard removal, window + alias, DFT.
pub fn receive_windowed(
    extended: &[Complex64],
    cfg: &OfdmaConfig,
    win: &ReceiverWindow,
) -> Result<Vec<Complex64>> {
    let block = remove_gi(extended, cfg)?;
    let folded = window_and_alias(&block, win)?;
    receiver_dft(&folded)
}

/// Conventional rectangular receive chain: drop the cyclic prefix, take the
/// N core samples (the trailing suffix is discarded), DFT.
pub fn receive_plain(extended: &[Complex64], cfg: &OfdmaConfig) -> Result<Vec<Complex64>> {
    if extended.len() != cfg.total_len() {
        return Err(Error::Dimension(format!(
            "expected {} received samples, got {}",
            cfg.total_len(),
            extended.len()
        )));
    }
    receiver_dft(&extended[cfg.n_cp..cfg.n_cp + cfg.n])
}

/// Cyclic extension by `half` samples on each side:
/// `[last half | s | first half]`. Realizes the windowed receive block's
/// selection structure through index arithmetic.
pub(crate) fn extend_half_window(time: &[Complex64], half: usize) -> Vec<Complex64> {
    let n = time.len();
    let mut out = Vec::with_capacity(n + 2 * half);
    out.extend_from_slice(&time[n - half..]);
    out.extend_from_slice(time);
    out.extend_from_slice(&time[..half]);
    out
}

/// Dense N x N map from composite frequency-domain data to DFT outputs under
/// all users' CFOs.
#[derive(Debug, Clone)]
pub struct InterferenceMatrix {
    pub mat: CMatrix,
    pub windowed: bool,
}

impl InterferenceMatrix {
    pub fn n(&self) -> usize {
        self.mat.rows()
    }
}

/// Builds the interference matrix column by column: for each user and each
/// of its subcarriers, the unit frequency-domain vector runs through the
/// synthesis IDFT, the cyclic receive-block extension, that user's CFO ramp
/// and the window/alias fold, then the DFT. Columns of unassigned (guard)
/// subcarriers stay zero. With `windowed = false` the chain degenerates to
/// the rectangular N-sample receiver.
pub fn build_interference_matrix(
    cfos: &CfoSet,
    alloc: &Allocation,
    cfg: &OfdmaConfig,
    windowed: bool,
) -> Result<InterferenceMatrix> {
    if cfos.len() != alloc.users() {
        return Err(Error::Dimension(format!(
            "{} CFOs for {} users",
            cfos.len(),
            alloc.users()
        )));
    }
    let n = cfg.n;
    let window = if windowed {
        Some(make_window(n, cfg.n_w)?)
    } else {
        None
    };
    let half = if windowed { cfg.n_w / 2 } else { 0 };
    let ramp_len = n + 2 * half;
    let ramps: Vec<Vec<Complex64>> = cfos.0.iter().map(|&e| cfo_ramp(e, ramp_len, n)).collect();

    let jobs: Vec<(usize, usize)> = (0..alloc.users())
        .flat_map(|u| alloc.set(u).iter().map(move |&bin| (u, bin)))
        .collect();
    let columns: Vec<(usize, Vec<Complex64>)> = jobs
        .par_iter()
        .map(|&(user, bin)| {
            let mut unit = vec![Complex64::ZERO; n];
            unit[bin] = Complex64::new(1.0, 0.0);
            let time = idft(&unit)?;
            let ramped: Vec<Complex64> = if half > 0 {
                extend_half_window(&time, half)
                    .iter()
                    .zip(&ramps[user])
                    .map(|(s, r)| s * r)
                    .collect()
            } else {
                time.iter().zip(&ramps[user]).map(|(s, r)| s * r).collect()
            };
            let folded = match &window {
                Some(win) => window_and_alias(&ramped, win)?,
                None => ramped,
            };
            Ok((bin, dft(&folded, false)?))
        })
        .collect::<Result<_>>()?;

    let mut mat = CMatrix::zeros(n, n);
    for (bin, col) in columns {
        mat.set_column(bin, &col);
    }
    Ok(InterferenceMatrix { mat, windowed })
}

/// Quasi-banded storage: a (2D+1)-diagonal band around the main diagonal
/// plus the top-right / bottom-left wrap-around corner blocks
/// (`|m - n| >= N - D`). Everything else is structurally zero.
#[derive(Debug, Clone)]
pub struct QuasiBanded {
    n: usize,
    d: usize,
    /// Row-compact band: entry `(i, j)` with `|i - j| <= d` lives at
    /// `band[i * (2d + 1) + d + j - i]`.
    band: Vec<Complex64>,
    /// `corner_tr[(r, c)] = A[r, n - d + c]` for `c >= r`, zero otherwise.
    corner_tr: CMatrix,
    /// `corner_bl[(r, c)] = A[n - d + r, c]` for `r >= c`, zero otherwise.
    corner_bl: CMatrix,
}

impl QuasiBanded {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn halfwidth(&self) -> usize {
        self.d
    }

    /// Band entry (i, j); zero outside the band.
    pub fn band_get(&self, i: usize, j: usize) -> Complex64 {
        if i.abs_diff(j) <= self.d {
            self.band_slot(i, j)
        } else {
            Complex64::ZERO
        }
    }

    pub(crate) fn band_slot(&self, i: usize, j: usize) -> Complex64 {
        self.band[i * (2 * self.d + 1) + (self.d + j) - i]
    }

    pub fn corner_tr(&self) -> &CMatrix {
        &self.corner_tr
    }

    pub fn corner_bl(&self) -> &CMatrix {
        &self.corner_bl
    }

    pub fn has_corners(&self) -> bool {
        self.corner_tr.max_abs() > 0.0 || self.corner_bl.max_abs() > 0.0
    }

    /// Dense band part (corners excluded).
    pub fn band_to_dense(&self) -> CMatrix {
        let mut out = CMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in i.saturating_sub(self.d)..(i + self.d + 1).min(self.n) {
                out[(i, j)] = self.band_slot(i, j);
            }
        }
        out
    }

    /// Dense reconstruction of the retained entries (band plus corners).
    pub fn to_dense(&self) -> CMatrix {
        let mut out = self.band_to_dense();
        let d = self.d;
        for r in 0..d {
            for c in 0..d {
                if c >= r {
                    out[(r, self.n - d + c)] = self.corner_tr[(r, c)];
                }
                if r >= c {
                    out[(self.n - d + r, c)] = self.corner_bl[(r, c)];
                }
            }
        }
        out
    }
}

/// Copies the retained entries of a dense matrix: band `|m - n| <= D` plus
/// the wrap-around corners `|m - n| >= N - D`.
pub fn extract_quasi_banded(mat: &CMatrix, d: usize) -> Result<QuasiBanded> {
    extract(mat, d, true)
}

/// Band-only variant (corners left empty), the approximation used without
/// receiver windowing as the banded baseline.
pub fn extract_banded(mat: &CMatrix, d: usize) -> Result<QuasiBanded> {
    extract(mat, d, false)
}

fn extract(mat: &CMatrix, d: usize, with_corners: bool) -> Result<QuasiBanded> {
    let n = mat.rows();
    if mat.cols() != n {
        return Err(Error::Dimension(format!(
            "quasi-banded extraction needs a square matrix, got {}x{}",
            n,
            mat.cols()
        )));
    }
    if d == 0 || d >= n.div_ceil(2) {
        return Err(Error::InvalidParameter(format!(
            "band half-width {d} out of range for n = {n} (need 1 <= D < N/2)"
        )));
    }
    let width = 2 * d + 1;
    let mut band = vec![Complex64::ZERO; n * width];
    for i in 0..n {
        for j in i.saturating_sub(d)..(i + d + 1).min(n) {
            band[i * width + (d + j) - i] = mat[(i, j)];
        }
    }
    let mut corner_tr = CMatrix::zeros(d, d);
    let mut corner_bl = CMatrix::zeros(d, d);
    if with_corners {
        for r in 0..d {
            for c in 0..d {
                if c >= r {
                    corner_tr[(r, c)] = mat[(r, n - d + c)];
                }
                if r >= c {
                    corner_bl[(r, c)] = mat[(n - d + r, c)];
                }
            }
        }
    }
    Ok(QuasiBanded {
        n,
        d,
        band,
        corner_tr,
        corner_bl,
    })
}

/// Entry-wise interference power in dB, `20 log10 |A_mn|`, floored at
/// -100 dB so zeros stay plottable.
pub fn interference_power_map(mat: &CMatrix) -> Vec<Vec<f64>> {
    (0..mat.rows())
        .map(|i| {
            mat.row(i)
                .iter()
                .map(|z| {
                    let mag = z.norm();
                    if mag == 0.0 {
                        -100.0
                    } else {
                        (20.0 * mag.log10()).max(-100.0)
                    }
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;
    use crate::waveform::AllocationScheme;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_vec(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = RngStream::new(seed, 50).rng();
        (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn window_formula_small_case() {
        let win = make_window(8, 2).unwrap();
        let w = win.taps();
        let expect0 = 0.5 * (1.0 - (std::f64::consts::PI / 4.0).cos());
        let expect1 = 0.5 * (1.0 - (3.0 * std::f64::consts::PI / 4.0).cos());
        assert!((w[0] - expect0).abs() < 1e-15);
        assert!((w[1] - expect1).abs() < 1e-15);
        for &t in &w[2..8] {
            assert_eq!(t, 1.0);
        }
        assert!((w[0] + w[8] - 1.0).abs() < 1e-15);
        assert!((w[1] + w[9] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn window_invariants() {
        for (n, n_w) in [(8, 2), (32, 8), (128, 14), (512, 56)] {
            let win = make_window(n, n_w).unwrap();
            let w = win.taps();
            for k in 0..n_w {
                assert!((w[k] + w[k + n] - 1.0).abs() < 1e-15, "complementarity at {k}");
            }
            for k in n_w..n {
                assert_eq!(w[k], 1.0, "flat region at {k}");
            }
            for k in 0..n + n_w {
                assert!((w[k] - w[n + n_w - 1 - k]).abs() < 1e-15, "symmetry at {k}");
            }
        }
    }

    #[test]
    fn window_rejects_bad_lengths() {
        assert!(make_window(8, 0).is_err());
        assert!(make_window(8, 3).is_err());
        assert!(make_window(8, 8).is_err());
    }

    #[test]
    fn spectrum_dc_values() {
        let (g, c) = window_spectrum(64, 8, 0.0);
        assert!((c - 1.0).abs() < 1e-15);
        assert!((g - 64.0).abs() < 1e-12);
    }

    #[test]
    fn spectrum_singularity_limit() {
        let n_w = 14usize;
        let (_, c) = window_spectrum(128, n_w, 1.0 / (2.0 * n_w as f64));
        assert!((c - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn side_lobes_below_minus_12_db() {
        let n_w = 14usize;
        let t_w = n_w as f64;
        let mut max_db = f64::NEG_INFINITY;
        for i in 1..=2000 {
            let x = 1.1 + (10.0 - 1.1) * i as f64 / 2000.0;
            let (_, c) = window_spectrum(128, n_w, x / t_w);
            max_db = max_db.max(20.0 * c.log10());
        }
        assert!(max_db < -12.0, "max side lobe {max_db} dB");
    }

    #[test]
    fn band_halfwidth_examples() {
        assert_eq!(default_band_halfwidth(128, 14), 10);
        assert_eq!(default_band_halfwidth(32, 8), 4);
        assert_eq!(default_band_halfwidth(512, 56), 10);
    }

    #[test]
    fn remove_gi_bookkeeping() {
        let cfg = OfdmaConfig::new(128, 4, 32, 7, 14).unwrap();
        let r = random_vec(cfg.total_len(), 3);
        let kept = remove_gi(&r, &cfg).unwrap();
        assert_eq!(kept.len(), 128 + 14);
        assert_eq!(kept[0], r[cfg.guard_len()]);
        assert!(remove_gi(&r[1..], &cfg).is_err());

        // n_gi = 0 when the prefix only covers the left window excess.
        let cfg0 = OfdmaConfig::new(8, 2, 2, 2, 4).unwrap();
        assert_eq!(cfg0.guard_len(), 0);
        let r0 = random_vec(cfg0.total_len(), 4);
        assert_eq!(remove_gi(&r0, &cfg0).unwrap(), r0);
    }

    #[test]
    fn rectangular_taps_select_core_block() {
        let n = 8;
        let n_w = 4;
        let mut taps = vec![0.0; n + n_w];
        for t in taps.iter_mut().take(n + n_w / 2).skip(n_w / 2) {
            *t = 1.0;
        }
        let win = ReceiverWindow::from_taps(n, n_w, taps);
        let r = random_vec(n + n_w, 5);
        let out = window_and_alias(&r, &win).unwrap();
        assert_eq!(out, r[n_w / 2..n_w / 2 + n].to_vec());
    }

    #[test]
    fn zero_cfo_fold_reconstructs_symbol() {
        for (n, n_w) in [(16, 4), (64, 8), (128, 14)] {
            let win = make_window(n, n_w).unwrap();
            let s = random_vec(n, n as u64);
            let out = window_and_alias(&extend_half_window(&s, n_w / 2), &win).unwrap();
            for i in 0..n {
                assert!((out[i] - s[i]).norm() < 1e-12, "bin {i}");
            }
        }
    }

    #[test]
    fn build_identity_at_zero_cfo() {
        let cfg = OfdmaConfig::new(32, 4, 8, 4, 8).unwrap();
        let alloc = Allocation::build(
            AllocationScheme::Generalized,
            &cfg,
            &cfg.all_bins(),
            &RngStream::new(2, 0),
        )
        .unwrap();
        let lambda =
            build_interference_matrix(&CfoSet::zeros(4), &alloc, &cfg, true).unwrap();
        let mut max_dev: f64 = 0.0;
        for i in 0..32 {
            for j in 0..32 {
                let expected = if i == j {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::ZERO
                };
                max_dev = max_dev.max((lambda.mat[(i, j)] - expected).norm());
            }
        }
        assert!(max_dev < 1e-12, "max deviation {max_dev}");
    }

    #[test]
    fn unwindowed_single_user_matches_dirichlet_kernel() {
        // Closed-form circulant kernel for one user with CFO eps:
        // A[m,k] = (1/N) e^{j pi (eps+k-m)(N-1)/N} sin(pi(eps+k-m)) / sin(pi(eps+k-m)/N)
        let n = 16usize;
        let eps = 0.37;
        let cfg = OfdmaConfig::new(n, 1, 4, 2, 4).unwrap();
        let alloc = Allocation::build(
            AllocationScheme::Blocked,
            &cfg,
            &cfg.all_bins(),
            &RngStream::new(0, 0),
        )
        .unwrap();
        let lambda =
            build_interference_matrix(&CfoSet::new(vec![eps]), &alloc, &cfg, false).unwrap();
        for m in 0..n {
            for k in 0..n {
                let q = eps + k as f64 - m as f64;
                let phase = std::f64::consts::PI * q * (n as f64 - 1.0) / n as f64;
                let ratio = (std::f64::consts::PI * q).sin()
                    / (n as f64 * (std::f64::consts::PI * q / n as f64).sin());
                let expected = Complex64::from_polar(ratio, phase);
                assert!(
                    (lambda.mat[(m, k)] - expected).norm() < 1e-12,
                    "entry ({m},{k})"
                );
            }
        }
    }

    #[test]
    fn extraction_masks_exactly() {
        let n = 12usize;
        let mut mat = CMatrix::zeros(n, n);
        let mut rng = RngStream::new(8, 0).rng();
        for i in 0..n {
            for j in 0..n {
                mat[(i, j)] =
                    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            }
        }
        let d = 3;
        let qb = extract_quasi_banded(&mat, d).unwrap();
        let dense = qb.to_dense();
        let mut masked = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i.abs_diff(j) <= d || i.abs_diff(j) >= n - d {
                    masked[(i, j)] = mat[(i, j)];
                }
            }
        }
        assert_eq!(dense, masked, "reconstruction must be bit-equal");

        // Orthogonal decomposition of the Frobenius norm.
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                off += (mat[(i, j)] - dense[(i, j)]).norm_sqr();
            }
        }
        let total = mat.frobenius_norm().powi(2);
        let kept = dense.frobenius_norm().powi(2);
        assert!((total - kept - off).abs() < 1e-12 * total);

        let banded = extract_banded(&mat, d).unwrap();
        assert!(!banded.has_corners());
        assert!(extract_quasi_banded(&mat, 0).is_err());
        assert!(extract_quasi_banded(&mat, 6).is_err());
    }

    #[test]
    fn diagonal_only_extraction_of_identity() {
        let eye = CMatrix::identity(8);
        let qb = extract_quasi_banded(&eye, 1).unwrap();
        assert!(!qb.has_corners());
        assert_eq!(qb.to_dense(), eye);
    }

    #[test]
    fn power_map_of_identity() {
        let eye = CMatrix::identity(4);
        let map = interference_power_map(&eye);
        for (i, row) in map.iter().enumerate() {
            for (j, &db) in row.iter().enumerate() {
                if i == j {
                    assert!(db.abs() < 1e-12);
                } else {
                    assert_eq!(db, -100.0);
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn fold_never_amplifies(seed in 0u64..500) {
            let win = make_window(32, 8).unwrap();
            let r = random_vec(40, seed);
            let out = window_and_alias(&r, &win).unwrap();
            let in_norm: f64 = r.iter().map(|z| z.norm_sqr()).sum();
            let out_norm: f64 = out.iter().map(|z| z.norm_sqr()).sum();
            prop_assert!(out_norm <= in_norm + 1e-12);
        }

        #[test]
        fn zero_cfo_identity_property(seed in 0u64..200) {
            let n = 64usize;
            let n_w = 8usize;
            let win = make_window(n, n_w).unwrap();
            let s = random_vec(n, seed);
            let out = window_and_alias(&extend_half_window(&s, n_w / 2), &win).unwrap();
            for i in 0..n {
                prop_assert!((out[i] - s[i]).norm() < 1e-12);
            }
        }
    }
}
