//! Independent per-user multipath channels, CFO ramps and uplink
//! superposition.

use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Result};

/// How drawn tap powers are normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Expected total power is one; realizations fluctuate (Rayleigh fading).
    #[default]
    Expected,
    /// Every realization is scaled to exactly unit power. Models links whose
    /// received SNRs are equalized, e.g. calibrated lab captures.
    PerRealization,
}

/// Power-delay profile: sparse taps at integer sample delays with relative
/// powers in dB. Linear powers are normalized to sum to one before drawing.
#[derive(Debug, Clone)]
pub struct ChannelProfile {
    taps: Vec<(usize, f64)>,
    pub normalization: Normalization,
}

impl ChannelProfile {
    pub fn new(taps_db: &[(usize, f64)]) -> Result<Self> {
        if taps_db.is_empty() {
            return Err(Error::InvalidConfig("channel profile has no taps".into()));
        }
        for pair in taps_db.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(Error::InvalidConfig(
                    "tap delays must be strictly increasing".into(),
                ));
            }
        }
        let linear: Vec<f64> = taps_db.iter().map(|&(_, db)| 10f64.powf(db / 10.0)).collect();
        let total: f64 = linear.iter().sum();
        let taps = taps_db
            .iter()
            .zip(&linear)
            .map(|(&(delay, _), &p)| (delay, p / total))
            .collect();
        Ok(ChannelProfile {
            taps,
            normalization: Normalization::Expected,
        })
    }

    /// Parses the `delay_samples power_db` text format ('#' comments).
    pub fn parse(text: &str) -> Result<Self> {
        let mut taps = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let delay: usize = fields
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad_profile_line(lineno))?;
            let power: f64 = fields
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad_profile_line(lineno))?;
            if fields.next().is_some() {
                return Err(bad_profile_line(lineno));
            }
            taps.push((delay, power));
        }
        ChannelProfile::new(&taps)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        ChannelProfile::parse(&text)
    }

    /// Impulse-response length implied by the last tap.
    pub fn channel_len(&self) -> usize {
        self.taps.last().map(|&(d, _)| d + 1).unwrap_or(0)
    }

    pub fn taps(&self) -> &[(usize, f64)] {
        &self.taps
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }
}

fn bad_profile_line(lineno: usize) -> Error {
    Error::InvalidConfig(format!(
        "channel profile line {}: expected 'delay_samples power_db'",
        lineno + 1
    ))
}

/// One drawn impulse response, zero-filled between the profile taps.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub taps: Vec<Complex64>,
}

impl ChannelRealization {
    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }
}

/// Draws a realization with independent CN(0, p_i) taps.
pub fn draw_channel(profile: &ChannelProfile, rng: &mut ChaCha8Rng) -> ChannelRealization {
    let mut taps = vec![Complex64::ZERO; profile.channel_len()];
    for &(delay, power) in profile.taps() {
        let sigma = (power / 2.0).sqrt();
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        taps[delay] = Complex64::new(sigma * re, sigma * im);
    }
    if profile.normalization == Normalization::PerRealization {
        let norm: f64 = taps.iter().map(|t| t.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            for t in &mut taps {
                *t /= norm;
            }
        }
    }
    ChannelRealization { taps }
}

/// N-point frequency response `H[k] = sum_n h[n] exp(-j 2 pi n k / N)`.
///
/// Deliberately unnormalized (no 1/sqrt(N)): with the unitary DFT convention
/// used everywhere else, this is the factor that makes the circular
/// convolution theorem hold exactly.
pub fn channel_freq_response(h: &ChannelRealization, n: usize) -> Result<Vec<Complex64>> {
    if h.len() > n {
        return Err(Error::Dimension(format!(
            "channel length {} exceeds DFT size {}",
            h.len(),
            n
        )));
    }
    let mut response = vec![Complex64::ZERO; n];
    for (k, r) in response.iter_mut().enumerate() {
        let mut acc = Complex64::ZERO;
        for (delay, tap) in h.taps.iter().enumerate() {
            if *tap != Complex64::ZERO {
                let angle = -2.0 * std::f64::consts::PI * (delay * k) as f64 / n as f64;
                acc += tap * Complex64::from_polar(1.0, angle);
            }
        }
        *r = acc;
    }
    Ok(response)
}

/// Per-user normalized CFO values (offset over subcarrier spacing).
#[derive(Debug, Clone, PartialEq)]
pub struct CfoSet(pub Vec<f64>);

impl CfoSet {
    pub fn new(values: Vec<f64>) -> Self {
        for &eps in &values {
            if !(-0.5..=0.5).contains(&eps) {
                log::warn!(
                    "CFO {eps} lies outside (-0.5, 0.5]; compensation still applies but the \
                     offset aliases onto a neighbouring subcarrier"
                );
            }
        }
        CfoSet(values)
    }

    pub fn draw_uniform(users: usize, rng: &mut ChaCha8Rng) -> Self {
        // Uniform over (-0.5, 0.5].
        let values = (0..users).map(|_| 0.5 - rng.random::<f64>()).collect();
        CfoSet(values)
    }

    pub fn zeros(users: usize) -> Self {
        CfoSet(vec![0.0; users])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Complex-exponential CFO ramp `exp(j 2 pi eps n / n_dft)` for n in 0..len.
pub fn cfo_ramp(eps: f64, len: usize, n_dft: usize) -> Vec<Complex64> {
    (0..len)
        .map(|n| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * eps * n as f64 / n_dft as f64))
        .collect()
}

/// Linear convolution of `signal` with `taps`, truncated to `signal.len()`.
pub fn convolve_truncated(signal: &[Complex64], taps: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::ZERO; signal.len()];
    for (delay, tap) in taps.iter().enumerate() {
        if *tap == Complex64::ZERO {
            continue;
        }
        for (i, s) in signal[..signal.len() - delay.min(signal.len())].iter().enumerate() {
            out[i + delay] += tap * s;
        }
    }
    out
}

/// Superimposes all users at the base station: per user, the extended symbol
/// passes its channel (linear convolution truncated to the symbol length)
/// and picks up its CFO ramp; AWGN with variance `noise_var` is added once.
pub fn apply_uplink(
    extended: &[Vec<Complex64>],
    channels: &[ChannelRealization],
    cfos: &CfoSet,
    n_dft: usize,
    noise_var: f64,
    noise_stream: &crate::numerics::RngStream,
) -> Result<Vec<Complex64>> {
    let k = extended.len();
    if channels.len() != k || cfos.len() != k {
        return Err(Error::Dimension(format!(
            "users mismatch: {} signals, {} channels, {} CFOs",
            k,
            channels.len(),
            cfos.len()
        )));
    }
    let total_len = extended.first().map(|s| s.len()).unwrap_or(0);
    if total_len == 0 || extended.iter().any(|s| s.len() != total_len) {
        return Err(Error::Dimension(
            "per-user extended symbols must share one nonzero length".into(),
        ));
    }
    let mut received = vec![Complex64::ZERO; total_len];
    for ((signal, ch), &eps) in extended.iter().zip(channels).zip(&cfos.0) {
        let faded = convolve_truncated(signal, &ch.taps);
        let ramp = cfo_ramp(eps, total_len, n_dft);
        for ((r, f), w) in received.iter_mut().zip(&faded).zip(&ramp) {
            *r += f * w;
        }
    }
    let noise = crate::numerics::gaussian_noise(total_len, noise_var, noise_stream)?;
    for (r, z) in received.iter_mut().zip(&noise) {
        *r += z;
    }
    Ok(received)
}
