//! Composite-channel equalization, hard decisions and BER/SINR statistics.
//!
//! After CFO compensation the detector sees `x = H_comp * d`: each active
//! subcarrier carries its owner's channel frequency response times the
//! residual phase the guard removal absorbed. Equalization is one tap per
//! bin; bins whose composite gain is exactly zero are flagged as erased and
//! their bits counted as errors.

use num_complex::Complex64;

use crate::channel::{channel_freq_response, CfoSet, ChannelRealization};
use crate::numerics::{qam_demap, QamOrder};
use crate::waveform::{Allocation, OfdmaConfig};
use crate::{Error, Result};

/// SINR cap reported when the residual is exactly zero.
pub const SINR_CAP_DB: f64 = 200.0;

/// Per-subcarrier composite gains (owner's channel response with the
/// absorbed CFO phase); zero on inactive bins.
#[derive(Debug, Clone)]
pub struct CompositeChannel {
    pub gains: Vec<Complex64>,
}

/// Builds the composite channel for one receive chain.
///
/// `phase_samples` is the number of time samples between the symbol start
/// and the first retained sample of the chain, i.e. the offset that turns
/// each user's CFO ramp into the constant phase `e^{j 2 pi eps_i
/// phase_samples / N}`: the windowed chain discards `n_gi` samples, the
/// rectangular chain `n_cp`.
pub fn build_composite_channel(
    channels: &[ChannelRealization],
    cfos: &CfoSet,
    alloc: &Allocation,
    cfg: &OfdmaConfig,
    phase_samples: usize,
) -> Result<CompositeChannel> {
    if channels.len() != alloc.users() || cfos.len() != alloc.users() {
        return Err(Error::Dimension(format!(
            "{} channels / {} CFOs for {} users",
            channels.len(),
            cfos.len(),
            alloc.users()
        )));
    }
    let mut gains = vec![Complex64::ZERO; cfg.n];
    for user in 0..alloc.users() {
        let response = channel_freq_response(&channels[user], cfg.n)?;
        let phase = Complex64::from_polar(
            1.0,
            2.0 * std::f64::consts::PI * cfos.0[user] * phase_samples as f64 / cfg.n as f64,
        );
        for &bin in alloc.set(user) {
            gains[bin] = phase * response[bin];
        }
    }
    Ok(CompositeChannel { gains })
}

/// One-tap equalization on the active bins followed by hard decisions.
///
/// Returns the decided bits (active bins in ascending order), the equalized
/// soft symbols, and the erasure mask for zero-gain bins. Erased bins
/// produce placeholder zero bits; [`DetectionReport::from_decisions`] counts
/// all of their bits as errors.
pub fn equalize_and_demap(
    detected: &[Complex64],
    composite: &CompositeChannel,
    alloc: &Allocation,
    order: QamOrder,
) -> Result<(Vec<u8>, Vec<Complex64>, Vec<bool>)> {
    if detected.len() != composite.gains.len() {
        return Err(Error::Dimension(format!(
            "{} detected bins but {} composite gains",
            detected.len(),
            composite.gains.len()
        )));
    }
    let active = alloc.active_bins();
    let mut soft = Vec::with_capacity(active.len());
    let mut erased = Vec::with_capacity(active.len());
    for &bin in active {
        let gain = composite.gains[bin];
        if gain == Complex64::ZERO {
            soft.push(Complex64::ZERO);
            erased.push(true);
        } else {
            soft.push(detected[bin] / gain);
            erased.push(false);
        }
    }
    let bits = qam_demap(&soft, order);
    Ok((bits, soft, erased))
}

/// Accumulated detection statistics; merging reports just sums counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DetectionReport {
    pub bit_errors: u64,
    pub bits_total: u64,
}

impl DetectionReport {
    /// Exact error counting between two equal-length bit streams.
    pub fn from_bits(decided: &[u8], reference: &[u8]) -> Result<Self> {
        if decided.len() != reference.len() {
            return Err(Error::Dimension(format!(
                "bit streams differ in length: {} vs {}",
                decided.len(),
                reference.len()
            )));
        }
        let bit_errors = decided
            .iter()
            .zip(reference)
            .filter(|(a, b)| a != b)
            .count() as u64;
        Ok(DetectionReport {
            bit_errors,
            bits_total: decided.len() as u64,
        })
    }

    /// Error counting with an erasure mask: every bit of an erased symbol
    /// counts as an error regardless of the placeholder decision.
    pub fn from_decisions(
        decided: &[u8],
        reference: &[u8],
        erased: &[bool],
        bits_per_symbol: usize,
    ) -> Result<Self> {
        if decided.len() != reference.len() || decided.len() != erased.len() * bits_per_symbol {
            return Err(Error::Dimension(
                "bit streams and erasure mask are inconsistent".into(),
            ));
        }
        let mut bit_errors = 0u64;
        for (sym, &is_erased) in erased.iter().enumerate() {
            let lo = sym * bits_per_symbol;
            let hi = lo + bits_per_symbol;
            if is_erased {
                bit_errors += bits_per_symbol as u64;
            } else {
                bit_errors += decided[lo..hi]
                    .iter()
                    .zip(&reference[lo..hi])
                    .filter(|(a, b)| a != b)
                    .count() as u64;
            }
        }
        Ok(DetectionReport {
            bit_errors,
            bits_total: decided.len() as u64,
        })
    }

    pub fn merge(&mut self, other: &DetectionReport) {
        self.bit_errors += other.bit_errors;
        self.bits_total += other.bits_total;
    }

    pub fn ber(&self) -> f64 {
        if self.bits_total == 0 {
            0.0
        } else {
            self.bit_errors as f64 / self.bits_total as f64
        }
    }
}

/// Spec-shaped wrapper around [`DetectionReport::from_bits`].
pub fn compute_ber(decided: &[u8], reference: &[u8]) -> Result<DetectionReport> {
    DetectionReport::from_bits(decided, reference)
}

/// SINR estimate in dB: symbol power over residual power,
/// `10 log10(sum |ref|^2 / sum |soft - ref|^2)`, capped at
/// [`SINR_CAP_DB`] when the residual vanishes.
pub fn measure_sinr(soft: &[Complex64], reference: &[Complex64]) -> Result<f64> {
    if soft.len() != reference.len() {
        return Err(Error::Dimension(format!(
            "soft/reference length mismatch: {} vs {}",
            soft.len(),
            reference.len()
        )));
    }
    let signal: f64 = reference.iter().map(|z| z.norm_sqr()).sum();
    if signal <= 0.0 {
        return Err(Error::InvalidParameter(
            "SINR reference must carry nonzero power".into(),
        ));
    }
    let residual: f64 = soft
        .iter()
        .zip(reference)
        .map(|(s, r)| (s - r).norm_sqr())
        .sum();
    if residual == 0.0 {
        return Ok(SINR_CAP_DB);
    }
    Ok((10.0 * (signal / residual).log10()).min(SINR_CAP_DB))
}
