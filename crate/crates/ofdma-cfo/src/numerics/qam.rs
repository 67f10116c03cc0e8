//! Gray-coded square QAM mapping with hard-decision demapping.
//!
//! The canonical constellations live in `data/qam{4,16}_gray.txt` (one
//! `bits re im` row per point) and are parsed once at first use; the code
//! never re-derives them. Demapping is nearest-neighbour with ties broken
//! toward the lower bit pattern.

use std::sync::LazyLock;

use num_complex::Complex64;

use crate::{Error, Result};

/// Supported constellation orders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QamOrder {
    Qam4,
    Qam16,
}

impl QamOrder {
    pub fn from_points(order: u32) -> Result<Self> {
        match order {
            4 => Ok(QamOrder::Qam4),
            16 => Ok(QamOrder::Qam16),
            other => Err(Error::InvalidParameter(format!(
                "unsupported QAM order {other}; expected 4 or 16"
            ))),
        }
    }

    pub fn bits_per_symbol(self) -> usize {
        match self {
            QamOrder::Qam4 => 2,
            QamOrder::Qam16 => 4,
        }
    }

    pub fn points(self) -> u32 {
        match self {
            QamOrder::Qam4 => 4,
            QamOrder::Qam16 => 16,
        }
    }

    fn table(self) -> &'static [Complex64] {
        match self {
            QamOrder::Qam4 => &QAM4_TABLE,
            QamOrder::Qam16 => &QAM16_TABLE,
        }
    }
}

static QAM4_TABLE: LazyLock<Vec<Complex64>> =
    LazyLock::new(|| parse_table(include_str!("../../data/qam4_gray.txt"), 2));
static QAM16_TABLE: LazyLock<Vec<Complex64>> =
    LazyLock::new(|| parse_table(include_str!("../../data/qam16_gray.txt"), 4));

fn parse_table(text: &str, bits: usize) -> Vec<Complex64> {
    let mut table = vec![None; 1 << bits];
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let pattern = fields.next().expect("constellation row missing bits");
        assert_eq!(pattern.len(), bits, "bit pattern {pattern} has wrong width");
        let index = usize::from_str_radix(pattern, 2).expect("invalid bit pattern");
        let re: f64 = fields
            .next()
            .and_then(|s| s.parse().ok())
            .expect("constellation row missing re");
        let im: f64 = fields
            .next()
            .and_then(|s| s.parse().ok())
            .expect("constellation row missing im");
        table[index] = Some(Complex64::new(re, im));
    }
    table
        .into_iter()
        .map(|p| p.expect("constellation table incomplete"))
        .collect()
}

/// Maps a 0/1 bit slice onto constellation symbols (first bit is the MSB of
/// each point index).
pub fn qam_map(bits: &[u8], order: QamOrder) -> Result<Vec<Complex64>> {
    let bps = order.bits_per_symbol();
    if bits.len() % bps != 0 {
        return Err(Error::InvalidParameter(format!(
            "bit count {} is not divisible by {} bits/symbol",
            bits.len(),
            bps
        )));
    }
    let table = order.table();
    Ok(bits
        .chunks_exact(bps)
        .map(|chunk| {
            let index = chunk.iter().fold(0usize, |acc, &b| {
                debug_assert!(b <= 1);
                (acc << 1) | b as usize
            });
            table[index]
        })
        .collect())
}

/// Hard-decision demapping; exact distance ties resolve to the lower index.
pub fn qam_demap(symbols: &[Complex64], order: QamOrder) -> Vec<u8> {
    let bps = order.bits_per_symbol();
    let table = order.table();
    let mut bits = Vec::with_capacity(symbols.len() * bps);
    for s in symbols {
        let mut best = 0usize;
        let mut best_dist = f64::INFINITY;
        for (idx, p) in table.iter().enumerate() {
            let dist = (s - p).norm_sqr();
            if dist < best_dist {
                best_dist = dist;
                best = idx;
            }
        }
        for k in (0..bps).rev() {
            bits.push(((best >> k) & 1) as u8);
        }
    }
    bits
}
