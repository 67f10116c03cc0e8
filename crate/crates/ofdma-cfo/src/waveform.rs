//! Per-user OFDMA transmitter chain: subcarrier allocation, mapping, IDFT
//! and cyclic extension.

use num_complex::Complex64;
use rand::seq::SliceRandom;

use crate::numerics::{idft, RngStream};
use crate::{Error, Result};

/// Dimensional parameters of one OFDMA symbol.
///
/// `n` total subcarriers are shared by `users` users. The transmitted symbol
/// carries a cyclic prefix of `n_cp` samples and a cyclic suffix of `n_cs`
/// samples; the receiver window rolls off over `n_w` samples in total
/// (`n_w/2` of excess on each side of the DFT core).
///
/// The cyclic suffix budget must equal the right-hand window excess
/// (`n_cs == n_w/2`): the suffix exists precisely to cover that excess, and
/// the guard-removal arithmetic below relies on the equality.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OfdmaConfig {
    pub n: usize,
    pub users: usize,
    pub n_cp: usize,
    pub n_cs: usize,
    pub n_w: usize,
}

impl OfdmaConfig {
    pub fn new(n: usize, users: usize, n_cp: usize, n_cs: usize, n_w: usize) -> Result<Self> {
        let cfg = OfdmaConfig {
            n,
            users,
            n_cp,
            n_cs,
            n_w,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if !self.n.is_power_of_two() {
            return fail(format!("subcarrier count {} is not a power of two", self.n));
        }
        if self.users == 0 || self.n % self.users != 0 {
            return fail(format!(
                "{} subcarriers cannot be split evenly over {} users",
                self.n, self.users
            ));
        }
        if self.n_w % 2 != 0 {
            return fail(format!("window length {} must be even", self.n_w));
        }
        if self.n_w >= self.n {
            return fail(format!(
                "window length {} must be smaller than the {}-point DFT",
                self.n_w, self.n
            ));
        }
        if self.n_cs != self.n_w / 2 {
            return fail(format!(
                "cyclic suffix {} must equal half the window length ({})",
                self.n_cs,
                self.n_w / 2
            ));
        }
        if self.n_cp > self.n || self.n_cs > self.n {
            return fail("cyclic extensions longer than the symbol core".into());
        }
        if self.guard_len_signed() < 0 {
            return fail(format!(
                "cyclic prefix {} too short for window length {}",
                self.n_cp, self.n_w
            ));
        }
        Ok(())
    }

    /// Subcarriers per user under full occupancy.
    pub fn per_user(&self) -> usize {
        self.n / self.users
    }

    /// Total extended symbol length.
    pub fn total_len(&self) -> usize {
        self.n + self.n_cp + self.n_cs
    }

    /// Samples discarded in front of the windowed receive block.
    pub fn guard_len(&self) -> usize {
        self.guard_len_signed() as usize
    }

    fn guard_len_signed(&self) -> isize {
        self.n_cp as isize + self.n_cs as isize - self.n_w as isize
    }

    /// Longest channel impulse response the cyclic prefix can absorb while
    /// keeping the windowed receive block free of the previous symbol.
    pub fn max_channel_len(&self) -> usize {
        self.n_cp - self.n_w / 2 + 1
    }

    pub fn all_bins(&self) -> Vec<usize> {
        (0..self.n).collect()
    }
}

/// Subcarrier-to-user assignment policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AllocationScheme {
    /// Random partition of the active set (generalized carrier assignment).
    Generalized,
    /// User `i` takes active bins `i, i+K, i+2K, ...`.
    Interleaved,
    /// Contiguous chunks of the active set.
    Blocked,
}

/// Disjoint per-user subcarrier sets over the active bins.
#[derive(Debug, Clone)]
pub struct Allocation {
    pub scheme: AllocationScheme,
    sets: Vec<Vec<usize>>,
    active: Vec<usize>,
    owner: Vec<Option<usize>>,
}

impl Allocation {
    /// Partitions `active_bins` into equally sized per-user sets. The bins
    /// may be a strict subset of `0..n` (guard bands stay unassigned).
    pub fn build(
        scheme: AllocationScheme,
        cfg: &OfdmaConfig,
        active_bins: &[usize],
        stream: &RngStream,
    ) -> Result<Self> {
        let k = cfg.users;
        if active_bins.is_empty() || active_bins.len() % k != 0 {
            return Err(Error::InvalidConfig(format!(
                "{} active subcarriers cannot be split over {} users",
                active_bins.len(),
                k
            )));
        }
        let mut active: Vec<usize> = active_bins.to_vec();
        active.sort_unstable();
        active.dedup();
        if active.len() != active_bins.len() || *active.last().unwrap() >= cfg.n {
            return Err(Error::InvalidConfig(
                "active subcarrier list has duplicates or out-of-range bins".into(),
            ));
        }
        let per_user = active.len() / k;
        let mut sets = vec![Vec::with_capacity(per_user); k];
        match scheme {
            AllocationScheme::Interleaved => {
                for (pos, &bin) in active.iter().enumerate() {
                    sets[pos % k].push(bin);
                }
            }
            AllocationScheme::Blocked => {
                for (user, chunk) in active.chunks(per_user).enumerate() {
                    sets[user] = chunk.to_vec();
                }
            }
            AllocationScheme::Generalized => {
                let mut shuffled = active.clone();
                shuffled.shuffle(&mut stream.rng());
                for (pos, &bin) in shuffled.iter().enumerate() {
                    sets[pos / per_user].push(bin);
                }
                for set in &mut sets {
                    set.sort_unstable();
                }
            }
        }
        let mut owner = vec![None; cfg.n];
        for (user, set) in sets.iter().enumerate() {
            for &bin in set {
                owner[bin] = Some(user);
            }
        }
        Ok(Allocation {
            scheme,
            sets,
            active,
            owner,
        })
    }

    pub fn users(&self) -> usize {
        self.sets.len()
    }

    /// Sorted subcarrier set of one user.
    pub fn set(&self, user: usize) -> &[usize] {
        &self.sets[user]
    }

    /// Sorted union of all per-user sets.
    pub fn active_bins(&self) -> &[usize] {
        &self.active
    }

    /// Which user owns a bin, if any.
    pub fn owner(&self, bin: usize) -> Option<usize> {
        self.owner[bin]
    }
}

/// Places the `user`'s data symbols on its subcarriers of an `n`-point
/// frequency-domain vector; all other bins are zero.
pub fn map_subcarriers(
    data: &[Complex64],
    alloc: &Allocation,
    user: usize,
    n: usize,
) -> Result<Vec<Complex64>> {
    if user >= alloc.users() {
        return Err(Error::InvalidParameter(format!(
            "user index {} out of range (have {})",
            user,
            alloc.users()
        )));
    }
    let set = alloc.set(user);
    if data.len() != set.len() {
        return Err(Error::Dimension(format!(
            "user {} has {} subcarriers but {} symbols supplied",
            user,
            set.len(),
            data.len()
        )));
    }
    let mut out = vec![Complex64::ZERO; n];
    for (&bin, &sym) in set.iter().zip(data) {
        out[bin] = sym;
    }
    Ok(out)
}

/// Inverse unitary DFT of a frequency-domain symbol.
pub fn synthesize_time_symbol(freq: &[Complex64]) -> Result<Vec<Complex64>> {
    idft(freq)
}

/// Prepends the cyclic prefix and appends the cyclic suffix:
/// `[last n_cp samples | s | first n_cs samples]`.
pub fn cyclic_extend(time: &[Complex64], cfg: &OfdmaConfig) -> Result<Vec<Complex64>> {
    let n = time.len();
    if cfg.n_cp > n || cfg.n_cs > n {
        return Err(Error::InvalidConfig(format!(
            "cyclic extension ({}, {}) exceeds symbol length {}",
            cfg.n_cp, cfg.n_cs, n
        )));
    }
    let mut out = Vec::with_capacity(n + cfg.n_cp + cfg.n_cs);
    out.extend_from_slice(&time[n - cfg.n_cp..]);
    out.extend_from_slice(time);
    out.extend_from_slice(&time[..cfg.n_cs]);
    Ok(out)
}

/// One OFDMA symbol worth of user data: the per-user vectors and the
/// composite frequency-domain vector with every symbol on its own bin.
#[derive(Debug, Clone)]
pub struct SymbolFrame {
    pub per_user: Vec<Vec<Complex64>>,
    pub composite: Vec<Complex64>,
}

/// Splits symbols given in ascending active-bin order into per-user vectors
/// and the composite placement.
pub fn frame_from_bin_symbols(
    alloc: &Allocation,
    cfg: &OfdmaConfig,
    symbols: &[Complex64],
) -> Result<SymbolFrame> {
    let active = alloc.active_bins();
    if symbols.len() != active.len() {
        return Err(Error::Dimension(format!(
            "{} symbols supplied for {} active bins",
            symbols.len(),
            active.len()
        )));
    }
    let mut composite = vec![Complex64::ZERO; cfg.n];
    for (&bin, &sym) in active.iter().zip(symbols) {
        composite[bin] = sym;
    }
    let per_user = (0..alloc.users())
        .map(|u| alloc.set(u).iter().map(|&bin| composite[bin]).collect())
        .collect();
    Ok(SymbolFrame {
        per_user,
        composite,
    })
}
