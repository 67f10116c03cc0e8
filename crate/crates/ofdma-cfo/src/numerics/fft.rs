//! Radix-2 FFT with unitary 1/sqrt(N) scaling in both directions.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::rc::Rc;

use num_complex::Complex64;

use crate::{Error, Result};

thread_local! {
    // Twiddle tables per transform size; values are identical on every
    // thread, so the per-thread copies do not affect determinism.
    static TWIDDLES: RefCell<HashMap<usize, Rc<Vec<Complex64>>>> = RefCell::new(HashMap::new());
}

fn twiddles(n: usize) -> Rc<Vec<Complex64>> {
    TWIDDLES.with(|cache| {
        Rc::clone(cache.borrow_mut().entry(n).or_insert_with(|| {
            let table = (0..n / 2)
                .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64))
                .collect();
            Rc::new(table)
        }))
    })
}

/// Unitary discrete Fourier transform of a complex vector.
///
/// Both directions carry the 1/sqrt(N) factor, so `dft(dft(v, false), true)`
/// round-trips. The length must be a power of two (radix-2 only).
pub fn dft(input: &[Complex64], inverse: bool) -> Result<Vec<Complex64>> {
    let n = input.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::FftSize(n));
    }
    let mut data = input.to_vec();
    if n > 1 {
        bit_reverse(&mut data);
        let table = twiddles(n);
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let mut w = table[k * stride];
                    if inverse {
                        w = w.conj();
                    }
                    let a = data[start + k];
                    let t = w * data[start + k + half];
                    data[start + k] = a + t;
                    data[start + k + half] = a - t;
                }
            }
            len <<= 1;
        }
    }
    let scale = 1.0 / (n as f64).sqrt();
    for x in &mut data {
        *x *= scale;
    }
    Ok(data)
}

/// Inverse unitary DFT; shorthand for `dft(v, true)`.
pub fn idft(input: &[Complex64]) -> Result<Vec<Complex64>> {
    dft(input, true)
}

fn bit_reverse(data: &mut [Complex64]) {
    let n = data.len();
    let mut j = 0usize;
    for i in 0..n {
        if i < j {
            data.swap(i, j);
        }
        let mut m = n >> 1;
        while m >= 1 && j >= m {
            j -= m;
            m >>= 1;
        }
        j += m;
    }
}
