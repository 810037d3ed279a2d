//! Complex sequence kernels.
//!
//! Sequences are plain `&[Complex64]` slices. The forward DFT is
//! unnormalized and the inverse carries the `1/N` factor.

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Full linear convolution, `a.len() + b.len() - 1` samples long.
///
/// Returns an empty vector when either input is empty.
pub fn convolve(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    // Iterate over the shorter operand in the inner loop.
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let mut out = vec![Complex64::new(0.0, 0.0); long.len() + short.len() - 1];
    for (j, &s) in short.iter().enumerate() {
        for (o, &l) in out[j..j + long.len()].iter_mut().zip(long) {
            *o += s * l;
        }
    }
    out
}

/// `N`-point DFT of `x`, zero-extended to `n` samples.
///
/// Any `n` is supported, including primes. `n == 0` gives an empty result.
///
/// # Panics
///
/// Panics if `n < x.len()`.
pub fn dft(x: &[Complex64], n: usize) -> Vec<Complex64> {
    transform(x, n, false)
}

/// `N`-point inverse DFT (with the `1/N` factor) of `x`, zero-extended to `n`.
///
/// # Panics
///
/// Panics if `n < x.len()`.
pub fn idft(x: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = transform(x, n, true);
    let scale = 1.0 / n as f64;
    out.iter_mut().for_each(|v| *v *= scale);
    out
}

fn transform(x: &[Complex64], n: usize, inverse: bool) -> Vec<Complex64> {
    assert!(n >= x.len(), "transform length {n} shorter than input {}", x.len());
    if n == 0 {
        return Vec::new();
    }
    let mut buf = x.to_vec();
    buf.resize(n, Complex64::new(0.0, 0.0));
    let fft = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    });
    fft.process(&mut buf);
    buf
}

/// Conjugated time reversal: `out[n] = conj(h[len - 1 - n])`.
pub fn time_reverse_conj(h: &[Complex64]) -> Vec<Complex64> {
    h.iter().rev().map(|v| v.conj()).collect()
}

/// Sum of squared magnitudes.
pub fn energy(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum()
}
