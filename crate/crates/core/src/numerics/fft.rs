//! Real-input discrete Fourier transform pair.
//!
//! Convention: the forward transform is unnormalized,
//! `X[k] = sum_t x[t] exp(-2 pi i k t / n)`, and the inverse carries the `1/n`
//! factor. Only the `n/2 + 1` non-negative frequencies are stored.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{NsoError, Result};

/// Forward real-to-complex transform. Returns `n/2 + 1` coefficients.
pub fn rfft(x: &[f64]) -> Result<Vec<Complex64>> {
    let n = x.len();
    if n < 2 {
        return Err(NsoError::Dimension(format!(
            "rfft needs at least 2 samples, got {n}"
        )));
    }
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf.truncate(n / 2 + 1);
    Ok(buf)
}

/// Inverse of [`rfft`] for a length-`n` real signal.
///
/// The imaginary parts of the DC term (and of the Nyquist term when `n` is
/// even) cannot be represented by a real signal and are ignored.
pub fn irfft(c: &[Complex64], n: usize) -> Result<Vec<f64>> {
    if n < 2 || c.len() != n / 2 + 1 {
        return Err(NsoError::Dimension(format!(
            "irfft of length {n} needs {} coefficients, got {}",
            n / 2 + 1,
            c.len()
        )));
    }
    let mut full = vec![Complex64::new(0.0, 0.0); n];
    full[0] = Complex64::new(c[0].re, 0.0);
    for k in 1..c.len() {
        if 2 * k == n {
            full[k] = Complex64::new(c[k].re, 0.0);
        } else {
            full[k] = c[k];
            full[n - k] = c[k].conj();
        }
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut full);
    let scale = 1.0 / n as f64;
    Ok(full.iter().map(|z| z.re * scale).collect())
}
