use std::f64::consts::PI;

use crate::error::{NsoError, Result};
use crate::numerics::{irfft, rfft, Complex64};

/// Truncated real DFT pair on an `n`-point grid as dense matrices.
///
/// Forward: `X_re = U·fc`, `X_im = U·fs` give the first `modes` coefficients
/// of the unnormalized rfft of each row of `U`. Inverse: `Y_re·gc + Y_im·gs`
/// is the irfft of the mode block with every higher mode set to zero.
#[derive(Clone, Debug)]
pub struct SpectralBasis {
    pub n: usize,
    pub modes: usize,
    /// `n × modes`, `cos(2π m t / n)`.
    pub fc: Vec<f64>,
    /// `n × modes`, `−sin(2π m t / n)`.
    pub fs: Vec<f64>,
    /// `modes × n`, `c_m cos(2π m t / n) / n`.
    pub gc: Vec<f64>,
    /// `modes × n`, `−c_m sin(2π m t / n) / n`.
    pub gs: Vec<f64>,
}

impl SpectralBasis {
    pub fn new(n: usize, modes: usize) -> Result<Self> {
        if n < 2 || modes == 0 || modes > n / 2 + 1 {
            return Err(NsoError::Dimension(format!(
                "{modes} modes requested on a {n}-point grid (at most {})",
                n / 2 + 1
            )));
        }
        let mut fc = vec![0.0; n * modes];
        let mut fs = vec![0.0; n * modes];
        let mut gc = vec![0.0; modes * n];
        let mut gs = vec![0.0; modes * n];
        for m in 0..modes {
            // DC and Nyquist appear once in the Hermitian spectrum, others twice.
            let weight = if m == 0 || 2 * m == n { 1.0 } else { 2.0 };
            for t in 0..n {
                let angle = 2.0 * PI * ((m * t) % n) as f64 / n as f64;
                let (mut s, c) = angle.sin_cos();
                if weight == 1.0 {
                    // sin vanishes on DC and Nyquist; drop the rounding residue.
                    s = 0.0;
                }
                fc[t * modes + m] = c;
                fs[t * modes + m] = -s;
                gc[m * n + t] = weight * c / n as f64;
                gs[m * n + t] = -weight * s / n as f64;
            }
        }
        Ok(Self {
            n,
            modes,
            fc,
            fs,
            gc,
            gs,
        })
    }
}

/// Spectral convolution of one sample through the FFT route: `u` is
/// `channels × n`; `rr`/`ri` are `modes × out × in` real/imaginary weights.
pub fn spectral_conv_reference(
    u: &[Vec<f64>],
    rr: &[f64],
    ri: &[f64],
    modes: usize,
) -> Result<Vec<Vec<f64>>> {
    let c = u.len();
    let n = u.first().map_or(0, Vec::len);
    if modes > n / 2 + 1 || rr.len() != modes * c * c || ri.len() != rr.len() {
        return Err(NsoError::Dimension("spectral weights do not match input".into()));
    }
    let spectra: Vec<Vec<Complex64>> = u.iter().map(|row| rfft(row)).collect::<Result<_>>()?;
    (0..c)
        .map(|o| {
            let mut out = vec![Complex64::new(0.0, 0.0); n / 2 + 1];
            for (m, slot) in out.iter_mut().enumerate().take(modes) {
                for i in 0..c {
                    let w = Complex64::new(rr[(m * c + o) * c + i], ri[(m * c + o) * c + i]);
                    *slot += w * spectra[i][m];
                }
            }
            irfft(&out, n)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;
    use rand::Rng;

    #[test]
    fn forward_matrices_match_rfft() {
        let mut rng = RngStream::new(31);
        for n in [16, 17, 100] {
            let modes = n / 2 + 1;
            let basis = SpectralBasis::new(n, modes).unwrap();
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let spec = rfft(&x).unwrap();
            for m in 0..modes {
                let re: f64 = (0..n).map(|t| x[t] * basis.fc[t * modes + m]).sum();
                let im: f64 = (0..n).map(|t| x[t] * basis.fs[t * modes + m]).sum();
                assert!((re - spec[m].re).abs() < 1e-12);
                assert!((im - spec[m].im).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn inverse_matrices_match_truncated_irfft() {
        let mut rng = RngStream::new(32);
        for (n, modes) in [(16, 3), (16, 9), (17, 9), (100, 32)] {
            let basis = SpectralBasis::new(n, modes).unwrap();
            let mut spec = vec![Complex64::new(0.0, 0.0); n / 2 + 1];
            for s in spec.iter_mut().take(modes) {
                *s = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            }
            let want = irfft(&spec, n).unwrap();
            for t in 0..n {
                let got: f64 = (0..modes)
                    .map(|m| spec[m].re * basis.gc[m * n + t] + spec[m].im * basis.gs[m * n + t])
                    .sum();
                assert!((got - want[t]).abs() < 1e-12, "n={n} modes={modes} t={t}");
            }
        }
    }

    #[test]
    fn too_many_modes_rejected() {
        assert!(SpectralBasis::new(16, 10).is_err());
        assert!(SpectralBasis::new(16, 0).is_err());
        assert!(SpectralBasis::new(16, 9).is_ok());
    }
}
