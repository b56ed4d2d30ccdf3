use ndarray::Array2;

use crate::error::{NsoError, Result};
use crate::fields::{Channel, SignalEnsemble};

/// Second-order finite-difference derivative of one row sampled at `t`.
///
/// Central differences inside, one-sided three-point stencils at both ends.
/// The grid may be non-uniform; the stencils use the local spacings.
pub fn differentiate(t: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    if n < 3 || t.len() != n {
        return Err(NsoError::Dimension(format!(
            "derivative needs at least 3 matching samples, got {} values on {} points",
            n,
            t.len()
        )));
    }
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        out[i] = three_point(t[i - 1], t[i], t[i + 1], x[i - 1], x[i], x[i + 1], t[i]);
    }
    out[0] = three_point(t[0], t[1], t[2], x[0], x[1], x[2], t[0]);
    out[n - 1] = three_point(
        t[n - 3],
        t[n - 2],
        t[n - 1],
        x[n - 3],
        x[n - 2],
        x[n - 1],
        t[n - 1],
    );
    Ok(out)
}

/// Derivative at `at` of the quadratic through three samples.
#[inline]
fn three_point(t0: f64, t1: f64, t2: f64, x0: f64, x1: f64, x2: f64, at: f64) -> f64 {
    let w0 = (2.0 * at - t1 - t2) / ((t0 - t1) * (t0 - t2));
    let w1 = (2.0 * at - t0 - t2) / ((t1 - t0) * (t1 - t2));
    let w2 = (2.0 * at - t0 - t1) / ((t2 - t0) * (t2 - t1));
    w0 * x0 + w1 * x1 + w2 * x2
}

/// Row-wise time derivative of an ensemble.
pub fn estimate_derivative(signal: &SignalEnsemble) -> Result<SignalEnsemble> {
    let t = signal.grid.points();
    let n = signal.grid.len();
    if n < 3 {
        return Err(NsoError::Dimension(format!(
            "derivative needs n >= 3, got {n}"
        )));
    }
    let mut values = Array2::<f64>::zeros((signal.rows(), n));
    for (r, mut out) in values.rows_mut().into_iter().enumerate() {
        let row = signal.row(r).to_vec();
        for (o, d) in out.iter_mut().zip(differentiate(t, &row)?) {
            *o = d;
        }
    }
    let mut ens = SignalEnsemble::new(signal.grid.clone(), values, Channel::Rate)?;
    ens.provenance = signal.provenance.clone();
    Ok(ens)
}
