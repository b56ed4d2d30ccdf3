use crate::error::{NsoError, Result};

/// Floor applied to the denominator of the component-wise relative error.
const ABS_FLOOR: f64 = 1e-8;

/// Compare an analytic gradient with central finite differences.
///
/// `f` returns the loss and its analytic gradient at the given parameters.
/// The result is the largest component-wise discrepancy
/// `|g - g_fd| / max(|g|, |g_fd|, 1e-8)`.
pub fn grad_check<F>(f: F, params: &[f64], eps: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    if !(1e-7..=1e-4).contains(&eps) {
        return Err(NsoError::GradCheck(format!(
            "step {eps} outside [1e-7, 1e-4]"
        )));
    }
    let (loss, grad) = f(params);
    if !loss.is_finite() {
        return Err(NsoError::GradCheck("non-finite loss at base point".into()));
    }
    if grad.len() != params.len() {
        return Err(NsoError::GradCheck(format!(
            "gradient has {} entries for {} parameters",
            grad.len(),
            params.len()
        )));
    }

    let mut probe = params.to_vec();
    let mut worst = 0.0f64;
    for i in 0..params.len() {
        probe[i] = params[i] + eps;
        let (up, _) = f(&probe);
        probe[i] = params[i] - eps;
        let (down, _) = f(&probe);
        probe[i] = params[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(NsoError::GradCheck(format!(
                "non-finite loss while probing parameter {i}"
            )));
        }
        let fd = (up - down) / (2.0 * eps);
        let denom = grad[i].abs().max(fd.abs()).max(ABS_FLOOR);
        worst = worst.max((grad[i] - fd).abs() / denom);
    }
    Ok(worst)
}
