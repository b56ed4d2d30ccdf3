use crate::error::{NsoError, Result};

/// One classical fourth-order Runge-Kutta step of size `h` from `(t, state)`.
///
/// `f(t, s, out)` writes the state derivative into `out`. A non-finite
/// derivative at any stage aborts the step with the stage time.
pub fn rk4_step<F>(mut f: F, state: &[f64], t: f64, h: f64) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = state.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];

    let mut eval = |t: f64, s: &[f64], out: &mut [f64]| -> Result<()> {
        f(t, s, out);
        if out.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(NsoError::Integration {
                time: t,
                reason: "non-finite derivative".into(),
            })
        }
    };

    eval(t, state, &mut k1)?;
    for i in 0..n {
        tmp[i] = state[i] + 0.5 * h * k1[i];
    }
    eval(t + 0.5 * h, &tmp, &mut k2)?;
    for i in 0..n {
        tmp[i] = state[i] + 0.5 * h * k2[i];
    }
    eval(t + 0.5 * h, &tmp, &mut k3)?;
    for i in 0..n {
        tmp[i] = state[i] + h * k3[i];
    }
    eval(t + h, &tmp, &mut k4)?;

    Ok((0..n)
        .map(|i| state[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrate_exp(h: f64) -> f64 {
        let steps = (1.0 / h).round() as usize;
        let mut s = vec![1.0];
        for i in 0..steps {
            s = rk4_step(|_, s, out| out[0] = s[0], &s, i as f64 * h, h).unwrap();
        }
        s[0]
    }

    #[test]
    fn zero_field_leaves_state() {
        let s = rk4_step(|_, _, out| out.fill(0.0), &[1.5, -2.0], 0.3, 0.1).unwrap();
        assert_eq!(s, vec![1.5, -2.0]);
    }

    #[test]
    fn unit_field_advances_by_h() {
        let s = rk4_step(|_, _, out| out[0] = 1.0, &[0.0], 0.0, 0.1).unwrap();
        assert!((s[0] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn exponential_growth_to_e() {
        let e = integrate_exp(1e-3);
        assert!((e - std::f64::consts::E).abs() < 1e-9, "{e}");
    }

    #[test]
    fn fourth_order_convergence() {
        let e = std::f64::consts::E;
        let coarse = (integrate_exp(0.1) - e).abs();
        let fine = (integrate_exp(0.05) - e).abs();
        let ratio = coarse / fine;
        assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn non_finite_derivative_reports_time() {
        let err = rk4_step(|t, _, out| out[0] = if t > 0.45 { f64::NAN } else { 0.0 }, &[0.0], 0.4, 0.2)
            .unwrap_err();
        match err {
            NsoError::Integration { time, .. } => assert!((time - 0.5).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }
}
