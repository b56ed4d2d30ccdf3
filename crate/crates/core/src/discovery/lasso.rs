use ndarray::{Array1, Axis};

use super::library::RegressionProblem;
use super::model::{FitDiagnostics, FitMethod, SparseModel};
use super::stlsq::residual_norm;
use crate::error::{NsoError, Result};
use crate::numerics::gemm;

/// L1-penalized regression by cyclic coordinate descent, per state equation.
///
/// Minimizes `½‖Z β − ḋ‖² + α‖β‖₁` where `Z` is the library with every column
/// scaled to unit RMS; returned coefficients are mapped back to the raw
/// columns. Sweeps stop when the largest coefficient change falls below
/// `tol`; hitting `max_iter` sweeps first sets the model's warning flag.
pub fn lasso(problem: &RegressionProblem, alpha: f64, max_iter: usize, tol: f64) -> Result<SparseModel> {
    if !(alpha > 0.0) {
        return Err(NsoError::Config(format!("lasso alpha must be > 0, got {alpha}")));
    }
    if max_iter == 0 || !(tol > 0.0) {
        return Err(NsoError::Config("lasso needs max_iter >= 1 and tol > 0".into()));
    }
    let theta = problem.theta.as_standard_layout();
    let (m, p) = theta.dim();
    let scale: Vec<f64> = theta
        .axis_iter(Axis(1))
        .map(|c| (c.dot(&c) / m as f64).sqrt())
        .collect();

    // Gram matrix of the raw library, then rescaled to the standardized one.
    let mut gram = vec![0.0; p * p];
    let flat = theta.as_slice().expect("standard layout");
    gemm(p, m, p, 1.0, flat, 1, p, flat, p, 1, 0.0, &mut gram, p, 1);
    for j in 0..p {
        for k in 0..p {
            let s = scale[j] * scale[k];
            gram[j * p + k] = if s > 0.0 { gram[j * p + k] / s } else { 0.0 };
        }
    }

    let mut coefficients = Vec::with_capacity(problem.states());
    let mut diagnostics = Vec::with_capacity(problem.states());
    for state in 0..problem.states() {
        let target = problem.targets.column(state);
        let corr: Vec<f64> = (0..p)
            .map(|j| {
                if scale[j] > 0.0 {
                    theta.column(j).dot(&target) / scale[j]
                } else {
                    0.0
                }
            })
            .collect();
        let mut beta = vec![0.0; p];
        // q = G β, kept current as coordinates move.
        let mut q = vec![0.0; p];
        let mut sweeps = 0;
        let mut converged = false;
        while sweeps < max_iter {
            sweeps += 1;
            let mut max_change: f64 = 0.0;
            for j in 0..p {
                let gjj = gram[j * p + j];
                if gjj <= 0.0 {
                    continue;
                }
                let rho = corr[j] - q[j] + gjj * beta[j];
                let new = soft_threshold(rho, alpha) / gjj;
                let delta = new - beta[j];
                if delta != 0.0 {
                    for (qk, g) in q.iter_mut().zip(&gram[j * p..(j + 1) * p]) {
                        *qk += delta * g;
                    }
                    beta[j] = new;
                    max_change = max_change.max(delta.abs());
                }
            }
            if max_change < tol {
                converged = true;
                break;
            }
        }
        let xi: Array1<f64> = (0..p)
            .map(|j| if scale[j] > 0.0 { beta[j] / scale[j] } else { 0.0 })
            .collect();
        diagnostics.push(FitDiagnostics {
            residual_norm: residual_norm(&problem.theta, target, &xi),
            iterations: sweeps,
            converged,
        });
        coefficients.push(xi.to_vec());
    }
    Ok(SparseModel {
        columns: problem.columns.clone(),
        coefficients,
        method: FitMethod::Lasso {
            alpha,
            max_iter,
            tol,
        },
        diagnostics,
    })
}

#[inline]
fn soft_threshold(x: f64, a: f64) -> f64 {
    if x > a {
        x - a
    } else if x < -a {
        x + a
    } else {
        0.0
    }
}
