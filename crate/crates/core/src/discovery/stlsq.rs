use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::library::RegressionProblem;
use super::model::{FitDiagnostics, FitMethod, SparseModel};
use crate::error::{NsoError, Result};
use crate::numerics::{lstsq, lstsq_many};

pub const DEFAULT_THRESHOLD: f64 = 0.01;
pub const DEFAULT_MAX_ITER: usize = 10;

/// Sequentially thresholded least squares, independently per state equation.
///
/// Each iteration fits the active columns by least squares and deactivates
/// coefficients with `|ξ_j| < λ`; the loop stops once the active set is
/// stable or after `max_iter` fits. Retained coefficients always satisfy
/// `|ξ_j| ≥ λ` and dropped ones are exactly zero.
pub fn stlsq(problem: &RegressionProblem, lambda: f64, max_iter: usize) -> Result<SparseModel> {
    if !(lambda >= 0.0) {
        return Err(NsoError::Config(format!("threshold must be >= 0, got {lambda}")));
    }
    if max_iter == 0 {
        return Err(NsoError::Config("max_iter must be at least 1".into()));
    }
    let p = problem.columns.len();
    // The first fit uses every column for every state, so share one factorization.
    let initial = lstsq_many(problem.theta.view(), problem.targets.view())?;
    let mut coefficients = Vec::with_capacity(problem.states());
    let mut diagnostics = Vec::with_capacity(problem.states());
    for state in 0..problem.states() {
        let target = problem.targets.column(state);
        let mut xi = initial.column(state).to_owned();
        let mut active = vec![true; p];
        let mut iterations = 1;
        let converged = loop {
            let next: Vec<bool> = (0..p).map(|j| active[j] && xi[j].abs() >= lambda).collect();
            for j in 0..p {
                if !next[j] {
                    xi[j] = 0.0;
                }
            }
            if !next.iter().any(|&a| a) {
                return Err(NsoError::EmptyModel { state });
            }
            if next == active {
                break true;
            }
            if iterations >= max_iter {
                break false;
            }
            active = next;
            xi = refit(problem.theta.view(), target, &active)?;
            iterations += 1;
        };
        diagnostics.push(FitDiagnostics {
            residual_norm: residual_norm(&problem.theta, target, &xi),
            iterations,
            converged,
        });
        coefficients.push(xi.to_vec());
    }
    Ok(SparseModel {
        columns: problem.columns.clone(),
        coefficients,
        method: FitMethod::Stlsq {
            threshold: lambda,
            max_iter,
        },
        diagnostics,
    })
}

fn refit(theta: ArrayView2<f64>, target: ArrayView1<f64>, active: &[bool]) -> Result<Array1<f64>> {
    let cols: Vec<usize> = (0..active.len()).filter(|&j| active[j]).collect();
    let sub = theta.select(Axis(1), &cols);
    let sol = lstsq(sub.view(), target)?;
    let mut xi = Array1::zeros(active.len());
    for (k, &j) in cols.iter().enumerate() {
        xi[j] = sol[k];
    }
    Ok(xi)
}

pub(super) fn residual_norm(theta: &Array2<f64>, target: ArrayView1<f64>, xi: &Array1<f64>) -> f64 {
    let r = theta.dot(xi) - target;
    r.dot(&r).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;
    use crate::terms::{Monomial, Primitive};
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn problem(theta: Array2<f64>, targets: Array2<f64>) -> RegressionProblem {
        // Distinct placeholder descriptors: powers of v.
        let columns = (1..=theta.ncols())
            .map(|k| Monomial::new(vec![Primitive::V; k]))
            .collect();
        RegressionProblem::new(theta, targets, columns).unwrap()
    }

    fn planted(seed: u64, rows: usize, p: usize, lambda: f64) -> (RegressionProblem, Array1<f64>) {
        let mut rng = RngStream::new(seed);
        let theta = Array2::from_shape_fn((rows, p), |_| rng.sample(StandardNormal));
        let xi = Array1::from_shape_fn(p, |j| {
            if j % 3 == 0 {
                let mag = rng.random_range(2.0 * lambda..1.0 + 2.0 * lambda);
                if rng.random_bool(0.5) { mag } else { -mag }
            } else {
                0.0
            }
        });
        let y = theta.dot(&xi).insert_axis(Axis(1));
        (problem(theta, y), xi)
    }

    #[test]
    fn recovers_planted_sparse_model() {
        let (prob, truth) = planted(3, 300, 12, 0.05);
        let model = stlsq(&prob, 0.05, 10).unwrap();
        for (a, b) in model.coefficients[0].iter().zip(truth.iter()) {
            assert_eq!(*a == 0.0, *b == 0.0);
            assert!((a - b).abs() < 1e-8);
        }
        assert!(model.diagnostics[0].converged);
        assert!(!model.warning());
    }

    #[test]
    fn all_columns_dropped_is_an_error() {
        let (prob, _) = planted(4, 100, 6, 0.05);
        match stlsq(&prob, 100.0, 10) {
            Err(NsoError::EmptyModel { state }) => assert_eq!(state, 0),
            other => panic!("expected empty model, got {other:?}"),
        }
    }

    #[test]
    fn idempotent_on_restricted_problem() {
        let mut rng = RngStream::new(8);
        let theta = Array2::from_shape_fn((200, 8), |_| rng.sample(StandardNormal));
        let noise = Array1::from_shape_fn(200, |_| 0.05 * rng.sample::<f64, _>(StandardNormal));
        let xi = Array1::from(vec![1.0, 0.0, -0.5, 0.02, 0.0, 0.3, 0.0, 0.0]);
        let y = (theta.dot(&xi) + noise).insert_axis(Axis(1));
        let prob = problem(theta, y);
        let model = stlsq(&prob, 0.1, 10).unwrap();
        let active = model.active(0);
        let again = stlsq(&prob.restrict(&active), 0.1, 10).unwrap();
        for (k, &j) in active.iter().enumerate() {
            assert!((again.coefficients[0][k] - model.coefficients[0][j]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_settings() {
        let (prob, _) = planted(1, 50, 3, 0.1);
        assert!(stlsq(&prob, -1.0, 10).is_err());
        assert!(stlsq(&prob, 0.1, 0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn thresholding_is_exact(seed in any::<u64>(), lambda in 0.01f64..0.5) {
            let mut rng = RngStream::new(seed);
            let theta = Array2::from_shape_fn((80, 7), |_| rng.sample(StandardNormal));
            let y = Array2::from_shape_fn((80, 1), |_| rng.sample::<f64, _>(StandardNormal));
            if let Ok(model) = stlsq(&problem(theta, y), lambda, 10) {
                for c in &model.coefficients[0] {
                    prop_assert!(*c == 0.0 || c.abs() >= lambda);
                }
            }
        }

        #[test]
        fn planted_recovery(seed in any::<u64>(), lambda in 0.01f64..0.2) {
            let (prob, truth) = planted(seed, 120, 9, lambda);
            let model = stlsq(&prob, lambda, 10).unwrap();
            for (a, b) in model.coefficients[0].iter().zip(truth.iter()) {
                prop_assert!((a - b).abs() < 1e-6);
            }
        }

        #[test]
        fn threshold_covaries_with_target_scale(seed in any::<u64>(), c in 0.2f64..5.0) {
            let mut rng = RngStream::new(seed);
            let theta = Array2::from_shape_fn((100, 6), |_| rng.sample(StandardNormal));
            let y = Array2::from_shape_fn((100, 1), |_| rng.sample::<f64, _>(StandardNormal));
            let prob = problem(theta, y);
            let lambda = 0.05;
            let scaled = stlsq(&prob.scale_targets(c), lambda, 10);
            let base = stlsq(&prob, lambda / c, 10);
            match (scaled, base) {
                (Ok(a), Ok(b)) => prop_assert_eq!(a.active(0), b.active(0)),
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "one side empty, the other not"),
            }
        }
    }
}
