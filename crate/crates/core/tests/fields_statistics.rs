//! Monte-Carlo checks of the Gaussian-process field sampler.

use nso_core::fields::{kernel_matrix, sample, FieldSpec, Kernel, TimeGrid};
use nso_core::numerics::RngStream;

const DRAWS: usize = 5000;

fn draws(kernel: Kernel, seed: u64) -> (nso_core::fields::SignalEnsemble, ndarray::Array2<f64>) {
    let grid = TimeGrid::unit(100).unwrap();
    let spec = FieldSpec::gp(kernel, 1.0, 0.2);
    let ens = sample(&spec, DRAWS, &grid, &RngStream::new(seed)).unwrap();
    let k = kernel_matrix(&spec, &grid).unwrap();
    (ens, k)
}

#[test]
fn empirical_covariance_matches_kernel() {
    let (ens, k) = draws(Kernel::Rbf, 2024);
    let (i, j) = (10, 30);
    let a = ens.values.column(i);
    let b = ens.values.column(j);
    let cov = a.dot(&b) / DRAWS as f64;
    // Standard error of the zero-mean Gaussian product moment.
    let se = ((k[[i, i]] * k[[j, j]] + k[[i, j]].powi(2)) / DRAWS as f64).sqrt();
    assert!((cov - k[[i, j]]).abs() < 3.0 * se, "cov {cov} vs {}", k[[i, j]]);
}

#[test]
fn marginal_variances_match_kernel_diagonal() {
    for (kernel, seed) in [(Kernel::Rbf, 7), (Kernel::Matern32, 8), (Kernel::Matern52, 9)] {
        let (ens, _) = draws(kernel, seed);
        let se = (2.0 / DRAWS as f64).sqrt();
        for t in 0..100 {
            let col = ens.values.column(t);
            let var = col.dot(&col) / DRAWS as f64;
            assert!((var - 1.0).abs() < 3.0 * se, "{kernel:?} t={t}: variance {var}");
        }
    }
}

#[test]
fn zero_variance_limit_is_flat() {
    let grid = TimeGrid::unit(100).unwrap();
    let spec = FieldSpec::gp(Kernel::Matern52, 1e-16, 0.2);
    let ens = sample(&spec, 20, &grid, &RngStream::new(1)).unwrap();
    assert!(ens.values.iter().all(|v| v.abs() < 1e-6));
}
