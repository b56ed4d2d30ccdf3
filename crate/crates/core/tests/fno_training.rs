//! Training-level behaviour of the Fourier neural operator.

use std::f64::consts::PI;

use ndarray::Array2;
use nso_core::fields::{sample, Channel, FieldSpec, Kernel, SignalEnsemble, TimeGrid};
use nso_core::fno::{
    fit, loss, normalize_inputs, predict, Activation, FnoHyperparams, FnoModel,
};
use nso_core::numerics::RngStream;
use nso_core::truthsim::{reference_system, simulate, TrajectorySet};

fn small_hp(width: usize, modes: usize, batch_size: usize, epochs: usize) -> FnoHyperparams {
    FnoHyperparams {
        layers: 2,
        width,
        modes,
        proj_width: 2 * width,
        out_channels: 1,
        activation: Activation::Relu,
        learning_rate: 1e-3,
        batch_size,
        epochs,
    }
}

fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

fn sine_rows(grid: &TimeGrid, amps: &[f64]) -> SignalEnsemble {
    let values = Array2::from_shape_fn((amps.len(), grid.len()), |(r, j)| {
        amps[r] * (4.0 * PI * grid.points()[j]).sin()
    });
    SignalEnsemble::new(grid.clone(), values, Channel::Voltage).unwrap()
}

#[test]
fn learns_a_linear_map() {
    let grid = TimeGrid::unit(16).unwrap();
    let v = sample(&FieldSpec::gp(Kernel::Rbf, 1.0, 0.2), 50, &grid, &RngStream::new(3)).unwrap();
    let d = SignalEnsemble::new(grid, v.values.mapv(|x| 0.5 * x), Channel::Displacement).unwrap();
    let traj = TrajectorySet::new(v, d, None).unwrap();
    // 50 rows in batches of 10: 5 steps per epoch, 2000 steps in total.
    let mut hp = small_hp(4, 3, 10, 400);
    hp.proj_width = 16;
    let (_, report) = fit(&traj, &hp, &RngStream::new(0)).unwrap();
    assert_eq!(report.steps, 2000);
    assert!(report.final_loss < 1e-4, "final loss {}", report.final_loss);
}

#[test]
fn trained_model_is_resolution_consistent() {
    let coarse = TimeGrid::unit(100).unwrap();
    let mut g = RngStream::new(8);
    let amps: Vec<f64> = (0..200).map(|_| rand::Rng::random_range(&mut g, 0.0..1.0)).collect();
    let volts = sine_rows(&coarse, &amps);
    let traj = simulate(&reference_system("exp1").unwrap(), &volts, 10).unwrap();
    let (model, _) = fit(&traj, &small_hp(16, 12, 20, 60), &RngStream::new(1)).unwrap();

    // 199 points put every other fine node on the 100-point grid.
    let fine = TimeGrid::unit(199).unwrap();
    let test_amps = [0.3, 0.55, 0.8, 0.95];
    let at_coarse = predict(&model, &sine_rows(&coarse, &test_amps)).unwrap();
    let at_fine = predict(&model, &sine_rows(&fine, &test_amps)).unwrap();
    let sub: Vec<f64> = at_fine
        .displacement
        .values
        .rows()
        .into_iter()
        .flat_map(|r| r.iter().step_by(2).copied().collect::<Vec<_>>())
        .collect();
    let base: Vec<f64> = at_coarse.displacement.values.iter().copied().collect();
    let err = rel_l2(&sub, &base);
    assert!(err < 5e-2, "resolution mismatch {err}");
}

#[test]
fn dataset_loss_is_weighted_mean_of_batch_losses() {
    let grid = TimeGrid::unit(32).unwrap();
    let v = sample(&FieldSpec::gp(Kernel::Matern52, 1.0, 0.2), 23, &grid, &RngStream::new(5)).unwrap();
    let traj = simulate(&reference_system("exp2").unwrap(), &v, 10).unwrap();
    let (norm, _) = normalize_inputs(&v).unwrap();
    let model = FnoModel::init(&small_hp(6, 5, 10, 1), norm, &RngStream::new(2)).unwrap();
    let whole = loss(&model, &v, &[&traj.displacement]).unwrap();
    let mut acc = 0.0;
    for start in (0..23).step_by(10) {
        let range = start..(start + 10).min(23);
        let len = range.len() as f64;
        let part = loss(
            &model,
            &v.slice_rows(range.clone()),
            &[&traj.displacement.slice_rows(range)],
        )
        .unwrap();
        acc += part * len;
    }
    let mean = acc / 23.0;
    assert!((whole - mean).abs() <= 1e-12 * whole.max(1.0), "{whole} vs {mean}");
}
