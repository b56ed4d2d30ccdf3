//! Sparse regression recovers the reference exp1 equation from clean data.

use std::f64::consts::PI;

use ndarray::Array2;
use nso_core::discovery::{build_library_with_rates, stlsq, LibraryConfig, StageTwoSignals};
use nso_core::fields::{Channel, SignalEnsemble, TimeGrid};
use nso_core::numerics::RngStream;
use rand::Rng;
use nso_core::terms::{eval_terms, Monomial, Point, Primitive::*};
use nso_core::truthsim::{reference_system, simulate_drives, SineDrive};

#[test]
fn stlsq_recovers_exp1_from_analytic_sine_data() {
    let grid = TimeGrid::unit(100).unwrap();
    let omega = 4.0 * PI;
    let mut g = RngStream::new(17);
    let amps: Vec<f64> = (0..100).map(|_| g.random_range(0.0..1.0)).collect();
    let values = Array2::from_shape_fn((100, grid.len()), |(r, j)| {
        amps[r] * (omega * grid.points()[j]).sin()
    });
    let volts = SignalEnsemble::new(grid.clone(), values, Channel::Voltage).unwrap();
    let sys = reference_system("exp1").unwrap();
    let traj = simulate_drives(&sys, &volts, 100, |r| {
        Box::new(SineDrive {
            amplitude: amps[r],
            omega,
        })
    })
    .unwrap();
    let v_dot = Array2::from_shape_fn((volts.rows(), grid.len()), |(r, j)| {
        amps[r] * omega * (omega * grid.points()[j]).cos()
    });
    // The exact rate of a simulated state is the right-hand side evaluated
    // along the trajectory.
    let d_dot = Array2::from_shape_fn(v_dot.dim(), |(r, j)| {
        let p = Point {
            v: volts.values[[r, j]],
            v_dot: v_dot[[r, j]],
            d: traj.displacement.values[[r, j]],
            y: 0.0,
        };
        eval_terms(&sys.equations[0], &p)
    });
    let signals = StageTwoSignals {
        voltage: volts.clone(),
        voltage_rate: SignalEnsemble::new(grid.clone(), v_dot, Channel::Rate).unwrap(),
        displacement: traj.displacement.clone(),
        displacement_rate: SignalEnsemble::new(grid.clone(), d_dot, Channel::Rate).unwrap(),
        latent: None,
    };
    let problem = build_library_with_rates(&signals, &LibraryConfig::single_state()).unwrap();
    assert_eq!(problem.columns.len(), 27);
    let model = stlsq(&problem, 0.01, 10).unwrap();
    let want = [
        (Monomial::new(vec![AbsVDot, V]), 0.4),
        (Monomial::new(vec![AbsVDot, D]), -0.85),
        (Monomial::new(vec![VDot]), 0.2),
    ];
    assert_eq!(model.active_count(0), 3, "{}", model.report());
    for (m, c) in want {
        let got = model.coefficient(0, &m);
        assert!(((got - c) / c).abs() < 0.02, "{m}: {got} vs {c}");
    }
}
