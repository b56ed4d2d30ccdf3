//! Integration behaviour of discovered models.

use std::f64::consts::PI;

use nso_core::fields::{sample, FieldSpec, Kernel, SignalEnsemble, TimeGrid};
use nso_core::numerics::RngStream;
use nso_core::symmodel::{integrate, DiscoveredOde};
use nso_core::terms::{Primitive::*, Term};
use nso_core::truthsim::{reference_system, simulate};

fn rel_l2(a: &SignalEnsemble, b: &SignalEnsemble) -> f64 {
    let num: f64 = (&a.values - &b.values).iter().map(|x| x * x).sum();
    let den: f64 = b.values.iter().map(|x| x * x).sum();
    (num / den).sqrt()
}

fn voltages(spec: FieldSpec, rows: usize, seed: u64) -> SignalEnsemble {
    sample(&spec, rows, &TimeGrid::unit(100).unwrap(), &RngStream::new(seed)).unwrap()
}

fn exp1_like(c: [f64; 3]) -> DiscoveredOde {
    DiscoveredOde::new(
        vec![vec![
            Term::new(c[0], &[AbsVDot, V]),
            Term::new(c[1], &[AbsVDot, D]),
            Term::new(c[2], &[VDot]),
        ]],
        10,
    )
    .unwrap()
}

#[test]
fn rounded_exp1_estimate_generalizes_to_rbf_fields() {
    let volts = voltages(FieldSpec::gp(Kernel::Rbf, 1.0, 0.2), 200, 31);
    let truth = simulate(&reference_system("exp1").unwrap(), &volts, 10).unwrap();
    let out = integrate(&exp1_like([0.39, -0.83, 0.2]), &volts, 10).unwrap();
    assert!(out.failures.is_empty());
    let r = rel_l2(&out.displacement, &truth.displacement);
    assert!(r <= 5e-2, "relative L2 {r}");
}

#[test]
fn outputs_depend_continuously_on_coefficients() {
    let volts = voltages(FieldSpec::sine(4.0 * PI, 0.0, 1.0), 50, 32);
    let base = integrate(&exp1_like([0.4, -0.85, 0.2]), &volts, 10).unwrap();
    let bumped = integrate(&exp1_like([0.4 + 1e-6, -0.85 - 1e-6, 0.2 + 1e-6]), &volts, 10).unwrap();
    let r = rel_l2(&bumped.displacement, &base.displacement);
    assert!(r > 0.0 && r < 1e-4, "relative change {r}");
}

#[test]
fn substep_refinement_is_converged() {
    let volts = voltages(FieldSpec::gp(Kernel::Matern52, 1.0, 0.2), 50, 33);
    for name in ["exp1", "exp2"] {
        let ode = DiscoveredOde::from_system(&reference_system(name).unwrap(), 10).unwrap();
        let coarse = integrate(&ode, &volts, 10).unwrap();
        let fine = integrate(&ode, &volts, 100).unwrap();
        let r = rel_l2(&coarse.displacement, &fine.displacement);
        assert!(r < 1e-5, "{name}: {r}");
    }
}
