//! Discovered white-box ODEs: integration against voltage drives and
//! human-readable rendering.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discovery::{render_equations, SparseModel};
use crate::error::{NsoError, Result};
use crate::fields::{Channel, SignalEnsemble};
use crate::truthsim::{integrate_row, Drive, HysteresisSystem, PiecewiseLinear};
use crate::terms::Term;

pub const DEFAULT_SUBSTEPS: usize = 10;

/// State equations integrated from zero initial conditions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscoveredOde {
    pub equations: Vec<Vec<Term>>,
    pub substeps: usize,
}

impl DiscoveredOde {
    pub fn new(equations: Vec<Vec<Term>>, substeps: usize) -> Result<Self> {
        if equations.is_empty() || equations.len() > 2 {
            return Err(NsoError::Config(format!(
                "models have one or two states, got {}",
                equations.len()
            )));
        }
        if substeps == 0 {
            return Err(NsoError::Config("substeps must be at least 1".into()));
        }
        let two_state = equations.len() == 2;
        if !two_state && equations.iter().flatten().any(|t| t.monomial.uses_latent()) {
            return Err(NsoError::Config(
                "single-state model references the latent state".into(),
            ));
        }
        Ok(Self {
            equations,
            substeps,
        })
    }

    pub fn from_model(model: &SparseModel, substeps: usize) -> Result<Self> {
        Self::new(model.equations(), substeps)
    }

    /// Verbatim copy of a reference system's terms, in their declared order.
    pub fn from_system(system: &HysteresisSystem, substeps: usize) -> Result<Self> {
        Self::new(system.equations.clone(), substeps)
    }

    pub fn states(&self) -> usize {
        self.equations.len()
    }
}

/// Grid index at which row `row` blew up.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowFailure {
    pub row: usize,
    pub time_index: usize,
}

/// Integrated trajectories. Rows listed in `failures` hold zeros and must be
/// excluded from any aggregate.
#[derive(Clone, Debug, PartialEq)]
pub struct Rollout {
    pub displacement: SignalEnsemble,
    pub latent: Option<SignalEnsemble>,
    pub failures: Vec<RowFailure>,
}

impl Rollout {
    pub fn succeeded_rows(&self) -> Vec<usize> {
        let mut failed = self.failures.iter().map(|f| f.row).peekable();
        (0..self.displacement.rows())
            .filter(|r| {
                if failed.peek() == Some(r) {
                    failed.next();
                    false
                } else {
                    true
                }
            })
            .collect()
    }
}

/// Integrate against piecewise-linear interpolants of the voltage rows.
pub fn integrate(ode: &DiscoveredOde, voltage: &SignalEnsemble, substeps: usize) -> Result<Rollout> {
    let grid = &voltage.grid;
    integrate_drives(ode, voltage, substeps, |r| {
        Box::new(PiecewiseLinear::new(grid, voltage.row(r).iter().copied()))
    })
}

/// Integrate with an arbitrary drive per row; `voltage` supplies the grid.
pub fn integrate_drives<'a, F>(
    ode: &DiscoveredOde,
    voltage: &'a SignalEnsemble,
    substeps: usize,
    drive_for_row: F,
) -> Result<Rollout>
where
    F: Fn(usize) -> Box<dyn Drive + 'a> + Sync,
{
    if substeps == 0 {
        return Err(NsoError::Config("substeps must be at least 1".into()));
    }
    let grid = &voltage.grid;
    let n = grid.len();
    let states = ode.states();
    let results: Vec<_> = (0..voltage.rows())
        .into_par_iter()
        .map(|r| integrate_row(&ode.equations, drive_for_row(r).as_ref(), grid, substeps))
        .collect();

    let mut values: Vec<Array2<f64>> = (0..states)
        .map(|_| Array2::zeros((voltage.rows(), n)))
        .collect();
    let mut failures = Vec::new();
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(rows) => {
                for (k, row) in rows.iter().enumerate() {
                    values[k]
                        .row_mut(r)
                        .assign(&ndarray::ArrayView1::from(row.as_slice()));
                }
            }
            Err(time_index) => failures.push(RowFailure { row: r, time_index }),
        }
    }
    let mut values = values.into_iter();
    let displacement =
        SignalEnsemble::new(grid.clone(), values.next().expect("one state"), Channel::Displacement)?;
    let latent = values
        .next()
        .map(|v| SignalEnsemble::new(grid.clone(), v, Channel::Latent))
        .transpose()?;
    Ok(Rollout {
        displacement,
        latent,
        failures,
    })
}

/// Equations by descending |coefficient|, two decimals, one line per state.
pub fn pretty_print(ode: &DiscoveredOde) -> String {
    render_equations(&ode.equations, |c| format!("{c:.2}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{sample_sine, FieldSpec, TimeGrid};
    use crate::numerics::RngStream;
    use crate::terms::Primitive::*;
    use crate::truthsim::{reference_system, simulate};
    use std::f64::consts::PI;

    fn voltages(rows: usize) -> SignalEnsemble {
        let grid = TimeGrid::unit(100).unwrap();
        sample_sine(&FieldSpec::sine(4.0 * PI, 0.0, 1.0), rows, &grid, &RngStream::new(7)).unwrap()
    }

    #[test]
    fn reference_conversion_is_bit_identical() {
        let v = voltages(20);
        for name in ["exp1", "exp2", "exp3", "exp4"] {
            let sys = reference_system(name).unwrap();
            let truth = simulate(&sys, &v, 10).unwrap();
            let ode = DiscoveredOde::from_system(&sys, 10).unwrap();
            let out = integrate(&ode, &v, 10).unwrap();
            assert!(out.failures.is_empty());
            assert_eq!(out.displacement.values, truth.displacement.values);
            assert_eq!(
                out.latent.map(|l| l.values),
                truth.latent.map(|l| l.values)
            );
        }
    }

    #[test]
    fn zero_model_gives_zero_output() {
        let ode = DiscoveredOde::new(vec![vec![Term::new(0.0, &[AbsVDot, D])]], 10).unwrap();
        let out = integrate(&ode, &voltages(5), 10).unwrap();
        assert!(out.displacement.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn blow_up_is_reported_per_row() {
        // ḋ = 50·|v̇|·d² diverges for rows with a nonzero drive.
        let ode = DiscoveredOde::new(
            vec![vec![Term::new(50.0, &[AbsVDot, D, D]), Term::new(1.0, &[VDot])]],
            10,
        )
        .unwrap();
        let grid = TimeGrid::unit(100).unwrap();
        let mut values = Array2::zeros((3, 100));
        for j in 0..100 {
            values[[1, j]] = 5.0 * (4.0 * PI * grid.points()[j]).sin();
        }
        let v = SignalEnsemble::new(grid, values, Channel::Voltage).unwrap();
        let out = integrate(&ode, &v, 10).unwrap();
        assert_eq!(out.failures.len(), 1);
        assert_eq!(out.failures[0].row, 1);
        assert_eq!(out.succeeded_rows(), vec![0, 2]);
    }

    #[test]
    fn latent_terms_need_two_states() {
        assert!(DiscoveredOde::new(vec![vec![Term::new(1.0, &[VDot, Y])]], 10).is_err());
    }

    #[test]
    fn rendering() {
        let ode = DiscoveredOde::from_system(&reference_system("exp1").unwrap(), 10).unwrap();
        assert_eq!(
            pretty_print(&ode),
            "\u{1e0b} = \u{2212}0.85\u{b7}|v\u{307}|\u{b7}d + 0.40\u{b7}|v\u{307}|\u{b7}v + 0.20\u{b7}v\u{307}"
        );
        let empty = DiscoveredOde::new(vec![vec![]], 10).unwrap();
        assert_eq!(pretty_print(&empty), "\u{1e0b} = 0");
        let two = DiscoveredOde::from_system(&reference_system("exp3").unwrap(), 10).unwrap();
        let text = pretty_print(&two);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("\u{1e0b} = "));
        assert!(lines[1].starts_with("\u{1e8f} = "));
    }
}
