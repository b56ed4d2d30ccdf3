//! Ground-truth hysteresis systems, their simulation against voltage
//! ensembles, and measurement corruptions (additive noise, downsampling).

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{NsoError, Result};
use crate::fields::{Channel, SignalEnsemble, TimeGrid};
use crate::numerics::{rk4_step, RngStream};
use crate::terms::{eval_terms, Point, Primitive, Term};

/// States whose magnitude exceeds this are treated as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// Duhem-type ODE with one (`d`) or two (`d`, latent `y`) states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HysteresisSystem {
    pub name: String,
    /// `equations[0]` drives `d`; `equations[1]`, when present, drives `y`.
    pub equations: Vec<Vec<Term>>,
}

impl HysteresisSystem {
    pub fn new(name: impl Into<String>, equations: Vec<Vec<Term>>) -> Result<Self> {
        let system = Self {
            name: name.into(),
            equations,
        };
        system.validate()?;
        Ok(system)
    }

    pub fn state_count(&self) -> usize {
        self.equations.len()
    }

    fn validate(&self) -> Result<()> {
        let states = self.state_count();
        if !(1..=2).contains(&states) {
            return Err(NsoError::Config(format!(
                "system {} has {states} states; 1 or 2 supported",
                self.name
            )));
        }
        let uses_latent = self
            .equations
            .iter()
            .flatten()
            .any(|t| t.monomial.uses_latent());
        if states == 1 && uses_latent {
            return Err(NsoError::Config(format!(
                "single-state system {} references the latent state",
                self.name
            )));
        }
        Ok(())
    }
}

/// Names accepted by [`reference_system`].
pub const REFERENCE_SYSTEMS: [&str; 4] = ["exp1", "exp2", "exp3", "exp4"];

/// The four reference systems.
pub fn reference_system(name: &str) -> Result<HysteresisSystem> {
    use Primitive::*;
    let t = Term::new;
    let equations = match name {
        "exp1" => vec![vec![
            t(0.4, &[AbsVDot, V]),
            t(-0.85, &[AbsVDot, D]),
            t(0.2, &[VDot]),
        ]],
        "exp2" => vec![vec![
            t(5.0, &[VDot]),
            t(-0.25, &[AbsVDot, D]),
            t(-0.5, &[VDot, AbsD]),
        ]],
        "exp3" => vec![
            vec![
                t(2.0, &[AbsVDot, V, Y]),
                t(-4.70, &[AbsVDot, D, Y]),
                t(3.0, &[VDot, Y]),
            ],
            vec![
                t(1.0, &[AbsVDot, V]),
                t(-2.35, &[AbsVDot, Y]),
                t(1.5, &[VDot]),
            ],
        ],
        "exp4" => vec![
            vec![
                t(4.0, &[VDot, Y]),
                t(-2.5, &[AbsVDot, D, Y]),
                t(-0.2, &[VDot, AbsD, Y]),
            ],
            vec![
                t(2.0, &[VDot]),
                t(-1.25, &[AbsVDot, Y]),
                t(-0.1, &[VDot, AbsY]),
            ],
        ],
        other => {
            return Err(NsoError::Lookup {
                kind: "reference system",
                name: other.to_string(),
            })
        }
    };
    HysteresisSystem::new(name, equations)
}

/// Continuous voltage drive: value and rate at time `t` inside grid interval
/// `interval` (the interval index lets piecewise drives avoid a search).
pub trait Drive: Sync {
    fn at(&self, interval: usize, t: f64) -> (f64, f64);
}

/// Linear interpolation between grid samples; the rate is constant per interval.
pub struct PiecewiseLinear<'a> {
    t: &'a [f64],
    v: Vec<f64>,
}

impl<'a> PiecewiseLinear<'a> {
    pub fn new(grid: &'a TimeGrid, samples: impl IntoIterator<Item = f64>) -> Self {
        Self {
            t: grid.points(),
            v: samples.into_iter().collect(),
        }
    }

    pub fn slope(&self, interval: usize) -> f64 {
        (self.v[interval + 1] - self.v[interval]) / (self.t[interval + 1] - self.t[interval])
    }
}

impl Drive for PiecewiseLinear<'_> {
    #[inline]
    fn at(&self, interval: usize, t: f64) -> (f64, f64) {
        let s = self.slope(interval);
        (self.v[interval] + s * (t - self.t[interval]), s)
    }
}

/// `A sin(omega t)` with its exact derivative.
pub struct SineDrive {
    pub amplitude: f64,
    pub omega: f64,
}

impl Drive for SineDrive {
    #[inline]
    fn at(&self, _interval: usize, t: f64) -> (f64, f64) {
        let (s, c) = (self.omega * t).sin_cos();
        (self.amplitude * s, self.amplitude * self.omega * c)
    }
}

/// Integrates state equations from zero initial conditions along one drive,
/// returning per-state samples at the grid nodes.
///
/// Failure carries the grid index at which the state became non-finite or
/// exceeded [`DIVERGENCE_LIMIT`].
pub fn integrate_row(
    equations: &[Vec<Term>],
    drive: &dyn Drive,
    grid: &TimeGrid,
    substeps: usize,
) -> std::result::Result<Vec<Vec<f64>>, usize> {
    let states = equations.len();
    let t = grid.points();
    let n = t.len();
    let mut out = vec![vec![0.0; n]; states];
    let mut state = vec![0.0; states];
    for i in 0..n - 1 {
        let h = (t[i + 1] - t[i]) / substeps as f64;
        for s in 0..substeps {
            let t0 = t[i] + s as f64 * h;
            let rhs = |tt: f64, st: &[f64], du: &mut [f64]| {
                let (v, v_dot) = drive.at(i, tt);
                let p = Point {
                    v,
                    v_dot,
                    d: st[0],
                    y: if states > 1 { st[1] } else { 0.0 },
                };
                for (k, eq) in equations.iter().enumerate() {
                    du[k] = eval_terms(eq, &p);
                }
            };
            state = rk4_step(rhs, &state, t0, h).map_err(|_| i + 1)?;
            if state.iter().any(|x| !x.is_finite() || x.abs() > DIVERGENCE_LIMIT) {
                return Err(i + 1);
            }
        }
        for k in 0..states {
            out[k][i + 1] = state[k];
        }
    }
    Ok(out)
}

/// One step in the corruption history of a trajectory set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Corruption {
    Noise { level: f64, seed: u64, stream: u64 },
    Downsample { factor: usize },
}

/// Paired voltage / displacement (/ latent) ensembles on one grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySet {
    pub voltage: SignalEnsemble,
    pub displacement: SignalEnsemble,
    pub latent: Option<SignalEnsemble>,
    pub corruption: Vec<Corruption>,
}

impl TrajectorySet {
    pub fn new(
        voltage: SignalEnsemble,
        displacement: SignalEnsemble,
        latent: Option<SignalEnsemble>,
    ) -> Result<Self> {
        let same = |e: &SignalEnsemble| e.grid == voltage.grid && e.rows() == voltage.rows();
        if !same(&displacement) || !latent.as_ref().is_none_or(same) {
            return Err(NsoError::Dimension(
                "trajectory channels must share grid and row count".into(),
            ));
        }
        Ok(Self {
            voltage,
            displacement,
            latent,
            corruption: Vec::new(),
        })
    }

    pub fn rows(&self) -> usize {
        self.voltage.rows()
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.voltage.grid
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            voltage: self.voltage.select_rows(rows),
            displacement: self.displacement.select_rows(rows),
            latent: self.latent.as_ref().map(|l| l.select_rows(rows)),
            corruption: self.corruption.clone(),
        }
    }
}

fn assemble(
    grid: &TimeGrid,
    rows: Vec<Vec<Vec<f64>>>,
    states: usize,
) -> Result<Vec<SignalEnsemble>> {
    let n = grid.len();
    (0..states)
        .map(|k| {
            let mut values = Array2::<f64>::zeros((rows.len(), n));
            for (r, row) in rows.iter().enumerate() {
                values.row_mut(r).assign(&ndarray::ArrayView1::from(&row[k]));
            }
            let channel = if k == 0 {
                Channel::Displacement
            } else {
                Channel::Latent
            };
            SignalEnsemble::new(grid.clone(), values, channel)
        })
        .collect()
}

/// Simulate every voltage row with a piecewise-linear drive.
pub fn simulate(
    system: &HysteresisSystem,
    voltage: &SignalEnsemble,
    substeps: usize,
) -> Result<TrajectorySet> {
    let grid = &voltage.grid;
    simulate_drives(system, voltage, substeps, |r| {
        Box::new(PiecewiseLinear::new(grid, voltage.row(r).iter().copied()))
    })
}

/// Simulate with an arbitrary drive per row; `voltage` supplies the grid and
/// the sampled drive values stored alongside the result.
pub fn simulate_drives<'a, F>(
    system: &HysteresisSystem,
    voltage: &'a SignalEnsemble,
    substeps: usize,
    drive_for_row: F,
) -> Result<TrajectorySet>
where
    F: Fn(usize) -> Box<dyn Drive + 'a> + Sync,
{
    if substeps == 0 {
        return Err(NsoError::Config("substeps must be at least 1".into()));
    }
    let grid = &voltage.grid;
    let rows: Vec<_> = (0..voltage.rows())
        .into_par_iter()
        .map(|r| {
            let drive = drive_for_row(r);
            integrate_row(&system.equations, drive.as_ref(), grid, substeps)
                .map_err(|time_index| NsoError::Simulation { row: r, time_index })
        })
        .collect::<Result<_>>()?;
    let mut states = assemble(grid, rows, system.state_count())?.into_iter();
    let mut displacement = states.next().expect("at least one state");
    let mut latent = states.next();
    displacement.provenance = voltage.provenance.clone();
    if let Some(l) = latent.as_mut() {
        l.provenance = voltage.provenance.clone();
    }
    TrajectorySet::new(voltage.clone(), displacement, latent)
}

/// Additive Gaussian noise on displacement rows with per-row standard
/// deviation `level * rms(row)`.
pub fn add_noise(traj: &TrajectorySet, level: f64, rng: &RngStream) -> Result<TrajectorySet> {
    if !(level >= 0.0) {
        return Err(NsoError::Config(format!("noise level must be >= 0, got {level}")));
    }
    let mut out = traj.clone();
    if level > 0.0 {
        for (r, mut row) in out.displacement.values.rows_mut().into_iter().enumerate() {
            let rms = (row.iter().map(|v| v * v).sum::<f64>() / row.len() as f64).sqrt();
            let sigma = level * rms;
            let mut g = rng.substream(r as u64);
            for v in row.iter_mut() {
                let z: f64 = g.sample(StandardNormal);
                *v += sigma * z;
            }
        }
    }
    out.corruption.push(Corruption::Noise {
        level,
        seed: rng.seed(),
        stream: rng.stream(),
    });
    Ok(out)
}

/// Keep every `factor`-th grid point starting at index 0.
pub fn downsample(traj: &TrajectorySet, factor: usize) -> Result<TrajectorySet> {
    let grid = traj.grid().stride(factor)?;
    let cols: Vec<usize> = (0..grid.len()).map(|j| j * factor).collect();
    let pick = |e: &SignalEnsemble| SignalEnsemble {
        grid: grid.clone(),
        values: e.values.select(ndarray::Axis(1), &cols),
        channel: e.channel,
        provenance: e.provenance.clone(),
    };
    let mut out = TrajectorySet::new(
        pick(&traj.voltage),
        pick(&traj.displacement),
        traj.latent.as_ref().map(pick),
    )?;
    out.corruption = traj.corruption.clone();
    out.corruption.push(Corruption::Downsample { factor });
    Ok(out)
}
