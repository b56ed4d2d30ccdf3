//! Input voltage fields on an equispaced time grid: amplitude-randomized sine
//! waves and Gaussian-process draws with RBF and Matérn kernels.

use std::fmt;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{NsoError, Result};
use crate::numerics::{cholesky, RngStream, DEFAULT_JITTER};

/// `n` equispaced points from `t_start` to `t_end` inclusive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    n: usize,
    t_start: f64,
    t_end: f64,
    #[serde(skip)]
    points: Vec<f64>,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(NsoError::Dimension(format!("time grid needs n >= 2, got {n}")));
        }
        if !(t_end > t_start) || !t_start.is_finite() || !t_end.is_finite() {
            return Err(NsoError::Config(format!(
                "time grid needs t_start < t_end, got [{t_start}, {t_end}]"
            )));
        }
        let mut grid = Self {
            n,
            t_start,
            t_end,
            points: Vec::new(),
        };
        grid.fill_points();
        Ok(grid)
    }

    /// `[0, 1]` with `n` points.
    pub fn unit(n: usize) -> Result<Self> {
        Self::new(0.0, 1.0, n)
    }

    fn fill_points(&mut self) {
        let h = self.step();
        self.points = (0..self.n).map(|i| self.t_start + i as f64 * h).collect();
        self.points[self.n - 1] = self.t_end;
    }

    /// Rebuild cached points after deserialization.
    pub fn restore(mut self) -> Result<Self> {
        let grid = Self::new(self.t_start, self.t_end, self.n)?;
        self.points = grid.points;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn step(&self) -> f64 {
        (self.t_end - self.t_start) / (self.n - 1) as f64
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Every `factor`-th point starting at index 0.
    pub fn stride(&self, factor: usize) -> Result<Self> {
        if factor == 0 || factor > self.n {
            return Err(NsoError::Dimension(format!(
                "stride factor {factor} invalid for a grid of {} points",
                self.n
            )));
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        let kept = self.n.div_ceil(factor);
        let last = self.points[(kept - 1) * factor];
        Self::new(self.t_start, last, kept)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Kernel {
    #[serde(rename = "RBF")]
    Rbf,
    Matern32,
    Matern52,
}

impl Kernel {
    /// Covariance at distance `r` for the given variance and length scale.
    pub fn eval(self, r: f64, variance: f64, length_scale: f64) -> f64 {
        let r = r.abs();
        match self {
            Kernel::Rbf => variance * (-(r * r) / (2.0 * length_scale * length_scale)).exp(),
            Kernel::Matern32 => {
                let a = 3f64.sqrt() * r / length_scale;
                variance * (1.0 + a) * (-a).exp()
            }
            Kernel::Matern52 => {
                let a = 5f64.sqrt() * r / length_scale;
                let q = 5.0 * r * r / (3.0 * length_scale * length_scale);
                variance * (1.0 + a + q) * (-a).exp()
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Rbf => "RBF",
            Kernel::Matern32 => "Matern32",
            Kernel::Matern52 => "Matern52",
        }
    }
}

/// Recipe for an input-field family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum FieldSpec {
    /// `A sin(omega t)` with `A ~ U[amp_lo, amp_hi]`.
    Sine {
        omega: f64,
        amp_lo: f64,
        amp_hi: f64,
    },
    /// Zero-mean stationary Gaussian process.
    #[serde(rename = "GP")]
    Gp {
        kernel: Kernel,
        variance: f64,
        length_scale: f64,
    },
}

impl FieldSpec {
    pub fn sine(omega: f64, amp_lo: f64, amp_hi: f64) -> Self {
        FieldSpec::Sine {
            omega,
            amp_lo,
            amp_hi,
        }
    }

    pub fn gp(kernel: Kernel, variance: f64, length_scale: f64) -> Self {
        FieldSpec::Gp {
            kernel,
            variance,
            length_scale,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            FieldSpec::Sine {
                omega,
                amp_lo,
                amp_hi,
            } => {
                if !(omega > 0.0) || !(amp_lo <= amp_hi) {
                    return Err(NsoError::Config(format!(
                        "sine field needs omega > 0 and amp_lo <= amp_hi, got {self}"
                    )));
                }
            }
            FieldSpec::Gp {
                variance,
                length_scale,
                ..
            } => {
                if !(variance > 0.0) || !(length_scale > 0.0) {
                    return Err(NsoError::Config(format!(
                        "GP field needs positive variance and length scale, got {self}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Short label used in tables: `Sine`, `RBF`, `Matern32`, `Matern52`.
    pub fn label(&self) -> &'static str {
        match self {
            FieldSpec::Sine { .. } => "Sine",
            FieldSpec::Gp { kernel, .. } => kernel.name(),
        }
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldSpec::Sine {
                omega,
                amp_lo,
                amp_hi,
            } => write!(f, "Sine(omega={omega}, A~U[{amp_lo}, {amp_hi}])"),
            FieldSpec::Gp {
                kernel,
                variance,
                length_scale,
            } => write!(
                f,
                "{}(variance={variance}, length_scale={length_scale})",
                kernel.name()
            ),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Voltage,
    Displacement,
    Latent,
    /// Time derivative of another channel.
    Rate,
}

/// Where an ensemble came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub spec: FieldSpec,
    pub seed: u64,
    pub stream: u64,
}

/// `N` trajectories sampled on a shared grid, one per row.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalEnsemble {
    pub grid: TimeGrid,
    pub values: Array2<f64>,
    pub channel: Channel,
    pub provenance: Option<Provenance>,
}

impl SignalEnsemble {
    pub fn new(grid: TimeGrid, values: Array2<f64>, channel: Channel) -> Result<Self> {
        if values.ncols() != grid.len() {
            return Err(NsoError::Dimension(format!(
                "ensemble rows have {} points but the grid has {}",
                values.ncols(),
                grid.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (r, c) = (pos / values.ncols(), pos % values.ncols());
            return Err(NsoError::Dimension(format!(
                "non-finite value at row {r}, time index {c}"
            )));
        }
        Ok(Self {
            grid,
            values,
            channel,
            provenance: None,
        })
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn row(&self, i: usize) -> ndarray::ArrayView1<'_, f64> {
        self.values.row(i)
    }

    /// Keep only the listed rows, in order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let values = self.values.select(ndarray::Axis(0), rows);
        Self {
            grid: self.grid.clone(),
            values,
            channel: self.channel,
            provenance: self.provenance.clone(),
        }
    }

    pub fn slice_rows(&self, range: std::ops::Range<usize>) -> Self {
        let rows: Vec<usize> = range.collect();
        self.select_rows(&rows)
    }
}

fn require_grid_ok(grid: &TimeGrid) -> Result<()> {
    if grid.len() < 2 || grid.points().len() != grid.len() {
        return Err(NsoError::Dimension("grid points are not initialised".into()));
    }
    Ok(())
}

/// Rows `A_i sin(omega t)` with `A_i ~ U[amp_lo, amp_hi]`, one substream per row.
pub fn sample_sine(
    spec: &FieldSpec,
    count: usize,
    grid: &TimeGrid,
    rng: &RngStream,
) -> Result<SignalEnsemble> {
    let FieldSpec::Sine {
        omega,
        amp_lo,
        amp_hi,
    } = *spec
    else {
        return Err(NsoError::Config(format!("sample_sine called with {spec}")));
    };
    spec.validate()?;
    require_grid_ok(grid)?;
    let t = grid.points();
    let mut values = Array2::<f64>::zeros((count, grid.len()));
    for (i, mut row) in values.rows_mut().into_iter().enumerate() {
        let mut r = rng.substream(i as u64);
        let amp = if amp_hi > amp_lo {
            r.random_range(amp_lo..amp_hi)
        } else {
            amp_lo
        };
        for (v, &tj) in row.iter_mut().zip(t) {
            *v = amp * (omega * tj).sin();
        }
    }
    Ok(SignalEnsemble::new(grid.clone(), values, Channel::Voltage)?.with_provenance(Provenance {
        spec: spec.clone(),
        seed: rng.seed(),
        stream: rng.stream(),
    }))
}

/// Covariance matrix of a GP spec evaluated on the grid.
pub fn kernel_matrix(spec: &FieldSpec, grid: &TimeGrid) -> Result<Array2<f64>> {
    let FieldSpec::Gp {
        kernel,
        variance,
        length_scale,
    } = *spec
    else {
        return Err(NsoError::Config(format!("kernel_matrix called with {spec}")));
    };
    spec.validate()?;
    require_grid_ok(grid)?;
    let t = grid.points();
    let n = t.len();
    let mut k = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        k[[i, i]] = kernel.eval(0.0, variance, length_scale);
        for j in 0..i {
            let v = kernel.eval(t[i] - t[j], variance, length_scale);
            k[[i, j]] = v;
            k[[j, i]] = v;
        }
    }
    Ok(k)
}

/// Independent draws `L z` with `L L^T = K + jitter * variance * I`.
pub fn sample_gp(
    spec: &FieldSpec,
    count: usize,
    grid: &TimeGrid,
    rng: &RngStream,
) -> Result<SignalEnsemble> {
    let k = kernel_matrix(spec, grid)?;
    let FieldSpec::Gp { variance, .. } = *spec else {
        unreachable!("kernel_matrix accepted a non-GP spec");
    };
    let l = cholesky(k.view(), DEFAULT_JITTER * variance)?;
    let n = grid.len();
    let mut values = Array2::<f64>::zeros((count, n));
    for (i, mut row) in values.rows_mut().into_iter().enumerate() {
        let mut r = rng.substream(i as u64);
        let z: Array1<f64> = (0..n).map(|_| r.sample(StandardNormal)).collect();
        row.assign(&l.dot(&z));
    }
    Ok(SignalEnsemble::new(grid.clone(), values, Channel::Voltage)?.with_provenance(Provenance {
        spec: spec.clone(),
        seed: rng.seed(),
        stream: rng.stream(),
    }))
}

/// Dispatch on the field family.
pub fn sample(
    spec: &FieldSpec,
    count: usize,
    grid: &TimeGrid,
    rng: &RngStream,
) -> Result<SignalEnsemble> {
    match spec {
        FieldSpec::Sine { .. } => sample_sine(spec, count, grid, rng),
        FieldSpec::Gp { .. } => sample_gp(spec, count, grid, rng),
    }
}
