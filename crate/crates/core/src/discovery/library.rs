use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::derivative::estimate_derivative;
use crate::error::{NsoError, Result};
use crate::fields::SignalEnsemble;
use crate::terms::{Monomial, Point, Primitive};

/// Candidate-library shape: which primitives feed the polynomial expansion
/// and up to what total degree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LibraryConfig {
    pub features: Vec<Primitive>,
    pub max_degree: usize,
    #[serde(default)]
    pub include_bias: bool,
}

impl LibraryConfig {
    /// `{v, v̇, |v|, |v̇|, d, |d|}` up to degree 2.
    pub fn single_state() -> Self {
        use Primitive::*;
        Self {
            features: vec![V, VDot, AbsV, AbsVDot, D, AbsD],
            max_degree: 2,
            include_bias: false,
        }
    }

    /// Single-state features plus `{y, |y|}`, up to degree 3.
    pub fn two_state() -> Self {
        let mut c = Self::single_state();
        c.features.extend([Primitive::Y, Primitive::AbsY]);
        c.max_degree = 3;
        c
    }

    pub fn for_states(states: usize) -> Self {
        if states > 1 {
            Self::two_state()
        } else {
            Self::single_state()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_degree < 1 {
            return Err(NsoError::Config("library degree must be at least 1".into()));
        }
        if self.include_bias {
            return Err(NsoError::Config(
                "the candidate library never includes a bias column".into(),
            ));
        }
        if self.features.is_empty() {
            return Err(NsoError::Config("library needs at least one feature".into()));
        }
        let mut seen = self.features.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.features.len() {
            return Err(NsoError::Config("library features must be distinct".into()));
        }
        Ok(())
    }
}

/// All monomials of degree `1..=max_degree` over `features` (repetition
/// allowed), degree-major, then lexicographic in feature-list order.
pub fn enumerate_monomials(features: &[Primitive], max_degree: usize) -> Vec<Monomial> {
    let mut out = Vec::new();
    let mut idx = Vec::new();
    for degree in 1..=max_degree {
        idx.clear();
        idx.resize(degree, 0);
        loop {
            out.push(Monomial::new(idx.iter().map(|&i| features[i]).collect()));
            // Advance the non-decreasing index tuple.
            let mut k = degree;
            while k > 0 && idx[k - 1] == features.len() - 1 {
                k -= 1;
            }
            if k == 0 {
                break;
            }
            idx[k - 1] += 1;
            let v = idx[k - 1];
            for slot in idx.iter_mut().skip(k) {
                *slot = v;
            }
        }
    }
    out
}

/// Signals and their time derivatives on one shared grid.
#[derive(Clone, Debug)]
pub struct StageTwoSignals {
    pub voltage: SignalEnsemble,
    pub voltage_rate: SignalEnsemble,
    pub displacement: SignalEnsemble,
    pub displacement_rate: SignalEnsemble,
    pub latent: Option<(SignalEnsemble, SignalEnsemble)>,
}

impl StageTwoSignals {
    /// Rates estimated by finite differences for every channel.
    pub fn from_samples(
        voltage: &SignalEnsemble,
        displacement: &SignalEnsemble,
        latent: Option<&SignalEnsemble>,
    ) -> Result<Self> {
        Ok(Self {
            voltage: voltage.clone(),
            voltage_rate: estimate_derivative(voltage)?,
            displacement: displacement.clone(),
            displacement_rate: estimate_derivative(displacement)?,
            latent: match latent {
                Some(y) => Some((y.clone(), estimate_derivative(y)?)),
                None => None,
            },
        })
    }

    pub fn states(&self) -> usize {
        1 + usize::from(self.latent.is_some())
    }

    fn check(&self) -> Result<()> {
        let mut all = vec![
            &self.voltage,
            &self.voltage_rate,
            &self.displacement,
            &self.displacement_rate,
        ];
        if let Some((y, yd)) = &self.latent {
            all.push(y);
            all.push(yd);
        }
        let (grid, rows) = (&self.voltage.grid, self.voltage.rows());
        if all.iter().any(|e| e.grid != *grid || e.rows() != rows) {
            return Err(NsoError::Dimension(
                "library inputs must share grid and row count".into(),
            ));
        }
        Ok(())
    }
}

/// `Θ ξ ≈ Ḋ` with one target column per state equation.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionProblem {
    pub theta: Array2<f64>,
    pub targets: Array2<f64>,
    pub columns: Vec<Monomial>,
}

impl RegressionProblem {
    pub fn new(theta: Array2<f64>, targets: Array2<f64>, columns: Vec<Monomial>) -> Result<Self> {
        if theta.nrows() != targets.nrows() || theta.ncols() != columns.len() {
            return Err(NsoError::Dimension(format!(
                "library is {}x{} with {} descriptors but targets have {} rows",
                theta.nrows(),
                theta.ncols(),
                columns.len(),
                targets.nrows()
            )));
        }
        let mut sorted = columns.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != columns.len() {
            return Err(NsoError::Dimension("column descriptors must be unique".into()));
        }
        Ok(Self {
            theta,
            targets,
            columns,
        })
    }

    pub fn states(&self) -> usize {
        self.targets.ncols()
    }

    pub fn rows(&self) -> usize {
        self.theta.nrows()
    }

    /// Sub-problem on the given columns, in the given order.
    pub fn restrict(&self, cols: &[usize]) -> Self {
        Self {
            theta: self.theta.select(Axis(1), cols),
            targets: self.targets.clone(),
            columns: cols.iter().map(|&j| self.columns[j].clone()).collect(),
        }
    }

    /// Same library, targets multiplied by `c`.
    pub fn scale_targets(&self, c: f64) -> Self {
        Self {
            theta: self.theta.clone(),
            targets: &self.targets * c,
            columns: self.columns.clone(),
        }
    }
}

/// Library with every rate estimated by finite differences.
pub fn build_library(
    voltage: &SignalEnsemble,
    displacement: &SignalEnsemble,
    latent: Option<&SignalEnsemble>,
    config: &LibraryConfig,
) -> Result<RegressionProblem> {
    config.validate()?;
    let signals = StageTwoSignals::from_samples(voltage, displacement, latent)?;
    build_library_with_rates(&signals, config)
}

/// Library from explicitly supplied signals and rates. Rows are ordered
/// sample-major: row `r * n + k` is sample `r` at time index `k`.
pub fn build_library_with_rates(
    signals: &StageTwoSignals,
    config: &LibraryConfig,
) -> Result<RegressionProblem> {
    config.validate()?;
    signals.check()?;
    if signals.latent.is_none() && config.features.iter().any(|f| f.is_latent()) {
        return Err(NsoError::Config(
            "library uses latent features but no latent channel was given".into(),
        ));
    }
    let columns = enumerate_monomials(&config.features, config.max_degree);
    let rows = signals.voltage.rows();
    let n = signals.voltage.grid.len();
    let p = columns.len();
    let states = signals.states();

    let mut theta = Array2::<f64>::zeros((rows * n, p));
    let mut targets = Array2::<f64>::zeros((rows * n, states));
    theta
        .as_slice_mut()
        .expect("fresh array is contiguous")
        .par_chunks_mut(n * p)
        .zip(
            targets
                .as_slice_mut()
                .expect("fresh array is contiguous")
                .par_chunks_mut(n * states),
        )
        .enumerate()
        .for_each(|(r, (block, tgt))| {
            for k in 0..n {
                let point = Point {
                    v: signals.voltage.values[[r, k]],
                    v_dot: signals.voltage_rate.values[[r, k]],
                    d: signals.displacement.values[[r, k]],
                    y: signals
                        .latent
                        .as_ref()
                        .map_or(0.0, |(y, _)| y.values[[r, k]]),
                };
                for (j, m) in columns.iter().enumerate() {
                    block[k * p + j] = m.eval(&point);
                }
                tgt[k * states] = signals.displacement_rate.values[[r, k]];
                if let Some((_, yd)) = &signals.latent {
                    tgt[k * states + 1] = yd.values[[r, k]];
                }
            }
        });
    RegressionProblem::new(theta, targets, columns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{Channel, TimeGrid};
    use std::collections::BTreeSet;
    use Primitive::*;

    fn binom(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn two_feature_degree_two() {
        let cols = enumerate_monomials(&[V, D], 2);
        let want = vec![
            Monomial::new(vec![V]),
            Monomial::new(vec![D]),
            Monomial::new(vec![V, V]),
            Monomial::new(vec![V, D]),
            Monomial::new(vec![D, D]),
        ];
        assert_eq!(cols, want);
    }

    #[test]
    fn column_counts_match_multiset_counts() {
        for (f, deg) in [(6, 2), (8, 3), (3, 4)] {
            let feats = &LibraryConfig::two_state().features[..f];
            let cols = enumerate_monomials(feats, deg);
            let want: usize = (1..=deg).map(|k| binom(f + k - 1, k)).sum();
            assert_eq!(cols.len(), want);
            let unique: BTreeSet<_> = cols.iter().collect();
            assert_eq!(unique.len(), cols.len());
        }
        let single = LibraryConfig::single_state();
        assert_eq!(enumerate_monomials(&single.features, 2).len(), 27);
    }

    #[test]
    fn true_terms_are_columns() {
        let cols = enumerate_monomials(&LibraryConfig::single_state().features, 2);
        for m in [vec![AbsVDot, V], vec![AbsVDot, D], vec![VDot]] {
            assert!(cols.contains(&Monomial::new(m)));
        }
        let cols = enumerate_monomials(&LibraryConfig::two_state().features, 3);
        for m in [vec![AbsVDot, D, Y], vec![VDot, AbsD, Y], vec![AbsVDot, V, Y]] {
            assert!(cols.contains(&Monomial::new(m)));
        }
    }

    #[test]
    fn config_validation() {
        let mut c = LibraryConfig::single_state();
        c.max_degree = 0;
        assert!(matches!(c.validate(), Err(NsoError::Config(_))));
        let mut c = LibraryConfig::single_state();
        c.include_bias = true;
        assert!(c.validate().is_err());
    }

    #[test]
    fn rows_are_sample_major() {
        let grid = TimeGrid::unit(4).unwrap();
        let ens = |vals: Vec<f64>, ch| {
            SignalEnsemble::new(grid.clone(), Array2::from_shape_vec((2, 4), vals).unwrap(), ch)
                .unwrap()
        };
        let v = ens(vec![0., 1., 2., 3., 10., 11., 12., 13.], Channel::Voltage);
        let d = ens(vec![0.; 8], Channel::Displacement);
        let cfg = LibraryConfig {
            features: vec![V],
            max_degree: 1,
            include_bias: false,
        };
        let prob = build_library(&v, &d, None, &cfg).unwrap();
        assert_eq!(prob.theta.column(0).to_vec(), v.values.iter().copied().collect::<Vec<_>>());
        assert_eq!(prob.targets.dim(), (8, 1));
    }
}
