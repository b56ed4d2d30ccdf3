//! Experiment identifiers and run configuration.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nso_core::discovery::{LibraryConfig, DEFAULT_MAX_ITER, DEFAULT_THRESHOLD};
use nso_core::fields::{FieldSpec, Kernel};
use nso_core::fno::FnoHyperparams;
use nso_core::symmodel::DEFAULT_SUBSTEPS;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{BenchError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentId {
    Exp1,
    Exp2,
    Exp3,
    Exp4,
    /// Both corruption studies, sharing one clean dataset.
    Exp5,
    Exp6,
    /// Noisy training displacements.
    Exp5a,
    /// Low-fidelity (downsampled) training data.
    Exp5b,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 8] = [
        ExperimentId::Exp1,
        ExperimentId::Exp2,
        ExperimentId::Exp3,
        ExperimentId::Exp4,
        ExperimentId::Exp5,
        ExperimentId::Exp6,
        ExperimentId::Exp5a,
        ExperimentId::Exp5b,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::Exp1 => "exp1",
            ExperimentId::Exp2 => "exp2",
            ExperimentId::Exp3 => "exp3",
            ExperimentId::Exp4 => "exp4",
            ExperimentId::Exp5 => "exp5",
            ExperimentId::Exp6 => "exp6",
            ExperimentId::Exp5a => "exp5a",
            ExperimentId::Exp5b => "exp5b",
        }
    }

    /// Name of the reference system that generates the data.
    pub fn system(self) -> &'static str {
        match self {
            ExperimentId::Exp1 | ExperimentId::Exp5 | ExperimentId::Exp5a | ExperimentId::Exp5b => {
                "exp1"
            }
            ExperimentId::Exp2 => "exp2",
            ExperimentId::Exp3 => "exp3",
            ExperimentId::Exp4 | ExperimentId::Exp6 => "exp4",
        }
    }

    pub fn valid_list() -> String {
        Self::ALL.map(|e| e.as_str()).join(", ")
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentId {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| {
                BenchError::Config(format!(
                    "unknown experiment '{s}'; valid experiments: {}",
                    Self::valid_list()
                ))
            })
    }
}

/// Where Stage II takes the latent channel from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatentSource {
    /// The operator's second output channel.
    Predicted,
    /// The simulator's latent trajectory (diagnostic).
    Simulated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LassoSettings {
    /// Penalty per library row. The fit uses `alpha * rows` so the amount of
    /// shrinkage does not depend on how many samples the baseline sees.
    pub alpha: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LassoSettings {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            max_iter: 10_000,
            tol: 1e-8,
        }
    }
}

/// One training-data treatment within an experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct Variant {
    pub label: &'static str,
    pub noise_level: f64,
    pub downsample: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub seed: u64,
    /// Grid points per trajectory before any downsampling.
    pub n: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Sine test rows whose operator predictions feed Stage II.
    pub stage2_functions: usize,
    pub substeps: usize,
    pub train_field: FieldSpec,
    /// Extra test families; the training family is always tested as well.
    pub test_fields: Vec<FieldSpec>,
    pub fno: FnoHyperparams,
    pub library: LibraryConfig,
    pub lambdas: Vec<f64>,
    pub max_iter: usize,
    pub lasso: LassoSettings,
    /// Fit the Lasso and raw-data STLSQ baselines.
    pub baselines: bool,
    pub noise_level: f64,
    pub downsample: usize,
    pub latent_source: LatentSource,
    /// Test rows per kernel and method kept for trajectory files and plots.
    pub plot_samples: usize,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn defaults(experiment: ExperimentId) -> Self {
        use ExperimentId::*;
        let two_state = matches!(experiment, Exp3 | Exp4 | Exp6);
        let omega = if experiment == Exp3 { 2.0 * PI } else { 4.0 * PI };
        let kernel = if two_state {
            Kernel::Matern32
        } else {
            Kernel::Matern52
        };
        let fno = FnoHyperparams {
            out_channels: if two_state { 2 } else { 1 },
            ..FnoHyperparams::default()
        };
        Self {
            experiment,
            seed: 0,
            n: 100,
            n_train: 1000,
            n_test: 1000,
            stage2_functions: 500,
            substeps: DEFAULT_SUBSTEPS,
            train_field: FieldSpec::sine(omega, 0.0, 1.0),
            test_fields: vec![
                FieldSpec::gp(Kernel::Rbf, 1.0, 0.2),
                FieldSpec::gp(kernel, 1.0, 0.2),
            ],
            fno,
            library: LibraryConfig::for_states(if two_state { 2 } else { 1 }),
            lambdas: if experiment == Exp6 {
                vec![0.1, 0.01, 0.001]
            } else {
                vec![DEFAULT_THRESHOLD]
            },
            max_iter: DEFAULT_MAX_ITER,
            lasso: LassoSettings::default(),
            baselines: !two_state,
            noise_level: if matches!(experiment, Exp5 | Exp5a) { 0.2 } else { 0.0 },
            downsample: if matches!(experiment, Exp5 | Exp5b) { 5 } else { 1 },
            latent_source: LatentSource::Predicted,
            plot_samples: 1,
            output_dir: PathBuf::from("results"),
        }
    }

    /// Defaults for `experiment` overridden key by key (recursively for
    /// objects) with `overrides`.
    pub fn with_overrides(experiment: ExperimentId, overrides: &Value) -> Result<Self> {
        let mut base = serde_json::to_value(Self::defaults(experiment))
            .expect("config serializes to JSON");
        let mut overrides = overrides.clone();
        if let Some(obj) = overrides.as_object_mut() {
            if let Some(id) = obj.remove("experiment") {
                if id != Value::String(experiment.as_str().into()) {
                    return Err(BenchError::Config(format!(
                        "config file names experiment {id} but {experiment} was requested"
                    )));
                }
            }
        } else {
            return Err(BenchError::Config("config must be a JSON object".into()));
        }
        merge(&mut base, overrides);
        let config: Self = serde_json::from_value(base)
            .map_err(|e| BenchError::Config(format!("invalid config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    /// Read overrides from a JSON file. The experiment comes from `cli_id`,
    /// falling back to the file's `experiment` key.
    pub fn load(path: &Path, cli_id: Option<ExperimentId>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        let id = match (cli_id, value.get("experiment")) {
            (Some(id), _) => id,
            (None, Some(Value::String(s))) => s.parse()?,
            _ => {
                return Err(BenchError::Config(format!(
                    "no experiment given on the command line or in {}",
                    path.display()
                )))
            }
        };
        Self::with_overrides(id, &value)
    }

    pub fn two_state(&self) -> bool {
        self.fno.out_channels == 2
    }

    pub fn variants(&self) -> Vec<Variant> {
        match self.experiment {
            ExperimentId::Exp5 => vec![
                Variant {
                    label: "exp5a",
                    noise_level: self.noise_level,
                    downsample: 1,
                },
                Variant {
                    label: "exp5b",
                    noise_level: 0.0,
                    downsample: self.downsample,
                },
            ],
            id => vec![Variant {
                label: id.as_str(),
                noise_level: self.noise_level,
                downsample: self.downsample,
            }],
        }
    }

    /// Label of the NSO method for a given threshold.
    pub fn nso_label(&self, lambda: f64) -> String {
        if self.lambdas.len() == 1 {
            "NSO".into()
        } else {
            format!("NSO-lambda-{lambda}")
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(BenchError::Config(msg));
        if self.n < 3 {
            return bad(format!("n must be at least 3, got {}", self.n));
        }
        if self.n_train == 0 || self.n_test == 0 {
            return bad("n_train and n_test must be positive".into());
        }
        if self.stage2_functions == 0 || self.stage2_functions > self.n_test {
            return bad(format!(
                "stage2_functions must be in 1..={}, got {}",
                self.n_test, self.stage2_functions
            ));
        }
        if self.substeps == 0 || self.max_iter == 0 {
            return bad("substeps and max_iter must be positive".into());
        }
        if !matches!(self.train_field, FieldSpec::Sine { .. }) {
            return bad("training fields must be a Sine family".into());
        }
        for f in std::iter::once(&self.train_field).chain(&self.test_fields) {
            f.validate().map_err(|e| BenchError::Config(e.to_string()))?;
        }
        self.fno
            .validate()
            .map_err(|e| BenchError::Config(e.to_string()))?;
        if self.n_train < self.fno.batch_size {
            return bad(format!(
                "n_train {} is smaller than the batch size {}",
                self.n_train, self.fno.batch_size
            ));
        }
        self.library
            .validate()
            .map_err(|e| BenchError::Config(e.to_string()))?;
        let states = if self.two_state() { 2 } else { 1 };
        let sys_states = if matches!(self.experiment.system(), "exp3" | "exp4") { 2 } else { 1 };
        if states != sys_states {
            return bad(format!(
                "{} needs fno.out_channels = {sys_states}",
                self.experiment
            ));
        }
        if self.library.features.iter().any(|f| f.is_latent()) && states == 1 {
            return bad("library uses latent features for a single-state system".into());
        }
        if self.lambdas.is_empty() || self.lambdas.iter().any(|l| !(*l >= 0.0)) {
            return bad("lambdas must be a nonempty list of non-negative values".into());
        }
        if !(self.lasso.alpha > 0.0) || !(self.lasso.tol > 0.0) || self.lasso.max_iter == 0 {
            return bad("lasso needs alpha > 0, tol > 0 and max_iter > 0".into());
        }
        if !(self.noise_level >= 0.0) || !self.noise_level.is_finite() {
            return bad(format!("noise_level must be >= 0, got {}", self.noise_level));
        }
        if self.downsample == 0 || self.n.div_ceil(self.downsample) < 3 {
            return bad(format!(
                "downsample factor {} leaves fewer than 3 of {} grid points",
                self.downsample, self.n
            ));
        }
        Ok(())
    }
}

fn merge(base: &mut Value, overrides: Value) {
    match (base, overrides) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn ids_round_trip_and_unknown_lists_valid_ids() {
        for id in ExperimentId::ALL {
            assert_eq!(id.as_str().parse::<ExperimentId>().unwrap(), id);
        }
        let err = "exp9".parse::<ExperimentId>().unwrap_err().to_string();
        assert!(err.contains("exp1, exp2, exp3, exp4, exp5, exp6, exp5a, exp5b"), "{err}");
    }

    #[test]
    fn defaults_are_valid_for_every_experiment() {
        for id in ExperimentId::ALL {
            let c = ExperimentConfig::defaults(id);
            c.validate().unwrap();
            assert_eq!((c.n_train, c.n_test, c.stage2_functions, c.n), (1000, 1000, 500, 100));
        }
        let c = ExperimentConfig::defaults(ExperimentId::Exp6);
        assert_eq!(c.lambdas, vec![0.1, 0.01, 0.001]);
        assert!(c.two_state());
        assert_eq!(ExperimentConfig::defaults(ExperimentId::Exp5).variants().len(), 2);
    }

    #[test]
    fn overrides_merge_nested_keys() {
        let c = ExperimentConfig::with_overrides(
            ExperimentId::Exp1,
            &json!({"n_train": 300, "fno": {"epochs": 150}}),
        )
        .unwrap();
        assert_eq!((c.n_train, c.fno.epochs, c.fno.width), (300, 150, 64));
    }

    #[test]
    fn zero_training_rows_is_a_config_error() {
        let err = ExperimentConfig::with_overrides(ExperimentId::Exp1, &json!({"n_train": 0}))
            .unwrap_err();
        assert!(err.is_usage());
        assert!(ExperimentConfig::with_overrides(ExperimentId::Exp1, &json!({"bogus": 1})).is_err());
        assert!(ExperimentConfig::with_overrides(ExperimentId::Exp1, &json!({"experiment": "exp2"}))
            .is_err());
    }
}
