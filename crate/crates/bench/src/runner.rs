//! Experiment pipeline: data generation, corruption, operator training,
//! sparse discovery, baselines and evaluation on every test family.

use std::time::Instant;

use nso_core::discovery::{build_library, lasso, stlsq, RegressionProblem, SparseModel};
use nso_core::fields::{sample, SignalEnsemble, TimeGrid};
use nso_core::fno::{fit, predict, FnoHyperparams, FnoModel, TrainReport};
use nso_core::numerics::RngStream;
use nso_core::symmodel::{integrate, DiscoveredOde};
use nso_core::truthsim::{add_noise, downsample, reference_system, HysteresisSystem, TrajectorySet};
use nso_core::NsoError;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, LatentSource, Variant};
use crate::error::{BenchError, Result, StageExt};
use crate::metrics::{metrics_on_rows, MetricsRecord};

/// RNG substreams of the run seed, one per consumer.
const STREAM_TRAIN: u64 = 0;
const STREAM_NOISE: u64 = 1;
const STREAM_FNO: u64 = 2;
/// Test family `k` (the training family first) draws from `STREAM_TEST + k`.
const STREAM_TEST: u64 = 16;

pub const METHOD_FNO: &str = "FNO";
pub const METHOD_LASSO: &str = "Lasso";
pub const METHOD_SINDY: &str = "SINDy";

/// Clean ground-truth data for one experiment.
#[derive(Clone, Debug)]
pub struct Datasets {
    pub system: String,
    pub train: TrajectorySet,
    /// Sampled training rows whose ground truth diverged and were dropped.
    pub train_dropped: Vec<usize>,
    /// The training family's test set comes first.
    pub tests: Vec<TestSet>,
}

#[derive(Clone, Debug)]
pub struct TestSet {
    pub kernel: String,
    pub traj: TrajectorySet,
    /// Indices, among the sampled rows, of drives whose ground truth
    /// diverged. They are not part of `traj`.
    pub dropped: Vec<usize>,
}

/// Sampled drives removed because the reference system diverged on them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DroppedRows {
    /// `train` or the test family label.
    pub set: String,
    pub rows: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub experiment: String,
    /// Retained modes after clamping to the training grid.
    pub modes: usize,
    pub grid_points: usize,
    pub final_loss: f64,
    pub steps: usize,
    pub loss_trace: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquationRecord {
    pub experiment: String,
    pub method: String,
    pub lambda: Option<f64>,
    pub text: String,
    pub model: SparseModel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricCell {
    pub experiment: String,
    pub kernel: String,
    pub method: String,
    pub record: MetricsRecord,
}

/// A method for which no row could be evaluated on a kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Unevaluated {
    pub experiment: String,
    pub kernel: String,
    pub method: String,
    pub failed_rows: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub experiment: String,
    pub kernel: String,
    pub method: String,
    pub sample_id: usize,
    pub t: Vec<f64>,
    pub v: Vec<f64>,
    pub d_true: Vec<f64>,
    pub d_pred: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub code_version: String,
    pub config: Option<ExperimentConfig>,
    pub training: Vec<TrainingRecord>,
    pub equations: Vec<EquationRecord>,
    pub metrics: Vec<MetricCell>,
    pub unevaluated: Vec<Unevaluated>,
    pub dropped_truth: Vec<DroppedRows>,
    pub trajectories: Vec<TrajectoryRecord>,
    /// Paths of written files, relative to the output directory.
    pub artifacts: Vec<String>,
}

impl RunManifest {
    pub fn new(config: &ExperimentConfig) -> Self {
        Self {
            code_version: env!("CARGO_PKG_VERSION").into(),
            config: Some(config.clone()),
            ..Self::default()
        }
    }

    pub fn cell(&self, experiment: &str, kernel: &str, method: &str) -> Option<&MetricsRecord> {
        self.metrics
            .iter()
            .find(|c| c.experiment == experiment && c.kernel == kernel && c.method == method)
            .map(|c| &c.record)
    }

    pub fn equation(&self, experiment: &str, method: &str) -> Option<&EquationRecord> {
        self.equations
            .iter()
            .find(|e| e.experiment == experiment && e.method == method)
    }
}

/// Wall-clock seconds per stage, kept apart from the manifest so reruns
/// produce identical manifests.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub stages: Vec<(String, f64)>,
}

impl Timings {
    fn time<T>(&mut self, name: String, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f();
        self.stages.push((name, start.elapsed().as_secs_f64()));
        out
    }
}

/// Full predictions behind a metric cell.
#[derive(Clone, Debug)]
pub struct PredictionSet {
    pub experiment: String,
    pub kernel: String,
    pub method: String,
    pub displacement: SignalEnsemble,
}

/// Everything a run produced.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub manifest: RunManifest,
    pub timings: Timings,
    pub datasets: Datasets,
    pub models: Vec<(String, FnoModel)>,
    pub predictions: Vec<PredictionSet>,
}

/// Ground truth for every drive on which the reference system stays
/// bounded, plus the indices of the drives where it diverged.
fn simulate_bounded(
    system: &HysteresisSystem,
    voltage: &SignalEnsemble,
    substeps: usize,
) -> Result<(TrajectorySet, Vec<usize>)> {
    let ode = DiscoveredOde::from_system(system, substeps).stage("generate")?;
    let rollout = integrate(&ode, voltage, substeps).stage("generate")?;
    let ok = rollout.succeeded_rows();
    if ok.is_empty() {
        return Err(BenchError::Stage {
            stage: "generate",
            source: NsoError::Simulation {
                row: rollout.failures[0].row,
                time_index: rollout.failures[0].time_index,
            },
        });
    }
    let dropped = rollout.failures.iter().map(|f| f.row).collect();
    let mut displacement = rollout.displacement.select_rows(&ok);
    displacement.provenance = voltage.provenance.clone();
    let latent = rollout.latent.map(|y| {
        let mut y = y.select_rows(&ok);
        y.provenance = voltage.provenance.clone();
        y
    });
    let traj = TrajectorySet::new(voltage.select_rows(&ok), displacement, latent).stage("generate")?;
    Ok((traj, dropped))
}

/// Sample training and test fields and simulate their ground truth.
pub fn generate(config: &ExperimentConfig) -> Result<Datasets> {
    config.validate()?;
    let root = RngStream::new(config.seed);
    let system = reference_system(config.experiment.system()).stage("generate")?;
    let grid = TimeGrid::unit(config.n).stage("generate")?;
    let train_v = sample(&config.train_field, config.n_train, &grid, &root.substream(STREAM_TRAIN))
        .stage("generate")?;
    let (train, train_dropped) = simulate_bounded(&system, &train_v, config.substeps)?;
    let tests = std::iter::once(&config.train_field)
        .chain(&config.test_fields)
        .enumerate()
        .map(|(k, spec)| {
            let rng = root.substream(STREAM_TEST + k as u64);
            let v = sample(spec, config.n_test, &grid, &rng).stage("generate")?;
            let (traj, dropped) = simulate_bounded(&system, &v, config.substeps)?;
            Ok(TestSet {
                kernel: spec.label().to_string(),
                traj,
                dropped,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Datasets {
        system: system.name,
        train,
        train_dropped,
        tests,
    })
}

impl Datasets {
    pub fn dropped_rows(&self) -> Vec<DroppedRows> {
        let mut out = Vec::new();
        if !self.train_dropped.is_empty() {
            out.push(DroppedRows {
                set: "train".into(),
                rows: self.train_dropped.clone(),
            });
        }
        for t in self.tests.iter().filter(|t| !t.dropped.is_empty()) {
            out.push(DroppedRows {
                set: t.kernel.clone(),
                rows: t.dropped.clone(),
            });
        }
        out
    }
}

/// Apply a variant's noise and downsampling to the clean training set.
pub fn corrupt(config: &ExperimentConfig, variant: &Variant, train: &TrajectorySet) -> Result<TrajectorySet> {
    let mut out = train.clone();
    if variant.noise_level > 0.0 {
        let rng = RngStream::new(config.seed).substream(STREAM_NOISE);
        out = add_noise(&out, variant.noise_level, &rng).stage("corrupt")?;
    }
    if variant.downsample > 1 {
        out = downsample(&out, variant.downsample).stage("corrupt")?;
    }
    Ok(out)
}

/// Hyperparameters actually used on a training grid of `n` points.
pub fn effective_hyperparams(config: &ExperimentConfig, n: usize) -> FnoHyperparams {
    let mut hp = config.fno.clone();
    hp.modes = hp.modes.min(FnoHyperparams::max_modes(n));
    hp
}

pub fn train_operator(
    config: &ExperimentConfig,
    label: &str,
    train: &TrajectorySet,
) -> Result<(FnoModel, TrainReport, TrainingRecord)> {
    let n = train.grid().len();
    let hp = effective_hyperparams(config, n);
    let rng = RngStream::new(config.seed).substream(STREAM_FNO);
    let (model, report) = fit(train, &hp, &rng).stage("train")?;
    let record = TrainingRecord {
        experiment: label.to_string(),
        modes: hp.modes,
        grid_points: n,
        final_loss: report.final_loss,
        steps: report.steps,
        loss_trace: report.loss_trace.clone(),
    };
    Ok((model, report, record))
}

/// Library over the operator's predictions on the first Sine test rows.
pub fn stage_two_problem(
    config: &ExperimentConfig,
    model: &FnoModel,
    sine_test: &TrajectorySet,
) -> Result<RegressionProblem> {
    let rows: Vec<usize> = (0..config.stage2_functions.min(sine_test.rows())).collect();
    let voltage = sine_test.voltage.select_rows(&rows);
    let pred = predict(model, &voltage).stage("discover")?;
    let latent = if config.two_state() {
        Some(match config.latent_source {
            LatentSource::Predicted => pred.latent.clone().ok_or_else(|| {
                BenchError::Config("two-state discovery needs a two-channel operator".into())
            })?,
            LatentSource::Simulated => sine_test
                .latent
                .as_ref()
                .ok_or_else(|| BenchError::Config("test data has no latent channel".into()))?
                .select_rows(&rows),
        })
    } else {
        None
    };
    build_library(&voltage, &pred.displacement, latent.as_ref(), &config.library).stage("discover")
}

fn equation(label: &str, method: String, lambda: Option<f64>, model: SparseModel) -> EquationRecord {
    EquationRecord {
        experiment: label.to_string(),
        method,
        lambda,
        text: model.report(),
        model,
    }
}

/// STLSQ on the operator-predicted library for every configured threshold.
pub fn discover(
    config: &ExperimentConfig,
    label: &str,
    problem: &RegressionProblem,
) -> Result<Vec<EquationRecord>> {
    config
        .lambdas
        .iter()
        .map(|&lambda| {
            let model = stlsq(problem, lambda, config.max_iter).stage("discover")?;
            Ok(equation(label, config.nso_label(lambda), Some(lambda), model))
        })
        .collect()
}

/// Lasso and STLSQ fitted directly to the (corrupted) training data.
pub fn baselines(
    config: &ExperimentConfig,
    label: &str,
    raw: &TrajectorySet,
) -> Result<Vec<EquationRecord>> {
    let problem = build_library(&raw.voltage, &raw.displacement, raw.latent.as_ref(), &config.library)
        .stage("baseline")?;
    let l = &config.lasso;
    let lasso_model = lasso(&problem, l.alpha * problem.rows() as f64, l.max_iter, l.tol).stage("baseline")?;
    let lambda = config.lambdas[0];
    let sindy = stlsq(&problem, lambda, config.max_iter).stage("baseline")?;
    Ok(vec![
        equation(label, METHOD_LASSO.into(), None, lasso_model),
        equation(label, METHOD_SINDY.into(), Some(lambda), sindy),
    ])
}

/// Per-kernel evaluation of one method.
struct Evaluation {
    cells: Vec<MetricCell>,
    unevaluated: Vec<Unevaluated>,
    trajectories: Vec<TrajectoryRecord>,
    predictions: Vec<PredictionSet>,
}

fn record_method(
    config: &ExperimentConfig,
    label: &str,
    method: &str,
    test: &TestSet,
    predicted: SignalEnsemble,
    ok_rows: Vec<usize>,
    out: &mut Evaluation,
) -> Result<()> {
    let failed = test.traj.rows() - ok_rows.len();
    if ok_rows.is_empty() {
        out.unevaluated.push(Unevaluated {
            experiment: label.into(),
            kernel: test.kernel.clone(),
            method: method.into(),
            failed_rows: failed,
        });
    } else {
        let record = metrics_on_rows(&predicted, &test.traj.displacement, &ok_rows, failed)?;
        out.cells.push(MetricCell {
            experiment: label.into(),
            kernel: test.kernel.clone(),
            method: method.into(),
            record,
        });
    }
    let t = test.traj.grid().points().to_vec();
    for &r in ok_rows.iter().take(config.plot_samples) {
        out.trajectories.push(TrajectoryRecord {
            experiment: label.into(),
            kernel: test.kernel.clone(),
            method: method.into(),
            sample_id: r,
            t: t.clone(),
            v: test.traj.voltage.row(r).to_vec(),
            d_true: test.traj.displacement.row(r).to_vec(),
            d_pred: predicted.row(r).to_vec(),
        });
    }
    out.predictions.push(PredictionSet {
        experiment: label.into(),
        kernel: test.kernel.clone(),
        method: method.into(),
        displacement: predicted,
    });
    Ok(())
}

/// Raw operator and every discovered model on every test family, against
/// the clean ground truth.
pub fn evaluate(
    config: &ExperimentConfig,
    label: &str,
    datasets: &Datasets,
    model: &FnoModel,
    equations: &[EquationRecord],
) -> Result<(Vec<MetricCell>, Vec<Unevaluated>, Vec<TrajectoryRecord>, Vec<PredictionSet>)> {
    let mut out = Evaluation {
        cells: Vec::new(),
        unevaluated: Vec::new(),
        trajectories: Vec::new(),
        predictions: Vec::new(),
    };
    let odes = equations
        .iter()
        .filter(|e| e.experiment == label)
        .map(|e| Ok((e.method.clone(), DiscoveredOde::from_model(&e.model, config.substeps).stage("evaluate")?)))
        .collect::<Result<Vec<_>>>()?;
    for test in &datasets.tests {
        let pred = predict(model, &test.traj.voltage).stage("evaluate")?;
        let all: Vec<usize> = (0..test.traj.rows()).collect();
        record_method(config, label, METHOD_FNO, test, pred.displacement, all, &mut out)?;
        for (method, ode) in &odes {
            let rollout = integrate(ode, &test.traj.voltage, config.substeps).stage("evaluate")?;
            let ok = rollout.succeeded_rows();
            record_method(config, label, method, test, rollout.displacement, ok, &mut out)?;
        }
    }
    Ok((out.cells, out.unevaluated, out.trajectories, out.predictions))
}

/// The whole pipeline for every variant of the configured experiment.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let mut timings = Timings::default();
    let datasets = timings.time("generate".into(), || generate(config))?;
    let mut manifest = RunManifest::new(config);
    manifest.dropped_truth = datasets.dropped_rows();
    let mut models = Vec::new();
    let mut predictions = Vec::new();
    for variant in config.variants() {
        let label = variant.label;
        let raw = corrupt(config, &variant, &datasets.train)?;
        let (model, _, record) =
            timings.time(format!("{label}/train"), || train_operator(config, label, &raw))?;
        manifest.training.push(record);
        let mut equations = timings.time(format!("{label}/discover"), || {
            let problem = stage_two_problem(config, &model, &datasets.tests[0].traj)?;
            discover(config, label, &problem)
        })?;
        if config.baselines {
            equations.extend(timings.time(format!("{label}/baselines"), || {
                baselines(config, label, &raw)
            })?);
        }
        let (cells, unevaluated, trajectories, preds) = timings.time(format!("{label}/evaluate"), || {
            evaluate(config, label, &datasets, &model, &equations)
        })?;
        manifest.equations.extend(equations);
        manifest.metrics.extend(cells);
        manifest.unevaluated.extend(unevaluated);
        manifest.trajectories.extend(trajectories);
        predictions.extend(preds);
        models.push((label.to_string(), model));
    }
    Ok(RunOutput {
        manifest,
        timings,
        datasets,
        models,
        predictions,
    })
}
