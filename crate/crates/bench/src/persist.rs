//! On-disk formats: ensemble CSV files with JSON sidecars, dataset
//! directories, JSON documents and the full run layout.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use nso_core::fields::{Channel, Provenance, SignalEnsemble, TimeGrid};
use nso_core::fno::save_model;
use nso_core::truthsim::{Corruption, TrajectorySet};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::report::{emit_csv, emit_plots};
use crate::runner::{Datasets, RunManifest, RunOutput, TestSet};

/// Metadata stored next to each ensemble CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSidecar {
    pub grid: TimeGrid,
    pub channel: Channel,
    pub rows: usize,
    pub provenance: Option<Provenance>,
    pub corruption: Vec<Corruption>,
}

/// Contents of a dataset directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub system: String,
    pub two_state: bool,
    /// Sampled training rows dropped because the ground truth diverged.
    pub train_dropped: Vec<usize>,
    /// Test families in evaluation order.
    pub tests: Vec<TestIndex>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestIndex {
    pub kernel: String,
    pub dropped: Vec<usize>,
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| BenchError::json(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| BenchError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| BenchError::json(path, e))
}

fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// One row per trajectory: `sample_id` then one column per time index.
/// Values carry 17 significant digits.
pub fn write_ensemble(path: &Path, ens: &SignalEnsemble, corruption: &[Corruption]) -> Result<()> {
    let n = ens.grid.len();
    let mut out = String::with_capacity(ens.rows() * n * 24 + 16);
    out.push_str("sample_id");
    for j in 0..n {
        out.push_str(&format!(",{j}"));
    }
    out.push('\n');
    for (i, row) in ens.values.rows().into_iter().enumerate() {
        out.push_str(&i.to_string());
        for v in row {
            out.push_str(&format!(",{v:.16e}"));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| BenchError::io(path, e))?;
    write_json(
        &sidecar_path(path),
        &EnsembleSidecar {
            grid: ens.grid.clone(),
            channel: ens.channel,
            rows: ens.rows(),
            provenance: ens.provenance.clone(),
            corruption: corruption.to_vec(),
        },
    )
}

pub fn read_ensemble(path: &Path) -> Result<(SignalEnsemble, Vec<Corruption>)> {
    let side: EnsembleSidecar = read_json(&sidecar_path(path))?;
    let grid = side.grid.restore()?;
    let n = grid.len();
    let mut reader = csv::Reader::from_path(path).map_err(|e| BenchError::csv(path, e))?;
    let headers = reader.headers().map_err(|e| BenchError::csv(path, e))?;
    if headers.len() != n + 1 {
        return Err(BenchError::format(
            path,
            format!("{} columns for a {n}-point grid", headers.len()),
        ));
    }
    let mut values = Array2::<f64>::zeros((side.rows, n));
    let mut count = 0;
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| BenchError::csv(path, e))?;
        if i >= side.rows {
            return Err(BenchError::format(path, "more rows than the sidecar declares"));
        }
        for j in 0..n {
            values[[i, j]] = rec[j + 1]
                .parse()
                .map_err(|_| BenchError::format(path, format!("bad number at row {i}, column {j}")))?;
        }
        count += 1;
    }
    if count != side.rows {
        return Err(BenchError::format(
            path,
            format!("{count} rows, sidecar declares {}", side.rows),
        ));
    }
    let mut ens = SignalEnsemble::new(grid, values, side.channel)?;
    ens.provenance = side.provenance;
    Ok((ens, side.corruption))
}

fn write_trajectories(dir: &Path, prefix: &str, traj: &TrajectorySet) -> Result<Vec<PathBuf>> {
    let mut paths = vec![
        dir.join(format!("{prefix}_voltage.csv")),
        dir.join(format!("{prefix}_displacement.csv")),
    ];
    write_ensemble(&paths[0], &traj.voltage, &traj.corruption)?;
    write_ensemble(&paths[1], &traj.displacement, &traj.corruption)?;
    if let Some(y) = &traj.latent {
        paths.push(dir.join(format!("{prefix}_latent.csv")));
        write_ensemble(&paths[2], y, &traj.corruption)?;
    }
    Ok(paths)
}

fn read_trajectories(dir: &Path, prefix: &str, two_state: bool) -> Result<TrajectorySet> {
    let (voltage, _) = read_ensemble(&dir.join(format!("{prefix}_voltage.csv")))?;
    let (displacement, corruption) = read_ensemble(&dir.join(format!("{prefix}_displacement.csv")))?;
    let latent = if two_state {
        Some(read_ensemble(&dir.join(format!("{prefix}_latent.csv")))?.0)
    } else {
        None
    };
    let mut traj = TrajectorySet::new(voltage, displacement, latent)?;
    traj.corruption = corruption;
    Ok(traj)
}

/// Write clean training and test data plus an index. Returns written paths.
pub fn write_datasets(dir: &Path, data: &Datasets) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let mut paths = write_trajectories(dir, "train", &data.train)?;
    for t in &data.tests {
        paths.extend(write_trajectories(dir, &format!("test_{}", t.kernel), &t.traj)?);
    }
    let index = dir.join("index.json");
    write_json(
        &index,
        &DatasetIndex {
            system: data.system.clone(),
            two_state: data.train.latent.is_some(),
            train_dropped: data.train_dropped.clone(),
            tests: data
                .tests
                .iter()
                .map(|t| TestIndex {
                    kernel: t.kernel.clone(),
                    dropped: t.dropped.clone(),
                })
                .collect(),
        },
    )?;
    paths.push(index);
    Ok(paths)
}

pub fn read_datasets(dir: &Path) -> Result<Datasets> {
    let index: DatasetIndex = read_json(&dir.join("index.json"))?;
    let train = read_trajectories(dir, "train", index.two_state)?;
    let tests = index
        .tests
        .iter()
        .map(|t| {
            Ok(TestSet {
                kernel: t.kernel.clone(),
                traj: read_trajectories(dir, &format!("test_{}", t.kernel), index.two_state)?,
                dropped: t.dropped.clone(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(Datasets {
        system: index.system,
        train,
        train_dropped: index.train_dropped,
        tests,
    })
}

fn relative(root: &Path, paths: &[PathBuf]) -> Vec<String> {
    paths
        .iter()
        .map(|p| p.strip_prefix(root).unwrap_or(p).to_string_lossy().replace('\\', "/"))
        .collect()
}

/// Write every artifact of a run under `dir`: datasets, models,
/// predictions, metrics and trajectory CSVs, plots, equations, manifest and
/// timings.
pub fn write_run(dir: &Path, run: &RunOutput) -> Result<()> {
    create_dir(dir)?;
    let mut written = write_datasets(&dir.join("data"), &run.datasets)?;
    for (label, model) in &run.models {
        let path = dir.join(format!("model_{label}.nso"));
        save_model(model, &path)?;
        written.push(path);
    }
    let pred_dir = dir.join("predictions");
    create_dir(&pred_dir)?;
    for p in &run.predictions {
        let path = pred_dir.join(format!("{}_{}_{}.csv", p.experiment, p.kernel, p.method));
        write_ensemble(&path, &p.displacement, &[])?;
        written.push(path);
    }
    let eq_path = dir.join("equations.txt");
    fs::write(&eq_path, equations_text(&run.manifest.equations)).map_err(|e| BenchError::io(&eq_path, e))?;
    written.push(eq_path);
    written.extend(emit_csv(&run.manifest, dir)?);
    written.extend(emit_plots(&run.manifest, dir)?);
    let timings = dir.join("timings.json");
    write_json(&timings, &run.timings)?;
    written.push(timings);

    let mut manifest = run.manifest.clone();
    manifest.artifacts = relative(dir, &written);
    manifest.artifacts.push("manifest.json".into());
    write_json(&dir.join("manifest.json"), &manifest)
}

/// Metrics and trajectory CSVs, plots and `manifest.json` for an existing
/// manifest.
pub fn write_report(dir: &Path, manifest: &RunManifest) -> Result<()> {
    create_dir(dir)?;
    let mut written = emit_csv(manifest, dir)?;
    written.extend(emit_plots(manifest, dir)?);
    let mut manifest = manifest.clone();
    manifest.artifacts = relative(dir, &written);
    manifest.artifacts.push("manifest.json".into());
    write_json(&dir.join("manifest.json"), &manifest)
}

/// Human-readable listing of discovered equations.
pub fn equations_text(equations: &[crate::runner::EquationRecord]) -> String {
    let mut out = String::new();
    for e in equations {
        let lambda = e.lambda.map(|l| format!(" (lambda = {l})")).unwrap_or_default();
        out.push_str(&format!("[{}] {}{lambda}\n{}\n\n", e.experiment, e.method, e.text.trim_end()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use nso_core::fields::{sample, FieldSpec, Kernel};
    use nso_core::numerics::RngStream;

    #[test]
    fn ensemble_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let grid = TimeGrid::unit(17).unwrap();
        let ens = sample(&FieldSpec::gp(Kernel::Matern32, 1.0, 0.2), 4, &grid, &RngStream::new(3)).unwrap();
        let path = dir.path().join("v.csv");
        let corruption = vec![Corruption::Downsample { factor: 2 }];
        write_ensemble(&path, &ens, &corruption).unwrap();
        let (back, c) = read_ensemble(&path).unwrap();
        assert_eq!(back, ens);
        assert_eq!(c, corruption);
    }

    #[test]
    fn truncated_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let grid = TimeGrid::unit(5).unwrap();
        let ens = SignalEnsemble::new(grid, Array2::ones((3, 5)), Channel::Voltage).unwrap();
        let path = dir.path().join("v.csv");
        write_ensemble(&path, &ens, &[]).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let cut: Vec<&str> = text.lines().take(3).collect();
        fs::write(&path, cut.join("\n") + "\n").unwrap();
        assert!(matches!(read_ensemble(&path), Err(BenchError::Format { .. })));
    }
}
