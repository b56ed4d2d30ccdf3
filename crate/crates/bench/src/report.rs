//! Metrics and trajectory CSV files, and the plots derived from a manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{BenchError, Result};
use crate::metrics::{MetricsRecord, METRIC_NAMES};
use crate::persist::create_dir;
use crate::plot::{loop_plot, PlotSeries};
use crate::runner::{MetricCell, RunManifest, TrajectoryRecord};

pub const METRICS_HEADER: [&str; 7] = [
    "experiment",
    "kernel",
    "method",
    "metric",
    "value",
    "samples",
    "failed_rows",
];

pub const TRAJECTORY_HEADER: [&str; 6] = ["sample_id", "time_index", "t", "v", "d_true", "d_pred"];

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| BenchError::csv(path, e))
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_metrics_csv(path: &Path, cells: &[MetricCell]) -> Result<()> {
    let mut w = writer(path)?;
    let err = |e| BenchError::csv(path, e);
    w.write_record(METRICS_HEADER).map_err(err)?;
    for c in cells {
        for name in METRIC_NAMES {
            let value = c.record.value(name).expect("known metric");
            w.write_record([
                c.experiment.as_str(),
                c.kernel.as_str(),
                c.method.as_str(),
                name,
                &num(value),
                &c.record.samples.to_string(),
                &c.record.failed_rows.to_string(),
            ])
            .map_err(err)?;
        }
    }
    w.flush().map_err(|e| BenchError::io(path, e))
}

/// Parse a metrics CSV back into cells, one per (experiment, kernel,
/// method), in first-appearance order.
pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricCell>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| BenchError::csv(path, e))?;
    let headers = reader.headers().map_err(|e| BenchError::csv(path, e))?.clone();
    if headers.iter().ne(METRICS_HEADER) {
        return Err(BenchError::format(path, "unexpected metrics header"));
    }
    let mut order: Vec<(String, String, String)> = Vec::new();
    let mut partial: BTreeMap<(String, String, String), [Option<f64>; 3]> = BTreeMap::new();
    let mut counts: BTreeMap<(String, String, String), (usize, usize)> = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| BenchError::csv(path, e))?;
        let key = (rec[0].to_string(), rec[1].to_string(), rec[2].to_string());
        let slot = METRIC_NAMES
            .iter()
            .position(|m| *m == &rec[3])
            .ok_or_else(|| BenchError::format(path, format!("unknown metric '{}'", &rec[3])))?;
        let parse_err = || BenchError::format(path, format!("bad number in {:?}", rec));
        let value: f64 = rec[4].parse().map_err(|_| parse_err())?;
        let samples: usize = rec[5].parse().map_err(|_| parse_err())?;
        let failed: usize = rec[6].parse().map_err(|_| parse_err())?;
        if !partial.contains_key(&key) {
            order.push(key.clone());
        }
        partial.entry(key.clone()).or_default()[slot] = Some(value);
        counts.insert(key, (samples, failed));
    }
    order
        .into_iter()
        .map(|key| {
            let vals = partial[&key];
            let (samples, failed_rows) = counts[&key];
            let [Some(relative_l2), Some(rmse), Some(mae)] = vals else {
                return Err(BenchError::format(path, format!("incomplete metrics for {key:?}")));
            };
            Ok(MetricCell {
                experiment: key.0,
                kernel: key.1,
                method: key.2,
                record: MetricsRecord {
                    relative_l2,
                    rmse,
                    mae,
                    samples,
                    failed_rows,
                },
            })
        })
        .collect()
}

fn trajectory_stem(t: &TrajectoryRecord) -> String {
    format!("{}_{}_{}", t.experiment, t.kernel, t.method)
}

pub fn write_trajectory_csv(path: &Path, t: &TrajectoryRecord) -> Result<()> {
    let mut w = writer(path)?;
    let err = |e| BenchError::csv(path, e);
    w.write_record(TRAJECTORY_HEADER).map_err(err)?;
    for j in 0..t.t.len() {
        w.write_record([
            t.sample_id.to_string(),
            j.to_string(),
            num(t.t[j]),
            num(t.v[j]),
            num(t.d_true[j]),
            num(t.d_pred[j]),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| BenchError::io(path, e))
}

/// `metrics.csv` plus one trajectory CSV per plotted sample under
/// `trajectories/`. Returns the written paths.
pub fn emit_csv(manifest: &RunManifest, dir: &Path) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let metrics = dir.join("metrics.csv");
    write_metrics_csv(&metrics, &manifest.metrics)?;
    let mut written = vec![metrics];
    if manifest.trajectories.is_empty() {
        return Ok(written);
    }
    let tdir = dir.join("trajectories");
    create_dir(&tdir)?;
    for t in &manifest.trajectories {
        let path = tdir.join(format!("{}_{}.csv", trajectory_stem(t), t.sample_id));
        write_trajectory_csv(&path, t)?;
        written.push(path);
    }
    Ok(written)
}

/// One SVG per (experiment, kernel, method) overlaying its plotted samples.
pub fn emit_plots(manifest: &RunManifest, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut groups: Vec<(String, Vec<&TrajectoryRecord>)> = Vec::new();
    for t in &manifest.trajectories {
        let stem = trajectory_stem(t);
        match groups.iter_mut().find(|(s, _)| *s == stem) {
            Some((_, g)) => g.push(t),
            None => groups.push((stem, vec![t])),
        }
    }
    if groups.is_empty() {
        return Ok(Vec::new());
    }
    let pdir = dir.join("plots");
    create_dir(&pdir)?;
    let mut written = Vec::new();
    for (stem, group) in groups {
        let series: Vec<PlotSeries> = group
            .iter()
            .map(|t| PlotSeries {
                t: &t.t,
                v: &t.v,
                d_true: &t.d_true,
                d_pred: &t.d_pred,
            })
            .collect();
        let first = group[0];
        let title = format!("{} / {} / {}", first.experiment, first.kernel, first.method);
        let path = pdir.join(format!("{stem}.svg"));
        std::fs::write(&path, loop_plot(&title, &series)).map_err(|e| BenchError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(method: &str, r: f64) -> MetricCell {
        MetricCell {
            experiment: "exp1".into(),
            kernel: "RBF".into(),
            method: method.into(),
            record: MetricsRecord {
                relative_l2: r,
                rmse: r / 3.0,
                mae: 1.0 / 7.0 + r,
                samples: 100,
                failed_rows: 2,
            },
        }
    }

    #[test]
    fn metrics_csv_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let cells = vec![cell("FNO", 0.1 + 0.2), cell("NSO", std::f64::consts::PI * 1e-7)];
        write_metrics_csv(&path, &cells).unwrap();
        assert_eq!(read_metrics_csv(&path).unwrap(), cells);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(!text.contains('\r'));
        assert_eq!(text.lines().count(), 1 + 2 * 3);
    }

    #[test]
    fn empty_manifest_gives_header_only_metrics() {
        let dir = tempfile::tempdir().unwrap();
        let written = emit_csv(&RunManifest::default(), dir.path()).unwrap();
        assert_eq!(written.len(), 1);
        let text = std::fs::read_to_string(&written[0]).unwrap();
        assert_eq!(text, "experiment,kernel,method,metric,value,samples,failed_rows\n");
        assert!(emit_plots(&RunManifest::default(), dir.path()).unwrap().is_empty());
    }
}
