//! Relative L2, RMSE and MAE over every (row, time) value of an ensemble.

use nso_core::fields::SignalEnsemble;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

/// Names used for the three metrics in tables and CSV files.
pub const METRIC_NAMES: [&str; 3] = ["R", "RMSE", "MAE"];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    /// RMSE divided by the RMS of the reference.
    pub relative_l2: f64,
    pub rmse: f64,
    pub mae: f64,
    /// Number of values aggregated (rows times time points).
    pub samples: usize,
    /// Rows excluded because the prediction for them failed.
    pub failed_rows: usize,
}

impl MetricsRecord {
    pub fn value(&self, name: &str) -> Option<f64> {
        match name {
            "R" => Some(self.relative_l2),
            "RMSE" => Some(self.rmse),
            "MAE" => Some(self.mae),
            _ => None,
        }
    }
}

/// Metrics over all rows of `predicted` against `reference`.
pub fn metrics(predicted: &SignalEnsemble, reference: &SignalEnsemble) -> Result<MetricsRecord> {
    let rows: Vec<usize> = (0..reference.rows()).collect();
    metrics_on_rows(predicted, reference, &rows, 0)
}

/// Metrics restricted to `rows`; `failed_rows` is carried into the record.
pub fn metrics_on_rows(
    predicted: &SignalEnsemble,
    reference: &SignalEnsemble,
    rows: &[usize],
    failed_rows: usize,
) -> Result<MetricsRecord> {
    if predicted.values.dim() != reference.values.dim() {
        return Err(BenchError::Metric(format!(
            "prediction shape {:?} does not match reference shape {:?}",
            predicted.values.dim(),
            reference.values.dim()
        )));
    }
    if rows.is_empty() {
        return Err(BenchError::Metric("no rows to evaluate".into()));
    }
    let (mut se, mut ae, mut ref_sq) = (0.0, 0.0, 0.0);
    for &r in rows {
        for (p, q) in predicted.row(r).iter().zip(reference.row(r)) {
            let e = p - q;
            se += e * e;
            ae += e.abs();
            ref_sq += q * q;
        }
    }
    let count = rows.len() * reference.grid.len();
    let m = count as f64;
    let ref_rms = (ref_sq / m).sqrt();
    if ref_rms == 0.0 {
        return Err(BenchError::Metric(
            "relative error is undefined for an all-zero reference".into(),
        ));
    }
    let rmse = (se / m).sqrt();
    Ok(MetricsRecord {
        relative_l2: rmse / ref_rms,
        rmse,
        mae: ae / m,
        samples: count,
        failed_rows,
    })
}
