//! Experiment harness for the two-stage operator / sparse-discovery
//! pipeline: metrics, configuration, the runner, on-disk formats, CSV and
//! SVG reports.

pub mod cli;
pub mod config;
pub mod error;
pub mod metrics;
pub mod persist;
pub mod plot;
pub mod report;
pub mod runner;

pub use config::{ExperimentConfig, ExperimentId, LatentSource};
pub use error::{BenchError, Result};
pub use metrics::{metrics, metrics_on_rows, MetricsRecord};
pub use runner::{run_experiment, RunManifest, RunOutput};
