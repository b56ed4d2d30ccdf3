//! Command-line front end. `run` executes a whole experiment; the staged
//! commands (`generate`, `train`, `discover`, `evaluate`) exchange files
//! through an output directory, and `report` re-renders CSV and plots from a
//! saved manifest.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nso_core::fno::{load_model, save_model};

use crate::config::{ExperimentConfig, ExperimentId};
use crate::error::{BenchError, Result};
use crate::persist::{equations_text, read_datasets, read_json, write_datasets, write_json, write_report, write_run};
use crate::runner::{
    baselines, corrupt, discover, evaluate, generate, run_experiment, stage_two_problem, train_operator, Datasets,
    EquationRecord, RunManifest,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "nso", version, about = "Operator learning and sparse hysteresis model discovery")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment id (exp1..exp6, exp5a, exp5b).
    #[arg(long, global = true)]
    experiment: Option<String>,
    /// Root seed for every random draw.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON file overriding the experiment defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; falls back to NSO_THREADS, then all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample voltage fields and simulate ground truth into <out>/data.
    Generate,
    /// Train the operator on <data> (corrupted per the experiment).
    Train {
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Sparse discovery on operator predictions, plus baselines.
    Discover {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Score the operator and discovered equations on every test family.
    Evaluate {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        equations: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// The whole pipeline with all artifacts.
    Run,
    /// Rewrite metrics, trajectory CSVs and plots from a manifest.
    Report {
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
}

/// Parse `args` (including the program name), execute, and return the exit
/// code. Messages go to stdout/stderr.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                EXIT_USAGE
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

fn thread_count(flag: Option<usize>) -> Result<usize> {
    let n = match flag {
        Some(n) => n,
        None => match std::env::var("NSO_THREADS") {
            Ok(s) => s
                .trim()
                .parse()
                .map_err(|_| BenchError::Config(format!("NSO_THREADS must be a positive integer, got '{s}'")))?,
            Err(_) => return Ok(0),
        },
    };
    if n == 0 {
        return Err(BenchError::Config("thread count must be positive".into()));
    }
    Ok(n)
}

fn execute(cli: Cli) -> Result<()> {
    let threads = thread_count(cli.common.threads)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| BenchError::Config(format!("cannot start thread pool: {e}")))?;
    pool.install(|| dispatch(cli))
}

fn resolve_config(common: &Common) -> Result<ExperimentConfig> {
    let id = common.experiment.as_deref().map(str::parse::<ExperimentId>).transpose()?;
    let mut config = match (&common.config, id) {
        (Some(path), id) => ExperimentConfig::load(path, id)?,
        (None, Some(id)) => ExperimentConfig::defaults(id),
        (None, None) => {
            return Err(BenchError::Config(format!(
                "--experiment is required (valid experiments: {})",
                ExperimentId::valid_list()
            )))
        }
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(out) = &common.out {
        config.output_dir = out.clone();
    }
    config.validate()?;
    Ok(config)
}

/// Staged commands handle one training treatment at a time.
fn single_variant(config: &ExperimentConfig) -> Result<()> {
    if config.variants().len() != 1 {
        return Err(BenchError::Config(format!(
            "{} combines several training treatments; use `run`, or stage exp5a and exp5b separately",
            config.experiment
        )));
    }
    Ok(())
}

fn load_data(config: &ExperimentConfig, data: Option<&Path>) -> Result<Datasets> {
    let dir = data.map(Path::to_path_buf).unwrap_or_else(|| config.output_dir.join("data"));
    let datasets = read_datasets(&dir)?;
    if datasets.system != config.experiment.system() {
        return Err(BenchError::Config(format!(
            "{} holds {} data but {} needs {}",
            dir.display(),
            datasets.system,
            config.experiment,
            config.experiment.system()
        )));
    }
    Ok(datasets)
}

fn required<'a>(path: &'a Option<PathBuf>, flag: &str, command: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| BenchError::Config(format!("`{command}` needs --{flag} <path>")))
}

fn dispatch(cli: Cli) -> Result<()> {
    if let Command::Report { manifest } = &cli.command {
        let path = required(manifest, "manifest", "report")?;
        let loaded: RunManifest = read_json(path)?;
        let dir = match &cli.common.out {
            Some(out) => out.clone(),
            None => path.parent().map(Path::to_path_buf).unwrap_or_default(),
        };
        write_report(&dir, &loaded)?;
        println!("report written to {}", dir.display());
        return Ok(());
    }

    let config = resolve_config(&cli.common)?;
    let out = config.output_dir.clone();
    match &cli.command {
        Command::Generate => {
            let datasets = generate(&config)?;
            write_datasets(&out.join("data"), &datasets)?;
            crate::persist::create_dir(&out)?;
            write_json(&out.join("config.json"), &config)?;
            println!("data written to {}", out.join("data").display());
        }
        Command::Train { data } => {
            single_variant(&config)?;
            let datasets = load_data(&config, data.as_deref())?;
            let variant = &config.variants()[0];
            let raw = corrupt(&config, variant, &datasets.train)?;
            let (model, _, record) = train_operator(&config, variant.label, &raw)?;
            crate::persist::create_dir(&out)?;
            let path = out.join("model.nso");
            save_model(&model, &path)?;
            write_json(&out.join("train_report.json"), &record)?;
            println!("final loss {:.6e}; model written to {}", record.final_loss, path.display());
        }
        Command::Discover { model, data } => {
            single_variant(&config)?;
            let model_path = required(model, "model", "discover")?;
            let model = load_model(model_path)?;
            let datasets = load_data(&config, data.as_deref())?;
            let variant = &config.variants()[0];
            let problem = stage_two_problem(&config, &model, &datasets.tests[0].traj)?;
            let mut equations = discover(&config, variant.label, &problem)?;
            if config.baselines {
                let raw = corrupt(&config, variant, &datasets.train)?;
                equations.extend(baselines(&config, variant.label, &raw)?);
            }
            crate::persist::create_dir(&out)?;
            write_json(&out.join("equations.json"), &equations)?;
            let text = equations_text(&equations);
            let txt = out.join("equations.txt");
            std::fs::write(&txt, &text).map_err(|e| BenchError::io(&txt, e))?;
            print!("{text}");
        }
        Command::Evaluate { model, equations, data } => {
            single_variant(&config)?;
            let model_path = required(model, "model", "evaluate")?;
            let eq_path = required(equations, "equations", "evaluate")?;
            let model = load_model(model_path)?;
            let equations: Vec<EquationRecord> = read_json(eq_path)?;
            let datasets = load_data(&config, data.as_deref())?;
            let label = config.variants()[0].label;
            let (cells, unevaluated, trajectories, _) = evaluate(&config, label, &datasets, &model, &equations)?;
            let manifest = RunManifest {
                equations,
                metrics: cells,
                unevaluated,
                trajectories,
                dropped_truth: datasets.dropped_rows(),
                ..RunManifest::new(&config)
            };
            write_report(&out, &manifest)?;
            print_metrics(&manifest);
        }
        Command::Run => {
            let run = run_experiment(&config)?;
            write_run(&out, &run)?;
            print_metrics(&run.manifest);
            println!("results written to {}", out.display());
        }
        Command::Report { .. } => unreachable!("handled above"),
    }
    Ok(())
}

fn print_metrics(manifest: &RunManifest) {
    for c in &manifest.metrics {
        println!(
            "{:<6} {:<9} {:<18} R={:.3e} RMSE={:.3e} MAE={:.3e} failed={}",
            c.experiment, c.kernel, c.method, c.record.relative_l2, c.record.rmse, c.record.mae, c.record.failed_rows
        );
    }
    for u in &manifest.unevaluated {
        println!(
            "{:<6} {:<9} {:<18} every row failed ({})",
            u.experiment, u.kernel, u.method, u.failed_rows
        );
    }
}
