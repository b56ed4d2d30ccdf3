use std::path::Path;
use std::process::{Command, Output};

fn nso(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nso"))
        .args(args)
        .current_dir(cwd)
        .env_remove("NSO_THREADS")
        .output()
        .expect("binary runs")
}

const TINY: &str = r#"{
  "n": 24, "n_train": 30, "n_test": 6, "stage2_functions": 6,
  "fno": {"layers": 1, "width": 4, "modes": 4, "proj_width": 8, "batch_size": 10, "epochs": 2}
}"#;

#[test]
fn unknown_experiment_is_a_usage_error_listing_valid_ids() {
    let dir = tempfile::tempdir().unwrap();
    let out = nso(&["run", "--experiment", "exp9"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    for id in ["exp1", "exp2", "exp3", "exp4", "exp5", "exp6", "exp5a", "exp5b"] {
        assert!(err.contains(id), "{id} missing from: {err}");
    }
}

#[test]
fn discover_without_model_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = nso(&["discover", "--experiment", "exp1"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--model"));
}

#[test]
fn bad_flags_and_threads_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(nso(&["run", "--bogus"], dir.path()).status.code(), Some(1));
    assert_eq!(nso(&["frobnicate"], dir.path()).status.code(), Some(1));
    let zero = nso(&["run", "--experiment", "exp1", "--threads", "0"], dir.path());
    assert_eq!(zero.status.code(), Some(1));
    assert_eq!(nso(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn missing_input_file_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = nso(&["report", "--manifest", "nowhere/manifest.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn combined_exp5_cannot_be_staged() {
    let dir = tempfile::tempdir().unwrap();
    let out = nso(&["train", "--experiment", "exp5"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn staged_commands_chain_through_the_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.json"), TINY).unwrap();
    let common = ["--experiment", "exp1", "--config", "tiny.json", "--out", "o", "--threads", "1"];
    let step = |extra: &[&str]| {
        let mut args: Vec<&str> = extra.to_vec();
        args.extend(common);
        let out = nso(&args, dir.path());
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    };
    step(&["generate"]);
    step(&["train"]);
    step(&["discover", "--model", "o/model.nso"]);
    step(&["evaluate", "--model", "o/model.nso", "--equations", "o/equations.json"]);
    let o = dir.path().join("o");
    for f in [
        "data/index.json",
        "data/train_voltage.csv",
        "data/test_RBF_displacement.json",
        "model.nso",
        "train_report.json",
        "equations.json",
        "equations.txt",
        "metrics.csv",
        "manifest.json",
    ] {
        assert!(o.join(f).is_file(), "missing {f}");
    }

    let out = nso(&["report", "--manifest", "o/manifest.json", "--out", "again"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        std::fs::read_to_string(o.join("metrics.csv")).unwrap(),
        std::fs::read_to_string(dir.path().join("again/metrics.csv")).unwrap()
    );
}

#[test]
fn data_from_another_system_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.json"), TINY).unwrap();
    let gen = nso(&["generate", "--experiment", "exp1", "--config", "tiny.json", "--out", "o"], dir.path());
    assert_eq!(gen.status.code(), Some(0));
    let out = nso(&["train", "--experiment", "exp2", "--config", "tiny.json", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}
