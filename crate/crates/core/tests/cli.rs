use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn archsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_archsim"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn repo(path: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(path)
}

fn small_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("small.toml");
    std::fs::write(
        &path,
        format!("seed = 3\noutput_dir = \"out\"\n{extra}\n[task_set]\nn_tasks = 400\nseed = 3\n"),
    )
    .unwrap();
    path
}

#[test]
fn gen_tasks_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), "");
    let out = archsim(&["--config", config.to_str().unwrap(), "gen-tasks"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(dir.path().join("out/tasks.csv")).unwrap();
    assert_eq!(csv.lines().count(), 401);
    assert!(csv.starts_with("id,domain,complexity,risk,"));
}

#[test]
fn run_comparison_emits_reports_and_strict_fails_on_misses() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), "");
    let out = archsim(&["--config", config.to_str().unwrap(), "run-comparison"]);
    assert!(out.status.success());
    for name in ["comparison.csv", "comparison_verdicts.csv", "comparison.md"] {
        assert!(
            dir.path().join("out").join(name).is_file(),
            "{name} missing"
        );
    }
    // The uncalibrated model misses published values.
    let strict = archsim(&[
        "--config",
        config.to_str().unwrap(),
        "--strict",
        "run-comparison",
    ]);
    assert_eq!(strict.status.code(), Some(1));
}

#[test]
fn missing_model_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), "model = \"nowhere.toml\"");
    let out = archsim(&["--config", config.to_str().unwrap(), "run-comparison"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere.toml"));
}

#[test]
fn zero_tasks_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.toml");
    std::fs::write(&path, "[task_set]\nn_tasks = 0\n").unwrap();
    let out = archsim(&["--config", path.to_str().unwrap(), "run-stress"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_tasks"));
}

#[test]
fn report_prints_json_for_selected_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), "");
    let out = archsim(&[
        "--config",
        config.to_str().unwrap(),
        "report",
        "--experiment",
        "sweep",
    ]);
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json[0]["experiment"], "sweep");
}

#[test]
fn seed_flag_changes_results() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), "");
    let run = |seed: &str| {
        archsim(&[
            "--config",
            config.to_str().unwrap(),
            "--seed",
            seed,
            "report",
            "--experiment",
            "comparison",
            "--format",
            "csv",
        ])
        .stdout
    };
    assert_eq!(run("5"), run("5"));
    assert_ne!(run("5"), run("6"));
}

#[test]
fn validate_acc_accepts_sample_and_rejects_gaps() {
    let sample = repo("config/acc/invoice-matching.toml");
    let ok = archsim(&["validate-acc", sample.to_str().unwrap()]);
    assert!(ok.status.success());
    assert!(String::from_utf8_lossy(&ok.stdout).contains("valid"));

    let text = std::fs::read_to_string(&sample).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.toml");
    let kept: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with("tool_scopes"))
        .collect();
    std::fs::write(&broken, kept.join("\n")).unwrap();
    let out = archsim(&["validate-acc", broken.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("Tool inventory and scopes"));
}
