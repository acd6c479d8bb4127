//! Integration tests that drive the compiled `spinjj` binary end to end:
//! output determinism, override handling, and the exit-code contract
//! (0 success, 2 configuration error, 3 numerical error).

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn spinjj() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spinjj"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

#[test]
fn identical_runs_produce_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{
            "experiment": "concurrence",
            "seed": 11,
            "sweep": {"variable": "lambda_t", "start": 0.0, "stop": 1.5, "points": 11}
        }"#,
    );
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let status = spinjj()
            .args(["run", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let csv_a = fs::read(out_a.join("concurrence.csv")).unwrap();
    let csv_b = fs::read(out_b.join("concurrence.csv")).unwrap();
    assert_eq!(csv_a, csv_b, "CSV bytes differ between identical runs");
    let json_a = fs::read(out_a.join("concurrence.summary.json")).unwrap();
    let json_b = fs::read(out_b.join("concurrence.summary.json")).unwrap();
    assert_eq!(json_a, json_b, "summary bytes differ between identical runs");

    // 11 sweep rows plus the header line.
    let text = String::from_utf8(csv_a).unwrap();
    assert_eq!(text.lines().count(), 12);
    assert!(text.starts_with("lambda_t,"));
    assert!(!text.contains("NaN") && !text.contains("inf"));
}

#[test]
fn worker_count_does_not_change_output_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{
            "experiment": "concurrence",
            "sweep": {"variable": "lambda_t", "start": 0.0, "stop": 1.0, "points": 7}
        }"#,
    );
    let out_serial = dir.path().join("serial");
    let out_parallel = dir.path().join("parallel");
    let status = spinjj()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out_serial)
        .status()
        .unwrap();
    assert!(status.success());
    let status = spinjj()
        .env("SPINJJ_WORKERS", "2")
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out_parallel)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(
        fs::read(out_serial.join("concurrence.csv")).unwrap(),
        fs::read(out_parallel.join("concurrence.csv")).unwrap(),
        "row order or values changed with a parallel worker pool"
    );
}

#[test]
fn set_overrides_reach_the_model() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), r#"{"experiment": "estimate"}"#);
    let out = dir.path().join("out");
    let output = spinjj()
        .args(["run", "--config"])
        .arg(&config)
        .args(["--set", "estimate.n_spins=4e6"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", stderr_of(&output));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("estimate.summary.json")).unwrap())
            .unwrap();
    let g_collective = summary["results"]["g_collective_mhz"].as_f64().unwrap();
    assert!(
        (g_collective - 196.0).abs() < 1e-9,
        "expected sqrt(4e6)*0.098 = 196, got {g_collective}"
    );
    assert_eq!(summary["resolved"]["n_spins"].as_f64().unwrap(), 4e6);
    let stdout = stdout_of(&output);
    assert!(stdout.contains("estimate.csv"));
    assert!(stdout.contains("estimate.summary.json"));
}

#[test]
fn malformed_json_reports_the_line_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "{\n  \"experiment\": \"estimate\",\n}\n");
    let output = spinjj()
        .args(["run", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = stderr_of(&output);
    assert!(
        stderr.contains("line"),
        "expected a line number in: {stderr}"
    );
}

#[test]
fn unknown_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{"experiment": "estimate", "unknown_knob": 1}"#,
    );
    let output = spinjj()
        .args(["run", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr_of(&output).contains("unknown_knob"));
}

#[test]
fn sweep_variable_must_match_the_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{
            "experiment": "concurrence",
            "sweep": {"variable": "theta", "start": 0.0, "stop": 1.0, "points": 5}
        }"#,
    );
    let output = spinjj()
        .args(["run", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr_of(&output).contains("theta"));
}

#[test]
fn missing_config_file_exits_2() {
    let output = spinjj()
        .args(["run", "--config", "/definitely/not/here.json"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn override_without_equals_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), r#"{"experiment": "estimate"}"#);
    let output = spinjj()
        .args(["run", "--config"])
        .arg(&config)
        .args(["--set", "seed"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr_of(&output).contains("KEY=VALUE") || stderr_of(&output).contains("seed"));
}

#[test]
fn invalid_worker_count_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), r#"{"experiment": "estimate"}"#);
    let output = spinjj()
        .env("SPINJJ_WORKERS", "zero")
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr_of(&output).contains("SPINJJ_WORKERS"));
}

#[test]
fn validate_accepts_a_sound_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), r#"{"experiment": "swap-gate"}"#);
    let output = spinjj()
        .args(["validate", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "{}", stderr_of(&output));
    assert!(stdout_of(&output).contains("configuration valid"));
    // Validation must not produce output files.
    assert!(fs::read_dir(dir.path()).unwrap().count() == 1);
}

#[test]
fn validate_rejects_infeasible_physics() {
    let dir = tempfile::tempdir().unwrap();
    // A phase-gate schedule needs equal ensemble couplings.
    let config = write_config(
        dir.path(),
        r#"{"experiment": "phase-gate", "params": {"g2": 10.0}}"#,
    );
    let output = spinjj()
        .args(["validate", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn out_flag_overrides_the_configured_path() {
    let dir = tempfile::tempdir().unwrap();
    let configured = dir.path().join("configured");
    let flagged = dir.path().join("flagged");
    let body = format!(
        r#"{{"experiment": "estimate", "output_path": {}}}"#,
        serde_json::to_string(configured.to_str().unwrap()).unwrap()
    );
    let config = write_config(dir.path(), &body);
    let status = spinjj()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&flagged)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(flagged.join("estimate.csv").exists());
    assert!(!configured.exists());
}
