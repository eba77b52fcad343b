use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn horizon(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_horizon"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .env_remove("HORIZON_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn summary_value(dir: &Path, metric: &str) -> f64 {
    let mut reader = csv::Reader::from_path(dir.join("summary.csv")).unwrap();
    for row in reader.records() {
        let row = row.unwrap();
        if &row[0] == metric {
            return row[1].parse().unwrap();
        }
    }
    panic!("metric {metric} missing");
}

#[test]
fn merton_summary_reports_fraction() {
    let dir = tempfile::tempdir().unwrap();
    let out = horizon(&["--experiment", "merton", "--paths", "1000", "--quiet"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    assert!((summary_value(dir.path(), "fraction") - 0.416667).abs() < 1e-6);
    let text = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(text.starts_with("metric,value,std_error\n"));
    assert!(text.contains("fraction,0.416666666667,"));
}

#[test]
fn uncertain_horizon_meets_budget_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let out = horizon(&["--paths", "10000"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("uncertain-horizon:"));
    assert!(summary_value(dir.path(), "budget_residual").abs() <= 1e-4);
    let solution = fs::read_to_string(dir.path().join("solution.csv")).unwrap();
    assert_eq!(solution.lines().count(), 10_001);
}

#[test]
fn config_file_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "experiment = \"fixed-horizon\"\nn_paths = 2000\n[horizon]\nfixed = 12.0\n").unwrap();
    let out = horizon(&["--config", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(summary_value(dir.path(), "horizon"), 12.0);
    assert!(summary_value(dir.path(), "budget_residual").abs() <= 1e-10);
}

#[test]
fn invalid_config_yields_error_record() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[market]\nsigma = -1.0\n").unwrap();
    let out = horizon(&["--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let record: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(record["error"], "invalid_parameter");

    fs::write(&cfg, "paths = 3\n").unwrap();
    let out = horizon(&["--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let record: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(record["error"], "invalid_config");

    let out = horizon(&["--config", "/nonexistent/run.toml"], dir.path());
    let record: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(record["error"], "io");
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_horizon"))
        .args(["--experiment", "merton", "--paths", "100", "--quiet"])
        .env("HORIZON_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("summary.csv").exists());
    assert!(dir.path().join("solution.csv").exists());
}

#[test]
fn probability_sweep_writes_monotone_certainty_equivalents() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    fs::write(&cfg, "experiment = \"figure2-sweep\"\nn_paths = 10000\n[sweep]\nprobs = [0.2, 0.5, 0.8]\n").unwrap();
    let out = horizon(&["--config", cfg.to_str().unwrap(), "--quiet"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_path(dir.path().join("sweep.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0][3].is_empty());
    for row in &rows[1..] {
        let step: f64 = row[3].parse().unwrap();
        let se: f64 = row[4].parse().unwrap();
        assert!(step + 3.0 * se < 0.0, "step {step} se {se}");
    }
}
