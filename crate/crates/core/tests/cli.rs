//! End-to-end runs of the `onesided` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use onesided::{DataMatrix, DgpScenario, Noise, Replication};
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_onesided"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_csv(dir: &Path, name: &str, data: &DataMatrix, header: bool) -> PathBuf {
    let mut text = String::new();
    if header {
        let names: Vec<String> = (0..data.dim()).map(|j| format!("x{j}")).collect();
        text.push_str(&names.join(","));
        text.push('\n');
    }
    for row in data.rows() {
        let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        text.push_str(&cells.join(","));
        text.push_str("\r\n");
    }
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn sample(mu: Vec<f64>, t: usize, seed: u64) -> DataMatrix {
    Replication::generate(&DgpScenario::custom(mu, t, 0.0, Noise::Gaussian), seed, 0, 0)
        .unwrap()
        .data
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn deep_interior_sample_is_not_rejected() {
    let dir = TempDir::new().unwrap();
    let path = write_csv(dir.path(), "x.csv", &sample(vec![5.0, 5.0], 250, 1), true);
    let report = json(&run(&["test", "--input", path.to_str().unwrap()]));
    assert_eq!(report["q"], 1.0);
    assert_eq!(report["reject"], false);
    assert_eq!(report["config"]["smoother"], "step");
    assert_eq!(report["config"]["common"]["alpha"], 0.05);
    assert_eq!(report["psi_hat"].as_array().unwrap().len(), 2);
    assert_eq!(report["lambda_hat"].as_array().unwrap().len(), 2);
}

#[test]
fn strongly_negative_mean_is_rejected() {
    let dir = TempDir::new().unwrap();
    let path = write_csv(dir.path(), "x.csv", &sample(vec![-0.5], 250, 2), false);
    let report = json(&run(&[
        "test",
        "--input",
        path.to_str().unwrap(),
        "--smoother",
        "logistic",
    ]));
    assert_eq!(report["reject"], true);
    assert!(report["q"].as_f64().unwrap() < 1e-6);
}

#[test]
fn csv_format_and_out_file() {
    let dir = TempDir::new().unwrap();
    let path = write_csv(dir.path(), "x.csv", &sample(vec![0.0, 0.2], 100, 3), true);
    let out_path = dir.path().join("r.csv");
    let out = run(&[
        "test",
        "--input",
        path.to_str().unwrap(),
        "--format",
        "csv",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = fs::read_to_string(out_path).unwrap();
    assert!(text.starts_with("q1,q2,q,reject,psi_hat,lambda_hat\n"));
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn constant_column_is_a_numeric_error() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("c.csv");
    fs::write(&path, "1,2\n1,3\n1,4\n1,5\n").unwrap();
    let out = run(&["test", "--input", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("coordinate 0"));
}

#[test]
fn malformed_csv_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "a,b\n1,2\n3,oops\n").unwrap();
    let out = run(&["test", "--input", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 3, column 2"), "{err}");

    let out = run(&["test", "--input", dir.path().join("missing.csv").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gms_needs_a_seed_and_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let path = write_csv(dir.path(), "x.csv", &sample(vec![-0.1, 0.3, 0.0], 200, 4), true);
    let p = path.to_str().unwrap();
    assert_eq!(run(&["gms", "--input", p]).status.code(), Some(2));
    let a = run(&["gms", "--input", p, "--seed", "9", "--reps", "500"]);
    let b = run(&["gms", "--input", p, "--seed", "9", "--reps", "500"]);
    assert_eq!(a.stdout, b.stdout);
    let report = json(&a);
    assert_eq!(report["results"].as_array().unwrap().len(), 4);
    assert_eq!(report["config"]["seed"], 9);

    let one = json(&run(&[
        "gms", "--input", p, "--seed", "9", "--reps", "500", "--stat", "s2", "--resample",
        "bootstrap",
    ]));
    assert_eq!(one["results"][0]["stat"], "s2");
}

#[test]
fn power_rows() {
    let report = json(&run(&["power", "--cov", "1", "--c", "0", "--c", "-1"]));
    let rows = report["rows"].as_array().unwrap();
    assert!((rows[0]["power"].as_f64().unwrap() - 0.05).abs() < 1e-12);
    assert!((rows[1]["power"].as_f64().unwrap() - 0.259_511_022_841_444).abs() < 1e-12);

    let report = json(&run(&[
        "power", "--p", "4", "--rho", "0.5", "--delta", "0.2", "--delta", "0.5", "--np-bound",
    ]));
    for row in report["rows"].as_array().unwrap() {
        let lp = row["power"].as_f64().unwrap();
        let nb = row["np_bound"].as_f64().unwrap();
        assert!((lp - nb).abs() < 1e-10);
    }

    let out = run(&["power", "--cov", "1,0;0,1", "--gamma", "1,1", "--c", "-1,-1"]);
    assert_eq!(out.status.code(), Some(3));
    let out = run(&["power", "--cov", "1,0;0,1"]);
    assert_eq!(out.status.code(), Some(2));
}

const SMALL_CONFIG: &str = r#"{
    "seed": 42,
    "replications": 100,
    "tests": [
        {"kind": "smoothed", "smoother": "step", "tuner": "sic"},
        {"kind": "gms", "stat": "s1", "tuner": "sic", "reps": 100}
    ],
    "p": [2],
    "t_obs": 60,
    "noise": ["gaussian"]
}"#;

#[test]
fn simulate_writes_reproducible_outputs() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("grid.json");
    fs::write(&config, SMALL_CONFIG).unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for (out, threads) in [(&out_a, "1"), (&out_b, "3")] {
        let res = run(&[
            "simulate",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--threads",
            threads,
        ]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    }
    let csv_a = fs::read(out_a.join("rejections.csv")).unwrap();
    assert_eq!(csv_a, fs::read(out_b.join("rejections.csv")).unwrap());
    assert_eq!(
        fs::read(out_a.join("report.json")).unwrap(),
        fs::read(out_b.join("report.json")).unwrap()
    );
    // 9 null + 27 alternative cells, two tests each, plus the header
    assert_eq!(String::from_utf8(csv_a).unwrap().lines().count(), 1 + 36 * 2);

    let summary = fs::read_to_string(out_a.join("summary.txt")).unwrap();
    assert!(summary.starts_with("MNRP"));
    for eps in ["AP, eps = 0\n", "AP, eps = 0.5\n", "AP, eps = 0.8\n"] {
        assert!(summary.contains(eps), "{summary}");
    }
    let report: Value = serde_json::from_slice(&fs::read(out_a.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["seed"], 42);
    assert_eq!(report["summary"].as_array().unwrap().len(), 2 + 2 * 3);
}

#[test]
fn simulate_schema_error_names_the_field() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("grid.json");
    fs::write(&config, SMALL_CONFIG.replace("\"t_obs\": 60", "\"t_obs\": -5")).unwrap();
    let out = run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/t_obs"));
}
