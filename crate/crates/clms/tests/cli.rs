use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use clms::config::{ExperimentConfig, SCHEMA};
use serde_json::Value;

fn clms(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clms"))
        .args(args)
        .output()
        .unwrap()
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut all = vec!["--out", dir.to_str().unwrap()];
    all.extend_from_slice(args);
    clms(&all)
}

fn write_config(dir: &Path, json: &str) -> String {
    let p = dir.join("config.json");
    fs::write(&p, json).unwrap();
    p.to_str().unwrap().to_string()
}

/// Data rows of a CSV: after the header, before the metadata block.
fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .skip(1)
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect()
}

#[test]
fn small_table2_run_writes_all_artifacts_deterministically() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = run_in(
            d.path(),
            &[
                "reproduce-table2",
                "--reps",
                "1",
                "--budget",
                "5",
                "--seed",
                "3",
            ],
        );
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    for f in ["table2.json", "fig2_curve.csv", "fig1_errors.csv"] {
        let x = fs::read(a.path().join(f)).unwrap();
        assert_eq!(
            x,
            fs::read(b.path().join(f)).unwrap(),
            "{f} differs between runs"
        );
    }
    let table: Value =
        serde_json::from_slice(&fs::read(a.path().join("table2.json")).unwrap()).unwrap();
    let methods: Vec<&str> = table["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["method"].as_str().unwrap())
        .collect();
    assert_eq!(methods, ["Data-based", "Data-based AT", "Closed-loop"]);
    assert_eq!(table["metadata"]["seed"], 3);
    assert_eq!(
        table["metadata"]["config_sha256"].as_str().unwrap().len(),
        64
    );
    let curve = fs::read_to_string(a.path().join("fig2_curve.csv")).unwrap();
    assert!(curve.starts_with("trial,mean,std\n"));
    assert_eq!(csv_rows(&curve).len(), 5);
    assert!(!curve.contains('\r'));
    assert!(curve
        .trim_end()
        .lines()
        .last()
        .unwrap()
        .starts_with("# version="));
}

#[test]
fn metadata_hash_tracks_the_seed() {
    let d = tempfile::tempdir().unwrap();
    let mut a = ExperimentConfig::default();
    let h0 = a.hash();
    a.seed = 1;
    assert_ne!(a.hash(), h0);
    let out = run_in(d.path(), &["bo-demo", "--seed", "1"]);
    assert!(out.status.success());
    let csv = fs::read_to_string(d.path().join("bo_demo.csv")).unwrap();
    assert!(csv.contains(&format!("# config_sha256={}\n", {
        let c = ExperimentConfig {
            seed: 1,
            ..Default::default()
        };
        c.hash()
    })));
}

#[test]
fn perfect_model_trace_halves_the_state() {
    let d = tempfile::tempdir().unwrap();
    let out = run_in(d.path(), &["simulate", "--model", "perfect"]);
    assert!(out.status.success());
    let rows = csv_rows(&fs::read_to_string(d.path().join("trace.csv")).unwrap());
    assert_eq!(rows.len(), 11);
    for (k, r) in rows.iter().enumerate() {
        assert_eq!(r[0], k as f64);
        assert!((r[1] - 3.0 * 0.5f64.powi(k as i32)).abs() < 1e-12);
    }
}

#[test]
fn zero_model_leaves_a_steady_error() {
    let d = tempfile::tempdir().unwrap();
    let out = run_in(d.path(), &["simulate", "--model", "zero"]);
    assert!(out.status.success());
    let rows = csv_rows(&fs::read_to_string(d.path().join("trace.csv")).unwrap());
    let last = rows.last().unwrap()[1];
    assert!(last.abs() > 1.0, "{last}");
    assert!((last - rows[rows.len() - 2][1]).abs() < 1e-3);
}

#[test]
fn zero_initial_state_gives_zero_columns() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(
        d.path(),
        r#"{"plant": {"x0": 0.0}, "simulate": {"model": "perfect"}}"#,
    );
    let out = run_in(d.path(), &["simulate", "--config", &cfg]);
    assert!(out.status.success());
    let rows = csv_rows(&fs::read_to_string(d.path().join("trace.csv")).unwrap());
    for r in &rows[..rows.len() - 1] {
        assert_eq!((r[1], r[2]), (0.0, 0.0));
    }
    assert_eq!(rows.last().unwrap()[1], 0.0);
}

#[test]
fn kernel_model_from_config_is_simulated() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(
        d.path(),
        r#"{"simulate": {"model": {"kernel": {"kernel": {"family": "Gaussian", "phi": [2.4]}, "extra": 0.001}}}}"#,
    );
    let out = run_in(d.path(), &["simulate", "--config", &cfg]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    let cost: f64 = stdout.trim().rsplit(' ').next().unwrap().parse().unwrap();
    assert!(cost < 30.0, "{stdout}");
}

#[test]
fn data_mode_selects_linear() {
    let d = tempfile::tempdir().unwrap();
    let out = run_in(d.path(), &["select", "--mode", "data"]);
    assert!(out.status.success());
    let v: Value =
        serde_json::from_slice(&fs::read(d.path().join("selection.json")).unwrap()).unwrap();
    assert_eq!(v["mode"], "data");
    assert_eq!(v["result"]["family"], "Linear");
    assert_eq!(v["result"]["search_rollouts"], 0);
    let hist = fs::read_to_string(d.path().join("history.csv")).unwrap();
    assert!(hist.starts_with("trial,kernel_index,phi1,extra,cost,incumbent\n"));
}

#[test]
fn verify_with_zero_draws_passes_with_a_warning() {
    let d = tempfile::tempdir().unwrap();
    let out = run_in(d.path(), &["verify", "--draws", "0"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    assert!(String::from_utf8_lossy(&out.stdout).contains("scaling bound: 0/0"));
}

#[test]
fn default_verify_passes_every_check() {
    let d = tempfile::tempdir().unwrap();
    let out = run_in(d.path(), &["verify"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let v: Value =
        serde_json::from_slice(&fs::read(d.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(v["scaling"]["passed"], 200);
    assert_eq!(v["demo_passed"], true);
}

#[test]
fn bo_demo_reaches_the_minimizer() {
    let d = tempfile::tempdir().unwrap();
    let out = run_in(d.path(), &["bo-demo"]);
    assert!(out.status.success());
    let rows = csv_rows(&fs::read_to_string(d.path().join("bo_demo.csv")).unwrap());
    assert_eq!(rows.len(), 30);
    let best = rows.iter().min_by(|a, b| a[2].total_cmp(&b[2])).unwrap();
    assert!((best[1] - 0.3).abs() < 1e-2);
    assert!(rows.windows(2).all(|w| w[1][3] <= w[0][3]));
}

#[test]
fn config_errors_exit_with_two() {
    let d = tempfile::tempdir().unwrap();
    for bad in [
        r#"{"unknown": 1}"#,
        r#"{"folds": 1}"#,
        r#"{"kernels": []}"#,
        "not json",
        r#"{"plant": {"guard": -1}}"#,
    ] {
        let cfg = write_config(d.path(), bad);
        let out = run_in(d.path(), &["bo-demo", "--config", &cfg]);
        assert_eq!(out.status.code(), Some(2), "{bad}");
    }
    assert_eq!(
        run_in(d.path(), &["bo-demo", "--config", "/nonexistent.json"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run_in(d.path(), &["bo-demo", "--budget", "0"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(clms(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn pipeline_errors_exit_with_one() {
    let d = tempfile::tempdir().unwrap();
    let blocker = d.path().join("file");
    fs::write(&blocker, "").unwrap();
    let out = clms(&["bo-demo", "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

/// Object keys of `v`, recursing into nested objects.
fn key_tree(v: &Value, prefix: &str, out: &mut Vec<String>) {
    if let Value::Object(map) = v {
        for (k, child) in map {
            let path = format!("{prefix}{k}");
            out.push(path.clone());
            key_tree(child, &format!("{path}."), out);
        }
    }
}

fn schema_tree(schema: &Value, prefix: &str, out: &mut Vec<String>) {
    if let Some(Value::Object(props)) = schema.get("properties") {
        for (k, child) in props {
            let path = format!("{prefix}{k}");
            out.push(path.clone());
            if child.get("type") == Some(&Value::String("object".into())) {
                schema_tree(child, &format!("{path}."), out);
            }
        }
    }
}

#[test]
fn schema_matches_the_config_type() {
    let schema: Value = serde_json::from_str(SCHEMA).unwrap();
    let defaults = serde_json::to_value(ExperimentConfig::default()).unwrap();
    let mut a = Vec::new();
    let mut b = Vec::new();
    // The model and simulate.model enums are covered by oneOf, not properties.
    key_tree(&defaults, "", &mut a);
    a.retain(|k| !k.starts_with("model.") && !k.starts_with("simulate.model."));
    schema_tree(&schema, "", &mut b);
    a.sort();
    b.sort();
    assert_eq!(a, b);
    for (path, value) in [("lambda", 0.5), ("plant.x0", 3.0)] {
        let mut node = &schema;
        for part in path.split('.') {
            node = &node["properties"][part];
        }
        assert_eq!(node["default"], value);
    }
}

#[test]
fn empty_config_equals_defaults() {
    assert_eq!(
        ExperimentConfig::from_json("{}").unwrap(),
        ExperimentConfig::default()
    );
    let round = serde_json::to_string(&ExperimentConfig::default()).unwrap();
    assert_eq!(
        ExperimentConfig::from_json(&round).unwrap(),
        ExperimentConfig::default()
    );
}
