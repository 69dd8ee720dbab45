// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn sepp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sepp"))
        .current_dir(dir)
        .env_remove("SEPP_OUT_DIR")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = sepp(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn schema(name: &str) -> jsonschema::JSONSchema {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("schemas/{name}.v1.schema.json"));
    jsonschema::JSONSchema::compile(&json(path)).expect("schema compiles")
}

fn assert_valid(name: &str, doc: &Value) {
    let s = schema(name);
    let msgs: Vec<String> = match s.validate(doc) {
        Ok(()) => return,
        Err(errors) => errors.map(|e| format!("{e} at {}", e.instance_path)).collect(),
    };
    panic!("{name} document invalid: {msgs:?}");
}

const CUSTOM: &str = r#"{
  "setting": "custom",
  "seq": {"segments": [
    {"start": 1, "matrix": [[0.6, 0.0, 0.0], [0.0, 0.6, 0.0], [0.0, 0.0, 0.6]]},
    {"start": 38, "matrix": [[-0.6, 0.0, 0.0], [0.0, -0.6, 0.0], [0.3, 0.0, -0.6]]}
  ]},
  "config": {"intercept": 0.5, "clip": 4.0, "memory": 1},
  "len": 80
}"#;

fn simulate_a(dir: &Path, seed: &str, out: &str) {
    ok(dir, &["simulate", "--setting", "a", "--rho", "0.35", "--seed", seed, "-o", out]);
}

fn strip_times(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.remove("wall_time_secs");
            map.values_mut().for_each(strip_times);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_times),
        _ => {}
    }
}

#[test]
fn simulate_writes_counts_and_truth() {
    let tmp = TempDir::new().unwrap();
    simulate_a(tmp.path(), "7", "out");
    let csv = fs::read_to_string(tmp.path().join("out/counts.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 301);
    assert!(lines.iter().all(|l| l.split(',').count() == 31));
    assert!(lines[0].starts_with("t,x1,x2,"));
    assert!(!csv.contains('\r'));
    let truth = json(tmp.path().join("out/truth.json"));
    assert_eq!(truth["change_points"], serde_json::json!([151]));
    assert_valid("truth", &truth);
}

#[test]
fn simulate_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    simulate_a(tmp.path(), "7", "one");
    simulate_a(tmp.path(), "7", "two");
    simulate_a(tmp.path(), "8", "three");
    let read = |d: &str| fs::read(tmp.path().join(d).join("counts.csv")).unwrap();
    assert_eq!(read("one"), read("two"));
    assert_ne!(read("one"), read("three"));
}

#[test]
fn simulate_rejects_bad_settings() {
    let tmp = TempDir::new().unwrap();
    let out = sepp(tmp.path(), &["simulate", "--setting", "b", "--T", "301"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("divisible by 3"));
    assert_eq!(sepp(tmp.path(), &["simulate", "--setting", "a"]).status.code(), Some(1));
    assert_eq!(sepp(tmp.path(), &["simulate", "--bogus"]).status.code(), Some(1));
    assert_eq!(sepp(tmp.path(), &["simulate", "--setting", "a", "--rho", "0.6"]).status.code(), Some(1));
}

#[test]
fn detect_report_matches_schema_and_reruns() {
    let tmp = TempDir::new().unwrap();
    simulate_a(tmp.path(), "3", "sim");
    ok(tmp.path(), &["detect", "--input", "sim/counts.csv", "-o", "det"]);
    let mut report = json(tmp.path().join("det/report.json"));
    assert_valid("report", &report);
    let total = report["report"]["total_objective"].as_f64().unwrap();
    let costs: f64 = report["report"]["segments"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["cost"].as_f64().unwrap())
        .sum();
    let blocks = report["report"]["segments"].as_array().unwrap().len() as f64;
    let gamma = report["report"]["options"]["gamma"].as_f64().unwrap();
    assert!((total - (costs + gamma * blocks)).abs() <= 1e-9 * total.abs().max(1.0));
    assert_eq!(report["config"]["intercept"], 0.5);

    ok(tmp.path(), &["rerun", "det/report.json", "-o", "again"]);
    let mut again = json(tmp.path().join("again/report.json"));
    strip_times(&mut report);
    strip_times(&mut again);
    assert_eq!(
        serde_json::to_string_pretty(&report).unwrap(),
        serde_json::to_string_pretty(&again).unwrap()
    );

    ok(tmp.path(), &["evaluate", "--report", "det/report.json", "--truth", "sim/truth.json", "-o", "ev"]);
    assert_valid("metrics", &json(tmp.path().join("ev/metrics.json")));
}

#[test]
fn simulate_manifest_reruns_byte_for_byte() {
    let tmp = TempDir::new().unwrap();
    simulate_a(tmp.path(), "11", "sim");
    ok(tmp.path(), &["rerun", "sim/truth.json", "-o", "again"]);
    assert_eq!(
        fs::read(tmp.path().join("sim/counts.csv")).unwrap(),
        fs::read(tmp.path().join("again/counts.csv")).unwrap()
    );
}

#[test]
fn huge_gamma_gives_no_change_points() {
    let tmp = TempDir::new().unwrap();
    simulate_a(tmp.path(), "1", "sim");
    ok(tmp.path(), &["detect", "--input", "sim/counts.csv", "--gamma", "1e12", "-o", "det"]);
    let report = json(tmp.path().join("det/report.json"));
    assert_eq!(report["report"]["change_points"], serde_json::json!([]));
    assert_eq!(report["report"]["k_hat"], 0);
}

#[test]
fn coarse_grid_never_improves_the_objective() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("scenario.json"), CUSTOM).unwrap();
    ok(tmp.path(), &["simulate", "--scenario", "scenario.json", "--seed", "2", "-o", "sim"]);
    let objective = |grid: &str| {
        ok(tmp.path(), &["detect", "--input", "sim/counts.csv", "--lambda", "2", "--gamma", "3", "--grid", grid, "-o", grid]);
        let r = json(tmp.path().join(grid).join("report.json"));
        r["report"]["search_objective"].as_f64().unwrap()
    };
    let fine = objective("1");
    let coarse = objective("5");
    assert!(coarse >= fine - 1e-9 * fine.abs(), "grid 5 {coarse} < grid 1 {fine}");
}

#[test]
fn detect_data_and_usage_errors() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("bad.csv"), "t,x1,x2\n1,1,2\n2,3\n").unwrap();
    let out = sepp(dir, &["detect", "--input", "bad.csv", "--v", "0", "--clip", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    fs::write(dir.join("neg.csv"), "t,x1\n1,1\n2,-1\n3,0\n").unwrap();
    let out = sepp(dir, &["detect", "--input", "neg.csv", "--v", "0", "--clip", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    fs::write(dir.join("ok.csv"), "t,x1\n1,1\n2,0\n3,2\n4,1\n").unwrap();
    let out = sepp(dir, &["detect", "--input", "ok.csv", "--clip", "2"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--v"));

    ok(dir, &["detect", "--input", "ok.csv", "--v", "-0.5", "--clip", "2", "--gamma", "1", "-o", "r"]);
}

#[test]
fn evaluate_examples() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    simulate_a(dir, "5", "sim");
    let score = |estimate: &str, out: &str| {
        fs::write(dir.join(format!("{out}.csv")), estimate).unwrap();
        ok(dir, &["evaluate", "--estimate", &format!("{out}.csv"), "--truth", "sim/truth.json", "-o", out]);
        json(dir.join(out).join("metrics.json"))["result"].clone()
    };
    let exact = score("151\n", "exact");
    assert_eq!((exact["hausdorff"].as_u64(), exact["k_error"].as_u64()), (Some(0), Some(0)));
    let empty = score("", "empty");
    assert_eq!(empty["hausdorff"], 300);
    assert_eq!(empty["empty_flag"], true);
    assert_eq!(empty["k_error"], 1);
    let two = score("148,290\n", "two");
    assert_eq!((two["hausdorff"].as_u64(), two["k_error"].as_u64()), (Some(139), Some(1)));

    fs::write(dir.join("wrong.json"), r#"{"schema": "other/v9"}"#).unwrap();
    let out = sepp(dir, &["evaluate", "--report", "wrong.json", "--truth", "sim/truth.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema"));
}

#[test]
fn replicate_summary_is_recomputable() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    ok(dir, &["replicate", "--setting", "a", "--rho", "0.35", "--reps", "3", "--seed", "1", "--jobs", "2", "-o", "rep"]);
    let mut rows = csv::Reader::from_path(dir.join("rep/replications.csv")).unwrap();
    let h: Vec<f64> = rows
        .deserialize::<std::collections::HashMap<String, String>>()
        .map(|r| r.unwrap()["hausdorff"].parse().unwrap())
        .collect();
    assert_eq!(h.len(), 3);
    let mut summary = csv::Reader::from_path(dir.join("rep/summary.csv")).unwrap();
    let row: std::collections::HashMap<String, String> = summary.deserialize().next().unwrap().unwrap();
    let mean: f64 = row["hausdorff_mean"].parse().unwrap();
    assert!((mean - h.iter().sum::<f64>() / 3.0).abs() < 1e-12);
    assert_eq!(row["reps"], "3");

    ok(dir, &["replicate", "--setting", "a", "--rho", "0.35", "--reps", "1", "--seed", "1", "--jobs", "1", "-o", "one"]);
    let mut summary = csv::Reader::from_path(dir.join("one/summary.csv")).unwrap();
    let row: std::collections::HashMap<String, String> = summary.deserialize().next().unwrap().unwrap();
    assert_eq!(row["hausdorff_se"], "");
    assert!(row["hausdorff"].ends_with("(NA)"));
}

#[test]
fn binned_events_and_out_dir_from_env() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let mut events = String::from("time,unit\n");
    for i in 0..200 {
        events.push_str(&format!("{}.5,{}\n", i, 1 + i % 3));
    }
    fs::write(dir.join("events.csv"), events).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_sepp"))
        .current_dir(dir)
        .env("SEPP_OUT_DIR", "envout")
        .args(["detect", "--events", "events.csv", "--bin-width", "5", "--v", "0", "--clip", "3"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(dir.join("envout/report.json"));
    assert_eq!(report["len"], 40);
    assert_eq!(report["dim"], 3);
}
