use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tabprior"))
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

#[test]
fn prompts_writes_eight_diabetes_correlation_files() {
    let root = workspace_root();
    let out = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["prompts", "--schema"])
        .arg(root.join("assets/diabetes/schema.json"))
        .arg("--meta")
        .arg(root.join("assets/diabetes/meta.json"))
        .arg("--out")
        .arg(out.path())
        .status()
        .unwrap();
    assert!(status.success());
    let files: Vec<_> = std::fs::read_dir(out.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(files.len(), 8);
    assert!(files.iter().all(|f| f.ends_with("_correlation.txt")));
    let glucose = std::fs::read_to_string(out.path().join("Glucose_correlation.txt")).unwrap();
    assert!(glucose.starts_with("I'm creating a system to diagnostically predict"));
}

#[test]
fn prompts_heart_ordering_lists_categories() {
    let root = workspace_root();
    let out = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["prompts", "--schema"])
        .arg(root.join("assets/heart/schema.json"))
        .arg("--meta")
        .arg(root.join("assets/heart/meta.json"))
        .arg("--out")
        .arg(out.path())
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(out.path().join("ChestPainType_ordering.txt")).unwrap();
    assert!(text
        .trim_end()
        .ends_with("Typical Angina, Atypical Angina, Non-Anginal Pain, Asymptomatic"));
}

#[test]
fn prompts_missing_meta_exits_2() {
    let root = workspace_root();
    let out = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["prompts", "--schema"])
        .arg(root.join("assets/diabetes/schema.json"))
        .arg("--meta")
        .arg("/no/such/meta.json")
        .arg("--out")
        .arg(out.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn train_rejects_unknown_method_with_exit_2() {
    let root = workspace_root();
    let output = bin()
        .args(["train", "--dataset"])
        .arg(root.join("data/diabetes.csv"))
        .arg("--schema")
        .arg(root.join("assets/diabetes/schema.json"))
        .args(["--method", "boosting", "--shots", "4", "--out", "/tmp/nope.json"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("lr|biased|monotonic"), "stderr: {stderr}");
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

fn toy_dataset(dir: &Path) -> (PathBuf, PathBuf) {
    let csv = dir.join("toy.csv");
    let mut rows = String::from("size,color,label\n");
    for i in 0..24 {
        let label = i % 2;
        let color = if i % 3 == 0 { "red" } else { "blue" };
        rows.push_str(&format!("{}.{},{color},{label}\n", i, i % 7));
    }
    write(&csv, &rows);
    let schema = dir.join("schema.json");
    write(
        &schema,
        r#"{"target": "label", "columns": [
            {"name": "size", "kind": "continuous"},
            {"name": "color", "kind": "categorical", "categories": ["red", "blue"]}
        ]}"#,
    );
    (csv, schema)
}

#[test]
fn train_monotonic_checkpoint_has_one_map_per_column() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, schema) = toy_dataset(dir.path());
    let ckpt = dir.path().join("ckpt.json");
    let status = bin()
        .args(["train", "--dataset"])
        .arg(&csv)
        .arg("--schema")
        .arg(&schema)
        .args(["--method", "monotonic", "--encoding", "raw", "--shots", "8", "--seed", "1", "--out"])
        .arg(&ckpt)
        .status()
        .unwrap();
    assert!(status.success());
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&ckpt).unwrap()).unwrap();
    assert_eq!(json["kind"], "monotonic");
    let maps = json["maps"].as_array().unwrap();
    assert_eq!(maps.len(), json["beta"].as_array().unwrap().len());
    assert_eq!(maps.len(), json["column_map"].as_array().unwrap().len());
    // The split export sits next to the checkpoint.
    let split: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("ckpt.split.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(split["n"], 8);
    assert_eq!(split["train"].as_array().unwrap().len(), 8);
}

#[test]
fn eval_writes_report_and_analyze_consumes_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, schema) = toy_dataset(dir.path());
    let grid = dir.path().join("grid.json");
    write(
        &grid,
        &format!(
            r#"{{"dataset": {:?}, "schema": {:?},
                 "methods": ["lr"], "encodings": ["raw", "onehot"],
                 "shots": [4], "seeds": [0, 1]}}"#,
            csv.to_str().unwrap(),
            schema.to_str().unwrap()
        ),
    );
    let out = dir.path().join("results");
    let status = bin().args(["eval", "--grid"]).arg(&grid).arg("--out").arg(&out).status().unwrap();
    assert!(status.success());
    assert!(out.join("report.json").exists());
    assert!(out.join("manifest.json").exists());
    let csv_text = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(csv_text.starts_with("method,encoding,shots,seed,auc\n"));
    assert_eq!(csv_text.lines().count(), 1 + 2 * 2);

    // analyze on a checkpoint trained over the same data
    let ckpt = dir.path().join("ckpt.json");
    bin()
        .args(["train", "--dataset"])
        .arg(&csv)
        .arg("--schema")
        .arg(&schema)
        .args(["--method", "lr", "--encoding", "raw", "--shots", "8", "--out"])
        .arg(&ckpt)
        .status()
        .unwrap();
    let analysis = dir.path().join("analysis");
    let status = bin()
        .args(["analyze", "--checkpoint"])
        .arg(&ckpt)
        .arg("--dataset")
        .arg(&csv)
        .arg("--schema")
        .arg(&schema)
        .arg("--out")
        .arg(&analysis)
        .arg("--svg")
        .status()
        .unwrap();
    assert!(status.success());
    assert!(analysis.join("curves.csv").exists());
    assert!(analysis.join("marginals.csv").exists());
    assert!(analysis.join("flags.json").exists());
    assert!(std::fs::read_dir(&analysis)
        .unwrap()
        .any(|e| e.unwrap().file_name().to_string_lossy().ends_with(".svg")));
}

fn fake_report(dir: &Path, auc: f64) -> PathBuf {
    let path = dir.join("report.json");
    write(
        &path,
        &format!(
            r#"{{"meta": {{"dataset": "toy", "config_hash": "x", "tool_version": "0",
                  "created_unix": 0}},
                "cells": [{{"method": "lr", "encoding": "raw", "shots": 4,
                  "auc_mean": {auc}, "auc_std": 0.0,
                  "seeds": [{{"seed": 0, "auc": {auc}}}]}}]}}"#
        ),
    );
    path
}

fn fake_reference(dir: &Path, mean: f64) -> PathBuf {
    let path = dir.join("reference.json");
    write(
        &path,
        &format!(r#"{{"toy": {{"LR-Raw": {{"4": {{"mean": {mean}, "std": 0.01}}}}}}}}"#),
    );
    path
}

#[test]
fn compare_within_tolerance_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    let report = fake_report(dir.path(), 0.78);
    let reference = fake_reference(dir.path(), 0.80);
    let status = bin()
        .args(["compare", "--report"])
        .arg(&report)
        .arg("--reference")
        .arg(&reference)
        .args(["--tolerance", "0.03"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
}

#[test]
fn compare_divergent_cell_exits_1_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let report = fake_report(dir.path(), 0.70);
    let reference = fake_reference(dir.path(), 0.80);
    let output = bin()
        .args(["compare", "--report"])
        .arg(&report)
        .arg("--reference")
        .arg(&reference)
        .args(["--tolerance", "0.03"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("toy/LR/raw/n=4"));
    assert!(stdout.contains("pass=false"));
}

#[test]
fn compare_malformed_reference_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let report = fake_report(dir.path(), 0.78);
    let bad = dir.path().join("bad.json");
    write(&bad, "{ not json");
    let status = bin()
        .args(["compare", "--report"])
        .arg(&report)
        .arg("--reference")
        .arg(&bad)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}
