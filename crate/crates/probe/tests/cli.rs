mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn run(args: &[&str]) -> Output {
    Command::new(common::BIN).args(args).output().expect("binary runs")
}

fn ok_json(out: Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("summary is JSON")
}

fn write_config(dir: &Path, doc: &Value) -> String {
    let path = dir.join("exp.json");
    fs::write(&path, doc.to_string()).unwrap();
    path.to_str().unwrap().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn full_workflow_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc = common::config_json(1, json!({}), json!([{"factor": "azimuth", "x1": 0, "delta": 30, "count": 12}]));
    doc["evaluate"] = json!({"model": common::mock_command("azimuth_oracle", 0, "bank"), "connections": 2});
    let cfg = write_config(dir.path(), &doc);
    let data = dir.path().join("data");
    let summary = ok_json(run(&["generate", "--config", &cfg, "--out", s(&data), "--seed", "3", "--jobs", "2"]));
    assert_eq!(summary["videos"], 12);
    assert_eq!(summary["labels"], json!(["bank"]));

    let gray = dir.path().join("gray");
    let summary = ok_json(run(&["transform", "--in", s(&data), "--out", s(&gray), "--kind", "grayscale"]));
    assert_eq!(summary, json!({"videos": 12, "transform": "grayscale"}));

    let split = dir.path().join("split");
    let summary = ok_json(run(&["transform", "--in", s(&data), "--out", s(&split), "--kind", "semantic", "--threshold", "0.2"]));
    assert_eq!(summary["retained"], 12);

    let rec = dir.path().join("rec.jsonl");
    let summary = ok_json(run(&["evaluate", "--config", &cfg, "--dataset", s(&data), "--out", s(&rec)]));
    assert_eq!(summary, json!({"total": 12, "skipped": 0, "inferred": 12, "failed": 0}));
    let summary = ok_json(run(&["evaluate", "--config", &cfg, "--dataset", s(&data), "--out", s(&rec)]));
    assert_eq!(summary["skipped"], 12);

    let rep = dir.path().join("rep");
    let out = run(&["report", "-v", "--records", s(&rec), "--mode", "sweep", "--out", s(&rep), "--config", &cfg]);
    let v = ok_json(out);
    assert_eq!(v[0]["stats"]["peaks"], json!([0.0, 180.0]));
    assert_eq!(v[0]["stats"]["valleys"], json!([90.0, 270.0]));
    assert!(rep.join("curves.json").is_file());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |out: Output| {
        assert!(String::from_utf8_lossy(&out.stderr).contains("error"), "{out:?}");
        out.status.code()
    };

    // config errors: 2
    let bad = write_config(dir.path(), &json!({"render": {"image_size": [8, 8]}}));
    let out = run(&["generate", "--config", &bad, "--out", s(&dir.path().join("x"))]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("/render/image_size"));
    assert_eq!(code(out), Some(2));
    assert_eq!(code(run(&["generate", "--out", s(dir.path())])), Some(2));
    assert_eq!(code(run(&["frobnicate"])), Some(2));
    assert_eq!(code(run(&["mock", "--mode", "psychic", "--labels", "a"])), Some(2));

    // data errors: 4
    let missing = dir.path().join("nothing");
    assert_eq!(code(run(&["transform", "--in", s(&missing), "--out", s(&dir.path().join("y")), "--kind", "identity"])), Some(4));

    // endpoint errors: 3
    let data = dir.path().join("data");
    let good = write_config(dir.path(), &common::config_json(1, json!({}), json!([])));
    ok_json(run(&["generate", "--config", &good, "--out", s(&data)]));
    let rec = dir.path().join("rec.jsonl");
    let wrong_labels = common::mock_command("uniform", 0, "walk,run");
    assert_eq!(code(run(&["evaluate", "--dataset", s(&data), "--out", s(&rec), "--model", &wrong_labels])), Some(3));
    assert_eq!(code(run(&["evaluate", "--dataset", s(&data), "--out", s(&rec), "--model", "tcp:127.0.0.1:1"])), Some(3));
    assert_eq!(code(run(&["evaluate", "--dataset", s(&data), "--out", s(&rec), "--model", "smoke-signals"])), Some(2));
}

#[test]
fn mock_serves_stdio_and_takes_labels_from_a_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let cfg = write_config(dir.path(), &common::config_json(1, json!({}), json!([])));
    ok_json(run(&["generate", "--config", &cfg, "--out", s(&data)]));
    let rec = dir.path().join("rec.jsonl");
    let bin = shlex::try_quote(common::BIN).unwrap();
    let model = format!("exec:{bin} mock --mode centroid --labels-from {}", shlex::try_quote(s(&data)).unwrap());
    let summary = ok_json(run(&["evaluate", "--dataset", s(&data), "--out", s(&rec), "--model", &model, "--features", "pooled,consensus"]));
    assert_eq!(summary["inferred"], 1);
    let line: Value = serde_json::from_str(fs::read_to_string(&rec).unwrap().trim()).unwrap();
    assert_eq!(line["features"]["consensus"]["shape"], json!([1]));
    assert_eq!(line["scores"], json!([1.0]));
}
