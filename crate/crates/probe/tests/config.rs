mod common;

use std::collections::BTreeSet;
use std::path::PathBuf;

use ipt_core::transforms::{default_suite, ImageTransformSpec};
use ipt_probe::config::{Config, ConfigError};
use serde_json::{json, Value};

fn pointer_of(doc: Value) -> String {
    match Config::from_json(&doc.to_string()) {
        Err(ConfigError { pointer, .. }) => pointer,
        Ok(c) => panic!("expected an error for {doc}, got {c:?}"),
    }
}

#[test]
fn empty_document_takes_the_defaults() {
    let c = Config::from_json("{}").unwrap();
    assert_eq!(c, Config::default());
    assert_eq!(c.transforms, default_suite());
    assert_eq!(c.render.image_size, [64, 64]);
    assert_eq!(c.evaluate.connections, 1);
    assert_eq!(c.evaluate.timeout_s, 120.0);
    assert_eq!(c.report.smoothing_window, 5);
    assert_eq!(c.report.pca_dims, 3);
    assert_eq!((c.report.regime_lo, c.report.regime_hi), (0.25, 0.75));
    assert_eq!(c.report.drop_threshold, 0.2);
}

#[test]
fn schema_violations_carry_json_pointers() {
    let cases = [
        (json!({"render": {"image_size": [16, 64]}}), "/render/image_size"),
        (json!({"render": {"image_size": [64]}}), "/render/image_size"),
        (json!({"render": {"style": "mesh"}}), "/render/style"),
        (json!({"render": {"appearances": ["crimson", "plaid"]}}), "/render/appearances/1"),
        (json!({"render": {"base": {"background_id": "beach"}}}), "/render/base/background_id"),
        (json!({"render": {"base": {"elevation_deg": 90}}}), "/render/base/elevation_deg"),
        (json!({"render": {"clips": [{"path": "a.bvh", "max_frames": 0}]}}), "/render/clips/0/max_frames"),
        (json!({"render": {"clips": [{"path": "a.bvh"}, {"path": "b/a.bvh"}]}}), "/render/clips/1"),
        (json!({"render": {"randomize": {"backgrounds": ["gray", "moon"]}}}), "/render/randomize/backgrounds/1"),
        (json!({"sweeps": [{"factor": "azimuth", "x1": 0, "delta": 0, "count": 3}]}), "/sweeps/0/delta"),
        (json!({"sweeps": [{"factor": "azimuth", "x1": 0, "delta": 1, "count": 0}]}), "/sweeps/0/count"),
        (json!({"sweeps": [{"factor": "tilt", "x1": 0, "delta": 1, "count": 1}]}), "/sweeps/0/factor"),
        (json!({"sweeps": [{"factor": "elevation", "x1": -30, "delta": 1, "count": 360}]}), "/sweeps/0"),
        (json!({"sweeps": [{"factor": "distance", "x1": 5, "delta": -1, "count": 10}]}), "/sweeps/0"),
        (json!({"transforms": [{"kind": "average_blur", "params": {"kernel": 4}}]}), "/transforms/0/params"),
        (json!({"transforms": [{"kind": "sharpen", "params": {}}]}), "/transforms/0/kind"),
        (json!({"transforms": [{"kind": "grayscale"}, {"kind": "grayscale"}]}), "/transforms/1/kind"),
        (json!({"evaluate": {"connections": 0}}), "/evaluate/connections"),
        (json!({"evaluate": {"timeout_s": -1}}), "/evaluate/timeout_s"),
        (json!({"evaluate": {"model": "http://x"}}), "/evaluate/model"),
        (json!({"report": {"smoothing_window": 4}}), "/report/smoothing_window"),
        (json!({"report": {"drop_threshold": 1.5}}), "/report/drop_threshold"),
        (json!({"report": {"colour": "red"}}), "/report/colour"),
        (json!({"plots": {}}), "/plots"),
        (json!([1, 2]), ""),
    ];
    for (doc, expected) in cases {
        assert_eq!(pointer_of(doc.clone()), expected, "{doc}");
    }
}

#[test]
fn configured_transform_parameters_win_over_defaults() {
    let c = Config::from_json(r#"{"transforms": [{"kind": "average_blur", "params": {"kernel": 3}}]}"#).unwrap();
    assert_eq!(c.transform("average_blur").unwrap(), ImageTransformSpec::AverageBlur { kernel: 3 });
    assert_eq!(c.transform("rotate_cw").unwrap(), ImageTransformSpec::RotateCw { angle_deg: 25.0 });
    assert_eq!(c.transform("sharpen").unwrap_err().pointer, "/transforms");
}

#[test]
fn suite_survives_a_config_round_trip() {
    let c = Config::default();
    let back = Config::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
    assert_eq!(back.transforms, default_suite());
    assert_eq!(back, c);
}

#[test]
fn clip_paths_resolve_against_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.json");
    std::fs::write(&path, r#"{"render": {"clips": [{"path": "clips/walk.bvh"}, {"path": "/abs/run.bvh"}]}}"#).unwrap();
    let c = Config::load(&path).unwrap();
    assert_eq!(c.render.clips[0].path, dir.path().join("clips/walk.bvh"));
    assert_eq!(c.render.clips[1].path, PathBuf::from("/abs/run.bvh"));
    assert_eq!(c.render.clips[0].label(), "walk");
    assert_eq!(c.render.clips[0].name(), "walk");
}

/// Keys of every object reachable from `v`, with array items under `[]`.
fn key_paths(v: &Value, prefix: &str, out: &mut BTreeSet<String>) {
    match v {
        Value::Object(m) => {
            for (k, child) in m {
                let p = format!("{prefix}/{k}");
                out.insert(p.clone());
                key_paths(child, &p, out);
            }
        }
        Value::Array(items) => {
            for item in items {
                key_paths(item, &format!("{prefix}/[]"), out);
            }
        }
        _ => {}
    }
}

fn schema_paths(s: &Value, prefix: &str, out: &mut BTreeSet<String>) {
    if let Some(props) = s.get("properties").and_then(Value::as_object) {
        for (k, child) in props {
            let p = format!("{prefix}/{k}");
            out.insert(p.clone());
            schema_paths(child, &p, out);
        }
    }
    if let Some(items) = s.get("items") {
        schema_paths(items, &format!("{prefix}/[]"), out);
    }
}

#[test]
fn shipped_schema_lists_every_config_key() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../schema/config.schema.json");
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let mut doc = common::config_json(
        4,
        json!({
            "focal_length": 50.0,
            "randomize": {"backgrounds": ["gray"], "light_intensities": [1.0], "appearances": ["crimson"]},
        }),
        json!([{"factor": "azimuth", "x1": 0, "delta": 1, "count": 2}]),
    );
    doc["render"]["clips"][0]["name"] = json!("bank");
    doc["evaluate"] = json!({"model": "tcp:localhost:1", "features": ["pooled"]});
    let c = common::config(&doc);
    let mut keys = BTreeSet::new();
    key_paths(&serde_json::to_value(&c).unwrap(), "", &mut keys);
    // transform params vary by kind and are described per kind in the schema
    keys.retain(|k| !k.starts_with("/transforms/[]/params/"));
    let mut described = BTreeSet::new();
    schema_paths(&schema, "", &mut described);
    let missing: Vec<_> = keys.difference(&described).collect();
    assert!(missing.is_empty(), "schema lacks {missing:?}");
    assert_eq!(schema["additionalProperties"], json!(false));
}
