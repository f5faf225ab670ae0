#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ipt_probe::config::Config;
use ipt_probe::protocol::Endpoint;
use serde_json::Value;

pub const BIN: &str = env!("CARGO_BIN_EXE_ipt-probe");

pub fn mocapbank() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/mocapbank.bvh")
}

/// A config rendering the captured clip, with `extra` merged over the
/// `render` section.
pub fn config_json(max_frames: usize, render_extra: Value, sweeps: Value) -> Value {
    let mut render = serde_json::json!({
        "clips": [{"path": mocapbank(), "label": "bank", "max_frames": max_frames}],
        "image_size": [64, 64],
    });
    if let (Some(r), Value::Object(extra)) = (render.as_object_mut(), render_extra) {
        r.extend(extra);
    }
    serde_json::json!({"render": render, "sweeps": sweeps})
}

pub fn config(value: &Value) -> Config {
    Config::from_json(&value.to_string()).expect("test config is valid")
}

pub fn mock_command(mode: &str, seed: u64, labels: &str) -> String {
    let bin = shlex::try_quote(BIN).expect("binary path quotes");
    format!("exec:{bin} mock --mode {mode} --seed {seed} --labels {labels}")
}

pub fn mock_endpoint(mode: &str, seed: u64, labels: &str) -> Endpoint {
    Endpoint::parse(&mock_command(mode, seed, labels)).expect("endpoint parses")
}

/// Every file under `root`, keyed by relative path.
pub fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        let mut entries: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}
