//! `evaluate`: score every video of a dataset through a model endpoint.
//!
//! Records are appended to the output as they arrive, so an interrupted run
//! can be resumed; at the end the file is rewritten sorted by video id.
//! Per-video failures go to `<out>.errors.jsonl` and are retried next run.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{mpsc, Mutex};
use std::time::Duration;

use ipt_core::metrics::PredictionRecord;
use serde::{Deserialize, Serialize};

use crate::dataset::{load_dataset, Dataset, VideoEntry};
use crate::error::{Error, Result};
use crate::output::write_atomic;
use crate::protocol::{Connection, Endpoint, InferRequest, ProtocolError};

#[derive(Debug, Clone)]
pub struct EvaluateOptions {
    pub endpoint: Endpoint,
    pub connections: usize,
    pub timeout: Duration,
    pub features: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EvaluateSummary {
    /// Videos in the dataset.
    pub total: usize,
    /// Already present in the output.
    pub skipped: usize,
    /// Newly scored this run.
    pub inferred: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoError {
    pub video_id: String,
    pub error: String,
}

pub fn errors_path(out: &Path) -> PathBuf {
    let mut p = out.as_os_str().to_owned();
    p.push(".errors.jsonl");
    PathBuf::from(p)
}

/// Reads a JSON-lines record file; every line must parse.
pub fn read_records(path: &Path) -> Result<Vec<PredictionRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::data(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

/// Like [`read_records`] but tolerates a torn final line from an
/// interrupted run.
fn read_resumable(path: &Path) -> Result<Vec<PredictionRecord>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(path).map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let mut out = Vec::with_capacity(lines.len());
    for (i, l) in lines.iter().enumerate() {
        match serde_json::from_str(l) {
            Ok(r) => out.push(r),
            Err(_) if i + 1 == lines.len() && !text.ends_with('\n') => {
                log::warn!("{}: ignoring torn last line", path.display());
            }
            Err(e) => return Err(Error::data(format!("{}:{}: {e}", path.display(), i + 1))),
        }
    }
    Ok(out)
}

fn to_line<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string(value).expect("records serialize");
    s.push('\n');
    s
}

/// Writes records sorted by video id (later duplicates win).
pub fn write_records(path: &Path, records: &[PredictionRecord]) -> Result<()> {
    let mut by_id: BTreeMap<&str, &PredictionRecord> = BTreeMap::new();
    for r in records {
        by_id.insert(&r.video_id, r);
    }
    let text: String = by_id.values().map(|r| to_line(r)).collect();
    write_atomic(path, text.as_bytes())
}

enum Outcome {
    Record(PredictionRecord),
    Failed(VideoError),
}

/// Maps dataset class ids to the model's class ids by name.
fn label_map(ds: &Dataset, conn: &Connection) -> Result<Vec<usize>> {
    let model = conn.labels();
    let missing: Vec<&str> = ds
        .labels
        .labels()
        .iter()
        .filter(|l| model.index_of(l).is_none())
        .map(String::as_str)
        .collect();
    if !missing.is_empty() {
        return Err(Error::Labels(format!(
            "the model does not know {missing:?}; it offers {:?}",
            model.labels()
        )));
    }
    Ok(ds.labels.labels().iter().map(|l| model.index_of(l).expect("checked")).collect())
}

fn score_one(
    ds: &Dataset,
    conn: &mut Connection,
    entry: &VideoEntry,
    labels: &[usize],
    features: &[String],
) -> std::result::Result<PredictionRecord, String> {
    let video = ds.load_video(entry).map_err(|e| e.to_string())?;
    let req = InferRequest::from_video(&video, features, entry.factors.clone());
    let resp = conn.infer(&req).map_err(|e| e.to_string())?;
    let mut record = PredictionRecord::new(entry.id.clone(), labels[entry.label], resp.scores, entry.condition());
    record.factors = entry.factors.clone();
    record.features = resp.features;
    Ok(record)
}

fn worker(
    ds: &Dataset,
    opts: &EvaluateOptions,
    mut conn: Option<Connection>,
    queue: &Mutex<VecDeque<&VideoEntry>>,
    labels: &[usize],
    tx: mpsc::Sender<Outcome>,
) {
    loop {
        let Some(entry) = queue.lock().expect("queue lock").pop_front() else {
            return;
        };
        if conn.is_none() {
            match Connection::open(&opts.endpoint, opts.timeout) {
                Ok(c) => conn = Some(c),
                Err(e) => {
                    let _ = tx.send(Outcome::Failed(VideoError {
                        video_id: entry.id.clone(),
                        error: e.to_string(),
                    }));
                    continue;
                }
            }
        }
        let c = conn.as_mut().expect("connected");
        let outcome = match score_one(ds, c, entry, labels, &opts.features) {
            Ok(r) => Outcome::Record(r),
            Err(error) => {
                // the stream may be out of step after a failure; start over
                conn = None;
                Outcome::Failed(VideoError {
                    video_id: entry.id.clone(),
                    error,
                })
            }
        };
        if tx.send(outcome).is_err() {
            return;
        }
    }
}

pub fn evaluate(dataset: &Path, out: &Path, opts: &EvaluateOptions) -> Result<EvaluateSummary> {
    if opts.connections == 0 {
        return Err(Error::Usage("connections must be >= 1".into()));
    }
    let ds = load_dataset(dataset)?;
    let existing = read_resumable(out)?;
    let done: BTreeSet<&str> = existing.iter().map(|r| r.video_id.as_str()).collect();
    let pending: VecDeque<&VideoEntry> = ds.manifest.videos.iter().filter(|v| !done.contains(v.id.as_str())).collect();
    let mut summary = EvaluateSummary {
        total: ds.manifest.videos.len(),
        skipped: ds.manifest.videos.len() - pending.len(),
        ..Default::default()
    };
    let errors_file = errors_path(out);

    let mut new_records = Vec::new();
    let mut failures = Vec::new();
    if !pending.is_empty() {
        let first = Connection::open(&opts.endpoint, opts.timeout)?;
        let labels = label_map(&ds, &first)?;
        if let Some(tag) = opts.features.iter().find(|t| !first.features().contains(t)) {
            return Err(ProtocolError::UnknownFeature(tag.clone()).into());
        }
        if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| Error::data(format!("{}: {e}", parent.display())))?;
        }
        let mut sink = OpenOptions::new()
            .create(true)
            .append(true)
            .open(out)
            .map_err(|e| Error::data(format!("{}: {e}", out.display())))?;
        // a torn last line must not glue onto the first new record
        if fs::read(out).map(|b| !b.is_empty() && !b.ends_with(b"\n")).unwrap_or(false) {
            let _ = sink.write_all(b"\n");
        }

        let k = opts.connections.min(pending.len());
        let queue = Mutex::new(pending);
        let (tx, rx) = mpsc::channel();
        std::thread::scope(|s| -> Result<()> {
            let mut first = Some(first);
            for _ in 0..k {
                let tx = tx.clone();
                let conn = first.take();
                let (ds, queue, labels) = (&ds, &queue, &labels);
                s.spawn(move || worker(ds, opts, conn, queue, labels, tx));
            }
            drop(tx);
            for outcome in rx {
                match outcome {
                    Outcome::Record(r) => {
                        sink.write_all(to_line(&r).as_bytes())
                            .and_then(|_| sink.flush())
                            .map_err(|e| Error::data(format!("{}: {e}", out.display())))?;
                        new_records.push(r);
                    }
                    Outcome::Failed(e) => {
                        log::warn!("video '{}': {}", e.video_id, e.error);
                        failures.push(e);
                    }
                }
            }
            Ok(())
        })?;
    }
    summary.inferred = new_records.len();
    summary.failed = failures.len();

    let mut all = existing;
    all.extend(new_records);
    write_records(out, &all)?;
    if failures.is_empty() {
        if errors_file.exists() {
            fs::remove_file(&errors_file).map_err(|e| Error::data(format!("{}: {e}", errors_file.display())))?;
        }
    } else {
        failures.sort_by(|a, b| a.video_id.cmp(&b.video_id));
        let text: String = failures.iter().map(to_line).collect();
        write_atomic(&errors_file, text.as_bytes())?;
    }
    Ok(summary)
}
