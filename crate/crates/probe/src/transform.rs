//! `transform`: image-space transforms and the foreground/background split.

use std::collections::BTreeSet;
use std::path::Path;

use ipt_core::metrics::Condition;
use ipt_core::semantic::{filter_undetected, split_fg_bg, SemanticError};
use ipt_core::transforms::{apply_transform, ImageTransformSpec};
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{load_dataset, write_manifest, write_video, Dataset, Manifest, VideoEntry};
use crate::error::{Error, Result};
use crate::output::{prepare_dataset_dir, write_json};

pub const DROP_REPORT: &str = "drop_report.json";

/// Applies one transform to every video; factors carry over, masks do not
/// (a rotated frame no longer lines up with its mask).
pub fn transform_image(input: &Path, out: &Path, spec: &ImageTransformSpec) -> Result<Manifest> {
    spec.validate().map_err(|e| Error::Usage(e.to_string()))?;
    let ds = load_dataset(input)?;
    prepare_dataset_dir(out)?;
    let condition = Condition::Transformed {
        name: spec.kind().to_string(),
    };
    let videos = ds
        .manifest
        .videos
        .par_iter()
        .map(|entry| {
            let video = ds.load_video(entry)?;
            let t = apply_transform(&video, spec).map_err(|e| Error::data(format!("video '{}': {e}", entry.id)))?;
            Ok(write_video(out, &t, None, entry.factors.clone(), Some(condition.clone()))?)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut manifest = Manifest {
        fps: ds.manifest.fps,
        labels: ds.manifest.labels.clone(),
        videos,
    };
    write_manifest(out, &manifest)?;
    manifest.videos.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct DropEntry {
    pub video_id: String,
    pub frames: usize,
    pub dropped_frames: Vec<usize>,
    pub dropped_fraction: f64,
    pub retained: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct DropReport {
    pub threshold: f64,
    pub retained: usize,
    pub removed: usize,
    pub videos: Vec<DropEntry>,
}

struct Split {
    entry: VideoEntry,
    frames: usize,
    dropped: Vec<usize>,
    videos: Option<(ipt_core::Video, ipt_core::Video)>,
}

fn split_one(ds: &Dataset, entry: &VideoEntry) -> Result<Split> {
    let video = ds.load_video(entry)?;
    let masks = ds
        .load_masks(entry, &video)?
        .ok_or_else(|| Error::data(format!("video '{}' has no masks; the semantic split needs them", entry.id)))?;
    let frames = video.frame_count();
    match split_fg_bg(&video, &masks) {
        Ok(s) => Ok(Split {
            entry: entry.clone(),
            frames,
            dropped: s.dropped_frames,
            videos: Some((s.foreground, s.background)),
        }),
        Err(SemanticError::AllDropped(_)) => Ok(Split {
            entry: entry.clone(),
            frames,
            dropped: (0..frames).collect(),
            videos: None,
        }),
        Err(e) => Err(Error::data(format!("video '{}': {e}", entry.id))),
    }
}

/// Writes `out/fg` and `out/bg` datasets plus `out/drop_report.json`.
/// Videos whose dropped-frame fraction exceeds `threshold` are left out of
/// both datasets.
pub fn transform_semantic(input: &Path, out: &Path, threshold: f64) -> Result<DropReport> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::Usage(format!("threshold must be within [0, 1], got {threshold}")));
    }
    let ds = load_dataset(input)?;
    if let Some(e) = ds.manifest.videos.iter().find(|v| v.mask_path.is_none()) {
        return Err(Error::data(format!("video '{}' has no masks; the semantic split needs them", e.id)));
    }
    let (fg_dir, bg_dir) = (out.join("fg"), out.join("bg"));
    prepare_dataset_dir(&fg_dir)?;
    prepare_dataset_dir(&bg_dir)?;

    let splits = ds
        .manifest
        .videos
        .par_iter()
        .map(|e| split_one(&ds, e))
        .collect::<Result<Vec<_>>>()?;
    let fractions: Vec<(&str, f64)> = splits
        .iter()
        .map(|s| (s.entry.id.as_str(), s.dropped.len() as f64 / s.frames as f64))
        .collect();
    let retained: BTreeSet<String> = filter_undetected(fractions.iter().copied(), threshold).into_iter().collect();

    let written = splits
        .par_iter()
        .filter(|s| retained.contains(&s.entry.id) && s.videos.is_some())
        .map(|s| {
            let (fg, bg) = s.videos.as_ref().expect("filtered");
            let f = write_video(&fg_dir, fg, None, s.entry.factors.clone(), Some(Condition::Foreground))?;
            let b = write_video(&bg_dir, bg, None, s.entry.factors.clone(), Some(Condition::Background))?;
            Ok((f, b))
        })
        .collect::<Result<Vec<_>>>()?;
    let (fg_entries, bg_entries): (Vec<_>, Vec<_>) = written.into_iter().unzip();
    for (dir, videos) in [(&fg_dir, fg_entries), (&bg_dir, bg_entries)] {
        write_manifest(
            dir,
            &Manifest {
                fps: ds.manifest.fps,
                labels: ds.manifest.labels.clone(),
                videos,
            },
        )?;
    }

    let mut videos: Vec<DropEntry> = splits
        .iter()
        .zip(&fractions)
        .map(|(s, &(_, frac))| DropEntry {
            video_id: s.entry.id.clone(),
            frames: s.frames,
            dropped_frames: s.dropped.clone(),
            dropped_fraction: frac,
            retained: retained.contains(&s.entry.id) && s.videos.is_some(),
        })
        .collect();
    videos.sort_by(|a, b| a.video_id.cmp(&b.video_id));
    let kept = videos.iter().filter(|v| v.retained).count();
    let report = DropReport {
        threshold,
        retained: kept,
        removed: videos.len() - kept,
        videos,
    };
    write_json(&out.join(DROP_REPORT), &report)?;
    Ok(report)
}
