//! `generate`: render every configured clip x appearance x sweep value.

use std::path::Path;
use std::sync::Arc;

use ipt_core::bvh::{parse_bvh, MotionClip};
use ipt_core::metrics::Condition;
use ipt_core::render::{
    enumerate_sweep, focal_for_height_fraction, randomize_nuisance, render, FactorSweep, NuisancePools, SceneSpec,
};
use ipt_core::{seed, FactorVector, LabelSpace, Video};
use rayon::prelude::*;

use crate::config::{Config, ConfigError};
use crate::dataset::{write_manifest, write_video, Manifest};
use crate::error::{Error, Result};
use crate::output::prepare_dataset_dir;

/// One video of the plan, before rendering.
#[derive(Debug, Clone)]
pub struct PlannedVideo {
    pub id: String,
    pub label: usize,
    pub spec: SceneSpec,
    pub condition: Option<Condition>,
}

/// Reads and truncates the configured clips, labelled per config.
pub fn load_clips(config: &Config) -> Result<Vec<MotionClip>> {
    config
        .render
        .clips
        .iter()
        .map(|c| {
            let text = std::fs::read_to_string(&c.path)
                .map_err(|e| Error::data(format!("cannot read clip {}: {e}", c.path.display())))?;
            let clip = parse_bvh(&text).map_err(|e| Error::data(format!("{}: {e}", c.path.display())))?;
            let clip = match c.max_frames {
                Some(n) if n < clip.frame_count() => clip.truncated(n),
                _ => clip,
            };
            Ok(clip.with_label(c.label()))
        })
        .collect()
}

/// The label space of a generated dataset: clip labels in config order.
pub fn label_space(config: &Config) -> Result<LabelSpace> {
    let mut labels: Vec<String> = Vec::new();
    for c in &config.render.clips {
        let l = c.label();
        if !labels.contains(&l) {
            labels.push(l);
        }
    }
    LabelSpace::new(labels).map_err(|_| ConfigError::at("/render/clips", "needs at least one clip").into())
}

/// Expands the config into the ordered list of videos to render.
///
/// Ids are `<clip>_<appearance>` without sweeps and
/// `<clip>_<appearance>_<factor>_<index>` with them.
pub fn plan(config: &Config, clips: &[MotionClip], seed: u64) -> Result<Vec<PlannedVideo>> {
    let r = &config.render;
    let labels = label_space(config)?;
    let (w, h) = (r.image_size[0], r.image_size[1]);
    let pools = r.randomize.as_ref().map(|rz| NuisancePools {
        backgrounds: if rz.backgrounds.is_empty() { vec![r.base.background_id.clone()] } else { rz.backgrounds.clone() },
        light_intensities: if rz.light_intensities.is_empty() { vec![r.base.light_intensity] } else { rz.light_intensities.clone() },
        appearances: rz.appearances.clone(),
    });

    let mut out = Vec::new();
    for (ci, (cfg, clip)) in r.clips.iter().zip(clips).enumerate() {
        let clip = Arc::new(clip.clone());
        let label = labels.index_of(&cfg.label()).expect("label collected from clips");
        let focal = match r.focal_length {
            Some(f) => f,
            None => focal_for_height_fraction(&clip, h, r.reference_distance, r.height_fraction)
                .map_err(|e| ConfigError::at(format!("/render/clips/{ci}"), e.to_string()))?,
        };
        for appearance in &r.appearances {
            let b = &r.base;
            let factors = FactorVector::new(
                b.azimuth_deg,
                b.elevation_deg,
                b.distance,
                appearance.clone(),
                b.background_id.clone(),
                b.light_intensity,
            )
            .map_err(|e| ConfigError::at("/render/base", e.to_string()))?;
            let base = SceneSpec {
                clip: Arc::clone(&clip),
                factors,
                image_size: (w, h),
                focal_length: focal,
                seed: 0,
                style: r.style(),
            };
            let stem = format!("{}_{appearance}", cfg.name());
            let mut push = |id: String, spec: SceneSpec, condition: Option<Condition>| -> Result<()> {
                let mut spec = match &pools {
                    Some(p) => {
                        let mut p = p.clone();
                        if p.appearances.is_empty() {
                            p.appearances = vec![appearance.clone()];
                        }
                        randomize_nuisance(&spec, &p, seed::derive(seed, "nuisance", &id))
                            .map_err(|e| ConfigError::at("/render/randomize", e.to_string()))?
                    }
                    None => spec,
                };
                spec.seed = seed::derive(seed, "render", &id);
                out.push(PlannedVideo {
                    id,
                    label,
                    spec,
                    condition,
                });
                Ok(())
            };
            if config.sweeps.is_empty() {
                push(stem.clone(), base.clone(), None)?;
            }
            for (si, s) in config.sweeps.iter().enumerate() {
                let sweep = FactorSweep {
                    factor: s.factor,
                    x1: s.x1,
                    delta: s.delta,
                    count: s.count,
                    base: base.clone(),
                };
                let specs = enumerate_sweep(&sweep).map_err(|e| ConfigError::at(format!("/sweeps/{si}"), e.to_string()))?;
                for (i, spec) in specs.into_iter().enumerate() {
                    let value = s.factor.value_of(&spec.factors);
                    let condition = Condition::Sweep {
                        factor: s.factor,
                        value,
                    };
                    push(format!("{stem}_{}_{i:04}", s.factor), spec, Some(condition))?;
                }
            }
        }
    }
    let mut seen = std::collections::BTreeSet::new();
    if let Some(dup) = out.iter().find(|v| !seen.insert(v.id.as_str())) {
        return Err(ConfigError::at("/sweeps", format!("two sweeps produce the video id '{}'", dup.id)).into());
    }
    Ok(out)
}

/// Renders the plan into a dataset under `out`, replacing any previous one.
pub fn generate(config: &Config, out: &Path, seed: u64) -> Result<Manifest> {
    let clips = load_clips(config)?;
    let fps = clips.first().map(MotionClip::fps).ok_or_else(|| ConfigError::at("/render/clips", "needs at least one clip"))?;
    if let Some(i) = clips.iter().position(|c| c.fps() != fps) {
        return Err(ConfigError::at(
            format!("/render/clips/{i}"),
            format!("clip runs at {} fps but the first clip at {fps}; one dataset has one fps", clips[i].fps()),
        )
        .into());
    }
    let labels = label_space(config)?;
    let planned = plan(config, &clips, seed)?;
    log::info!("rendering {} videos", planned.len());
    prepare_dataset_dir(out)?;

    let videos = planned
        .par_iter()
        .map(|p| {
            let (video, masks) = render(&p.spec).map_err(|e| Error::data(format!("video '{}': {e}", p.id)))?;
            let video = Video::new(p.id.clone(), p.label, fps, video.into_frames())
                .map_err(|e| Error::data(format!("video '{}': {e}", p.id)))?;
            Ok(write_video(out, &video, Some(&masks), Some(p.spec.factors.clone()), p.condition.clone())?)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut manifest = Manifest {
        fps,
        labels: labels.labels().to_vec(),
        videos,
    };
    write_manifest(out, &manifest)?;
    manifest.videos.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(manifest)
}
