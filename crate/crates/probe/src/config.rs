//! The experiment configuration: one JSON document with the sections
//! `render`, `sweeps`, `transforms`, `evaluate` and `report`.
//!
//! Every section is optional and has defaults. Errors point at the offending
//! value with a JSON pointer. The schema lives in `schema/config.schema.json`.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use ipt_core::metrics::RegimeThresholds;
use ipt_core::render::{background_ids, AppearanceProfile, RenderStyle};
use ipt_core::transforms::{default_suite, ImageTransformSpec};
use ipt_core::Factor;
use serde::{Deserialize, Serialize};

use crate::dataset::json_pointer;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("config '{pointer}': {message}")]
pub struct ConfigError {
    pub pointer: String,
    pub message: String,
}

impl ConfigError {
    pub fn at(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            pointer: pointer.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub render: RenderConfig,
    #[serde(default)]
    pub sweeps: Vec<SweepConfig>,
    #[serde(default = "default_suite")]
    pub transforms: Vec<ImageTransformSpec>,
    #[serde(default)]
    pub evaluate: EvaluateConfig,
    #[serde(default)]
    pub report: ReportConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            render: RenderConfig::default(),
            sweeps: Vec::new(),
            transforms: default_suite(),
            evaluate: EvaluateConfig::default(),
            report: ReportConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClipConfig {
    /// BVH file, relative to the config file.
    pub path: PathBuf,
    /// Activity label; defaults to the file stem.
    #[serde(default)]
    pub label: Option<String>,
    /// Prefix of the generated video ids; defaults to the file stem.
    #[serde(default)]
    pub name: Option<String>,
    /// Keep only the first `max_frames` frames.
    #[serde(default)]
    pub max_frames: Option<usize>,
}

impl ClipConfig {
    fn stem(&self) -> String {
        self.path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    }

    pub fn name(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.stem())
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.stem())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseFactors {
    #[serde(default)]
    pub azimuth_deg: f64,
    #[serde(default)]
    pub elevation_deg: f64,
    #[serde(default = "default_distance")]
    pub distance: f64,
    #[serde(default = "default_background")]
    pub background_id: String,
    #[serde(default = "one")]
    pub light_intensity: f64,
}

impl Default for BaseFactors {
    fn default() -> Self {
        Self {
            azimuth_deg: 0.0,
            elevation_deg: 0.0,
            distance: default_distance(),
            background_id: default_background(),
            light_intensity: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomizeConfig {
    #[serde(default)]
    pub backgrounds: Vec<String>,
    #[serde(default)]
    pub light_intensities: Vec<f64>,
    #[serde(default)]
    pub appearances: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderConfig {
    #[serde(default)]
    pub clips: Vec<ClipConfig>,
    #[serde(default = "default_image_size")]
    pub image_size: [u32; 2],
    /// Pixels; when absent it is derived from `height_fraction`.
    #[serde(default)]
    pub focal_length: Option<f64>,
    /// Fraction of the image height the figure spans at `reference_distance`.
    #[serde(default = "default_height_fraction")]
    pub height_fraction: f64,
    #[serde(default = "default_distance")]
    pub reference_distance: f64,
    #[serde(default = "default_style")]
    pub style: String,
    #[serde(default = "default_appearances")]
    pub appearances: Vec<String>,
    #[serde(default)]
    pub base: BaseFactors,
    /// Per-video resampling of background, light and appearance.
    #[serde(default)]
    pub randomize: Option<RandomizeConfig>,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            clips: Vec::new(),
            image_size: default_image_size(),
            focal_length: None,
            height_fraction: default_height_fraction(),
            reference_distance: default_distance(),
            style: default_style(),
            appearances: default_appearances(),
            base: BaseFactors::default(),
            randomize: None,
        }
    }
}

impl RenderConfig {
    pub fn style(&self) -> RenderStyle {
        RenderStyle::parse(&self.style).expect("validated")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub factor: Factor,
    pub x1: f64,
    pub delta: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateConfig {
    /// `tcp:HOST:PORT` or `exec:COMMAND ...`.
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default = "one_usize")]
    pub connections: usize,
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
    #[serde(default)]
    pub features: Vec<String>,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self {
            model: None,
            connections: 1,
            timeout_s: default_timeout(),
            features: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    #[serde(default = "default_window")]
    pub smoothing_window: usize,
    #[serde(default = "default_pca_dims")]
    pub pca_dims: usize,
    #[serde(default = "default_lo")]
    pub regime_lo: f64,
    #[serde(default = "default_hi")]
    pub regime_hi: f64,
    #[serde(default = "default_drop")]
    pub drop_threshold: f64,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            smoothing_window: default_window(),
            pca_dims: default_pca_dims(),
            regime_lo: default_lo(),
            regime_hi: default_hi(),
            drop_threshold: default_drop(),
        }
    }
}

impl ReportConfig {
    pub fn thresholds(&self) -> RegimeThresholds {
        RegimeThresholds {
            lo: self.regime_lo,
            hi: self.regime_hi,
        }
    }
}

fn default_distance() -> f64 {
    100.0
}
fn default_background() -> String {
    "gray".into()
}
fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn default_image_size() -> [u32; 2] {
    [64, 64]
}
fn default_height_fraction() -> f64 {
    1.0 / 3.0
}
fn default_style() -> String {
    "stick-figure".into()
}
fn default_appearances() -> Vec<String> {
    vec!["crimson".into()]
}
fn default_timeout() -> f64 {
    120.0
}
fn default_window() -> usize {
    ipt_core::analysis::DEFAULT_SMOOTHING_WINDOW
}
fn default_pca_dims() -> usize {
    ipt_core::analysis::DEFAULT_PCA_DIMS
}
fn default_lo() -> f64 {
    RegimeThresholds::default().lo
}
fn default_hi() -> f64 {
    RegimeThresholds::default().hi
}
fn default_drop() -> f64 {
    ipt_core::semantic::DEFAULT_DROP_THRESHOLD
}

fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

impl Config {
    /// Parses and validates a config document.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let mut doc: serde_json::Value = serde_json::from_str(text).map_err(|e| ConfigError::at("", e.to_string()))?;
        if !doc.is_object() {
            return Err(ConfigError::at("", "the config must be a JSON object"));
        }
        // parameterless transforms may be written as just {"kind": ...}
        if let Some(items) = doc.get_mut("transforms").and_then(serde_json::Value::as_array_mut) {
            for t in items.iter_mut().filter_map(serde_json::Value::as_object_mut) {
                t.entry("params").or_insert_with(|| serde_json::json!({}));
            }
        }
        let config: Config =
            serde_path_to_error::deserialize(doc).map_err(|e| ConfigError::at(json_pointer(e.path()), e.inner().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file; clip paths are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::at("", format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for clip in &mut config.render.clips {
            if clip.path.is_relative() {
                clip.path = base.join(&clip.path);
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let r = &self.render;
        let mut names = BTreeSet::new();
        for (i, clip) in r.clips.iter().enumerate() {
            let name = clip.name();
            if name.is_empty() || name.contains(['/', '\\']) {
                return Err(ConfigError::at(format!("/render/clips/{i}/name"), format!("'{name}' is not a usable id prefix")));
            }
            if !names.insert(name.clone()) {
                return Err(ConfigError::at(
                    format!("/render/clips/{i}"),
                    format!("two clips share the id prefix '{name}'; set distinct \"name\"s"),
                ));
            }
            if clip.max_frames == Some(0) {
                return Err(ConfigError::at(format!("/render/clips/{i}/max_frames"), "must be >= 1"));
            }
        }
        let [w, h] = r.image_size;
        if w < 32 || h < 32 {
            return Err(ConfigError::at("/render/image_size", format!("must be at least 32x32, got {w}x{h}")));
        }
        if let Some(f) = r.focal_length {
            if !positive(f) {
                return Err(ConfigError::at("/render/focal_length", format!("must be > 0, got {f}")));
            }
        }
        if !positive(r.height_fraction) {
            return Err(ConfigError::at("/render/height_fraction", "must be > 0"));
        }
        if !positive(r.reference_distance) {
            return Err(ConfigError::at("/render/reference_distance", "must be > 0"));
        }
        if RenderStyle::parse(&r.style).is_none() {
            return Err(ConfigError::at(
                "/render/style",
                format!("unknown style '{}', expected stick-figure or point-light", r.style),
            ));
        }
        if r.appearances.is_empty() {
            return Err(ConfigError::at("/render/appearances", "needs at least one appearance"));
        }
        let known_appearances = AppearanceProfile::builtin_ids();
        let known_backgrounds = background_ids();
        let check_appearance = |ptr: String, id: &str| {
            if known_appearances.contains(&id) {
                Ok(())
            } else {
                Err(ConfigError::at(ptr, format!("unknown appearance '{id}', expected one of {known_appearances:?}")))
            }
        };
        let check_background = |ptr: String, id: &str| {
            if known_backgrounds.contains(&id) {
                Ok(())
            } else {
                Err(ConfigError::at(ptr, format!("unknown background '{id}', expected one of {known_backgrounds:?}")))
            }
        };
        for (i, a) in r.appearances.iter().enumerate() {
            check_appearance(format!("/render/appearances/{i}"), a)?;
        }
        let mut seen = BTreeSet::new();
        for (i, a) in r.appearances.iter().enumerate() {
            if !seen.insert(a) {
                return Err(ConfigError::at(format!("/render/appearances/{i}"), format!("duplicate appearance '{a}'")));
            }
        }
        let b = &r.base;
        check_background("/render/base/background_id".into(), &b.background_id)?;
        if !positive(b.distance) {
            return Err(ConfigError::at("/render/base/distance", "must be > 0"));
        }
        if !(b.light_intensity.is_finite() && b.light_intensity >= 0.0) {
            return Err(ConfigError::at("/render/base/light_intensity", "must be >= 0"));
        }
        if !b.azimuth_deg.is_finite() {
            return Err(ConfigError::at("/render/base/azimuth_deg", "must be finite"));
        }
        if !(b.elevation_deg.is_finite() && b.elevation_deg.abs() < 90.0) {
            return Err(ConfigError::at("/render/base/elevation_deg", "must be strictly between -90 and 90"));
        }
        if let Some(rz) = &r.randomize {
            for (i, id) in rz.backgrounds.iter().enumerate() {
                check_background(format!("/render/randomize/backgrounds/{i}"), id)?;
            }
            for (i, id) in rz.appearances.iter().enumerate() {
                check_appearance(format!("/render/randomize/appearances/{i}"), id)?;
            }
            for (i, &l) in rz.light_intensities.iter().enumerate() {
                if !(l.is_finite() && l >= 0.0) {
                    return Err(ConfigError::at(format!("/render/randomize/light_intensities/{i}"), "must be >= 0"));
                }
            }
        }

        for (i, s) in self.sweeps.iter().enumerate() {
            if s.count == 0 {
                return Err(ConfigError::at(format!("/sweeps/{i}/count"), "must be >= 1"));
            }
            if !(s.delta.is_finite() && s.delta != 0.0) {
                return Err(ConfigError::at(format!("/sweeps/{i}/delta"), "must be finite and non-zero"));
            }
            if !s.x1.is_finite() {
                return Err(ConfigError::at(format!("/sweeps/{i}/x1"), "must be finite"));
            }
            let last = s.x1 + (s.count - 1) as f64 * s.delta;
            match s.factor {
                Factor::Distance if s.x1.min(last) <= 0.0 => {
                    return Err(ConfigError::at(format!("/sweeps/{i}"), "distance sweep reaches a non-positive distance"));
                }
                Factor::Elevation if s.x1.abs() >= 90.0 || last.abs() >= 90.0 => {
                    return Err(ConfigError::at(format!("/sweeps/{i}"), "elevation sweep reaches |elevation| >= 90"));
                }
                _ => {}
            }
        }

        let mut kinds = BTreeSet::new();
        for (i, t) in self.transforms.iter().enumerate() {
            t.validate().map_err(|e| ConfigError::at(format!("/transforms/{i}/params"), e.to_string()))?;
            if !kinds.insert(t.kind()) {
                return Err(ConfigError::at(format!("/transforms/{i}/kind"), format!("'{}' listed twice", t.kind())));
            }
        }

        let e = &self.evaluate;
        if e.connections == 0 {
            return Err(ConfigError::at("/evaluate/connections", "must be >= 1"));
        }
        if !positive(e.timeout_s) {
            return Err(ConfigError::at("/evaluate/timeout_s", "must be > 0"));
        }
        if let Some(m) = &e.model {
            crate::protocol::Endpoint::parse(m).map_err(|err| ConfigError::at("/evaluate/model", err.to_string()))?;
        }

        let rep = &self.report;
        if rep.smoothing_window == 0 || rep.smoothing_window % 2 == 0 {
            return Err(ConfigError::at("/report/smoothing_window", "must be odd and >= 1"));
        }
        if rep.pca_dims == 0 {
            return Err(ConfigError::at("/report/pca_dims", "must be >= 1"));
        }
        if !(rep.regime_lo.is_finite() && rep.regime_hi.is_finite() && rep.regime_lo <= rep.regime_hi) {
            return Err(ConfigError::at("/report/regime_lo", "need finite regime_lo <= regime_hi"));
        }
        if !(0.0..=1.0).contains(&rep.drop_threshold) {
            return Err(ConfigError::at("/report/drop_threshold", "must be within [0, 1]"));
        }
        Ok(())
    }

    /// Transform spec of the given kind from the config, else its defaults.
    pub fn transform(&self, kind: &str) -> Result<ImageTransformSpec, ConfigError> {
        if let Some(t) = self.transforms.iter().find(|t| t.kind() == kind) {
            return Ok(t.clone());
        }
        kind.parse().map_err(|e: ipt_core::transforms::TransformError| ConfigError::at("/transforms", e.to_string()))
    }
}
