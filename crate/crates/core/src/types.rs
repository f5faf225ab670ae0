//! Shared domain types: frames, videos, masks, nuisance factors, labels and scores.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TypeError {
    #[error("frame dimensions must be positive, got {width}x{height}")]
    EmptyFrame { width: u32, height: u32 },
    #[error("pixel buffer holds {actual} bytes, expected {expected} for {width}x{height} RGB")]
    PixelLength {
        width: u32,
        height: u32,
        expected: usize,
        actual: usize,
    },
    #[error("mask buffer holds {actual} values, expected {expected}")]
    MaskLength { expected: usize, actual: usize },
    #[error("mask value {value} at offset {offset} is not 0 or 1")]
    MaskValue { offset: usize, value: u8 },
    #[error("video '{video_id}' has no frames")]
    NoFrames { video_id: String },
    #[error("video '{video_id}' frame {index} is {actual:?}, expected {expected:?}")]
    FrameSize {
        video_id: String,
        index: usize,
        expected: (u32, u32),
        actual: (u32, u32),
    },
    #[error("fps must be positive and finite, got {0}")]
    Fps(f64),
    #[error("mask count {masks} does not match frame count {frames}")]
    MaskCount { masks: usize, frames: usize },
    #[error("mask {index} is {actual:?}, frame size is {expected:?}")]
    MaskSize {
        index: usize,
        expected: (u32, u32),
        actual: (u32, u32),
    },
    #[error("camera distance must be positive and finite, got {0}")]
    Distance(f64),
    #[error("factor '{name}' must be finite, got {value}")]
    NonFinite { name: &'static str, value: f64 },
    #[error("light intensity must be >= 0, got {0}")]
    Light(f64),
    #[error("label space is empty")]
    NoLabels,
    #[error("duplicate label '{0}'")]
    DuplicateLabel(String),
    #[error("score {index} is not finite")]
    NonFiniteScore { index: usize },
    #[error("unknown factor '{0}', expected azimuth, elevation or distance")]
    UnknownFactor(String),
}

/// One RGB8 raster, row-major, three bytes per pixel.
#[derive(Clone, PartialEq, Eq)]
pub struct Frame {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl Frame {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, TypeError> {
        if width == 0 || height == 0 {
            return Err(TypeError::EmptyFrame { width, height });
        }
        let expected = width as usize * height as usize * 3;
        if pixels.len() != expected {
            return Err(TypeError::PixelLength {
                width,
                height,
                expected,
                actual: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// A frame filled with one color.
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Result<Self, TypeError> {
        let n = width as usize * height as usize;
        let mut pixels = Vec::with_capacity(n * 3);
        for _ in 0..n {
            pixels.extend_from_slice(&rgb);
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn size(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }
}

impl fmt::Debug for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Frame")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

/// An ordered, non-empty sequence of equally sized frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Video {
    frames: Vec<Frame>,
    fps: f64,
    class_label: usize,
    video_id: String,
}

impl Video {
    pub fn new(
        video_id: impl Into<String>,
        class_label: usize,
        fps: f64,
        frames: Vec<Frame>,
    ) -> Result<Self, TypeError> {
        let video_id = video_id.into();
        if !(fps.is_finite() && fps > 0.0) {
            return Err(TypeError::Fps(fps));
        }
        let first = frames.first().ok_or_else(|| TypeError::NoFrames {
            video_id: video_id.clone(),
        })?;
        let expected = first.size();
        if let Some((index, f)) = frames.iter().enumerate().find(|(_, f)| f.size() != expected) {
            return Err(TypeError::FrameSize {
                video_id,
                index,
                expected,
                actual: f.size(),
            });
        }
        Ok(Self {
            frames,
            fps,
            class_label,
            video_id,
        })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn class_label(&self) -> usize {
        self.class_label
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn size(&self) -> (u32, u32) {
        self.frames[0].size()
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    /// Same metadata, new frames. Used by transforms, which never mutate in place.
    pub fn with_frames(&self, frames: Vec<Frame>) -> Result<Self, TypeError> {
        Self::new(self.video_id.clone(), self.class_label, self.fps, frames)
    }

    pub fn with_id(mut self, video_id: impl Into<String>) -> Self {
        self.video_id = video_id.into();
        self
    }

    /// Frames concatenated frame-major, row-major: the wire payload layout.
    pub fn to_rgb_payload(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.frames.len() * self.frames[0].pixels.len());
        for f in &self.frames {
            out.extend_from_slice(&f.pixels);
        }
        out
    }
}

/// A binary raster; 1 marks person foreground.
#[derive(Clone, PartialEq, Eq)]
pub struct Mask {
    width: u32,
    height: u32,
    bits: Vec<u8>,
}

impl Mask {
    pub fn new(width: u32, height: u32, bits: Vec<u8>) -> Result<Self, TypeError> {
        if width == 0 || height == 0 {
            return Err(TypeError::EmptyFrame { width, height });
        }
        let expected = width as usize * height as usize;
        if bits.len() != expected {
            return Err(TypeError::MaskLength {
                expected,
                actual: bits.len(),
            });
        }
        if let Some((offset, &value)) = bits.iter().enumerate().find(|(_, &v)| v > 1) {
            return Err(TypeError::MaskValue { offset, value });
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn size(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize] == 1
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|&b| b == 0)
    }
}

impl fmt::Debug for Mask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Mask")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("set", &self.count())
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskSequence {
    masks: Vec<Mask>,
}

impl MaskSequence {
    pub fn new(masks: Vec<Mask>) -> Self {
        Self { masks }
    }

    /// Pairs the masks with a video, checking count and per-frame dimensions.
    pub fn paired(masks: Vec<Mask>, video: &Video) -> Result<Self, TypeError> {
        let seq = Self { masks };
        seq.check_pairing(video)?;
        Ok(seq)
    }

    pub fn check_pairing(&self, video: &Video) -> Result<(), TypeError> {
        if self.masks.len() != video.frame_count() {
            return Err(TypeError::MaskCount {
                masks: self.masks.len(),
                frames: video.frame_count(),
            });
        }
        let expected = video.size();
        for (index, m) in self.masks.iter().enumerate() {
            if m.size() != expected {
                return Err(TypeError::MaskSize {
                    index,
                    expected,
                    actual: m.size(),
                });
            }
        }
        Ok(())
    }

    pub fn masks(&self) -> &[Mask] {
        &self.masks
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }
}

/// A scalar nuisance factor that can be swept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Factor {
    Azimuth,
    Elevation,
    Distance,
}

impl Factor {
    pub fn name(self) -> &'static str {
        match self {
            Factor::Azimuth => "azimuth",
            Factor::Elevation => "elevation",
            Factor::Distance => "distance",
        }
    }

    /// Whether the factor wraps around (extrema detection treats it as circular).
    pub fn is_periodic(self) -> bool {
        matches!(self, Factor::Azimuth)
    }

    pub fn value_of(self, factors: &FactorVector) -> f64 {
        match self {
            Factor::Azimuth => factors.azimuth_deg,
            Factor::Elevation => factors.elevation_deg,
            Factor::Distance => factors.distance,
        }
    }
}

impl core::str::FromStr for Factor {
    type Err = TypeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "azimuth" => Ok(Factor::Azimuth),
            "elevation" => Ok(Factor::Elevation),
            "distance" => Ok(Factor::Distance),
            other => Err(TypeError::UnknownFactor(other.to_string())),
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Nuisance factors of one rendered scene.
///
/// Construct through [`FactorVector::new`] (or deserialize) so the azimuth is
/// normalized into `[0, 360)` and the distance is checked.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "FactorVectorRepr"))]
pub struct FactorVector {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub distance: f64,
    pub appearance_id: String,
    pub background_id: String,
    pub light_intensity: f64,
}

#[cfg(feature = "serde")]
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FactorVectorRepr {
    azimuth_deg: f64,
    elevation_deg: f64,
    distance: f64,
    appearance_id: String,
    background_id: String,
    light_intensity: f64,
}

#[cfg(feature = "serde")]
impl TryFrom<FactorVectorRepr> for FactorVector {
    type Error = TypeError;

    fn try_from(r: FactorVectorRepr) -> Result<Self, Self::Error> {
        FactorVector::new(
            r.azimuth_deg,
            r.elevation_deg,
            r.distance,
            r.appearance_id,
            r.background_id,
            r.light_intensity,
        )
    }
}

impl FactorVector {
    pub fn new(
        azimuth_deg: f64,
        elevation_deg: f64,
        distance: f64,
        appearance_id: impl Into<String>,
        background_id: impl Into<String>,
        light_intensity: f64,
    ) -> Result<Self, TypeError> {
        for (name, value) in [("azimuth_deg", azimuth_deg), ("elevation_deg", elevation_deg)] {
            if !value.is_finite() {
                return Err(TypeError::NonFinite { name, value });
            }
        }
        if !(distance.is_finite() && distance > 0.0) {
            return Err(TypeError::Distance(distance));
        }
        if !(light_intensity.is_finite() && light_intensity >= 0.0) {
            return Err(TypeError::Light(light_intensity));
        }
        Ok(Self {
            azimuth_deg: normalize_azimuth(azimuth_deg),
            elevation_deg,
            distance,
            appearance_id: appearance_id.into(),
            background_id: background_id.into(),
            light_intensity,
        })
    }

    /// Returns a copy with one scalar factor replaced (and re-validated).
    pub fn with_factor(&self, factor: Factor, value: f64) -> Result<Self, TypeError> {
        let mut v = self.clone();
        match factor {
            Factor::Azimuth => v.azimuth_deg = value,
            Factor::Elevation => v.elevation_deg = value,
            Factor::Distance => v.distance = value,
        }
        Self::new(
            v.azimuth_deg,
            v.elevation_deg,
            v.distance,
            v.appearance_id,
            v.background_id,
            v.light_intensity,
        )
    }
}

/// Maps any finite angle in degrees into `[0, 360)`.
pub fn normalize_azimuth(deg: f64) -> f64 {
    let mut r = libm::fmod(deg, 360.0);
    if r < 0.0 {
        r += 360.0;
    }
    if r >= 360.0 {
        r -= 360.0;
    }
    // fold -0.0 into 0.0
    r + 0.0
}

/// Ordered class names; the index of a name is its class id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSpace {
    labels: Vec<String>,
}

impl LabelSpace {
    pub fn new(labels: Vec<String>) -> Result<Self, TypeError> {
        if labels.is_empty() {
            return Err(TypeError::NoLabels);
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(TypeError::DuplicateLabel(l.clone()));
            }
        }
        Ok(Self { labels })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == name)
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.labels.get(id).map(String::as_str)
    }
}

/// One finite score per label, exactly as the model returned it.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn new(scores: Vec<f64>) -> Result<Self, TypeError> {
        if let Some(index) = scores.iter().position(|s| !s.is_finite()) {
            return Err(TypeError::NonFiniteScore { index });
        }
        Ok(Self(scores))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, class_id: usize) -> Option<f64> {
        self.0.get(class_id).copied()
    }

    /// Index of the highest score; ties go to the lower class id.
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, &s) in self.0.iter().enumerate() {
            match best {
                Some(b) if self.0[b] >= s => {}
                _ => best = Some(i),
            }
        }
        best
    }
}

/// A named intermediate tensor returned by a model: row-major `values` with
/// `shape.iter().product() == values.len()`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct FeatureTensor {
    pub shape: Vec<usize>,
    pub values: Vec<f32>,
}

impl FeatureTensor {
    pub fn new(shape: Vec<usize>, values: Vec<f32>) -> Option<Self> {
        (shape.iter().product::<usize>() == values.len()).then_some(Self { shape, values })
    }
}
