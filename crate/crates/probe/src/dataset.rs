//! On-disk datasets: `manifest.json` plus one directory of PNG frames (and
//! optional masks) per video.
//!
//! ```text
//! root/
//!   manifest.json
//!   videos/<id>/frame_000000.png   8-bit RGB
//!   videos/<id>/mask_000000.png    8-bit gray, 0 or 255
//! ```

use std::collections::BTreeSet;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use ipt_core::metrics::Condition;
use ipt_core::{FactorVector, Frame, LabelSpace, Mask, MaskSequence, Video};
use serde::{Deserialize, Serialize};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("no manifest at {0}")]
    MissingManifest(PathBuf),
    #[error("{path}: malformed manifest at '{pointer}': {message}")]
    Malformed {
        path: PathBuf,
        pointer: String,
        message: String,
    },
    #[error("manifest '{pointer}': {message}")]
    Invalid { pointer: String, message: String },
    #[error("duplicate video_id '{id}' at '{pointer}'")]
    DuplicateId { id: String, pointer: String },
    #[error("video '{video_id}': {what} '{path}' does not exist")]
    DanglingPath {
        video_id: String,
        what: &'static str,
        path: PathBuf,
    },
    #[error("video '{video_id}': {message}")]
    Content { video_id: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl DatasetError {
    /// Attaches the video id to content errors raised below the video level.
    fn for_video(self, id: &str) -> Self {
        match self {
            DatasetError::Content { video_id, message } if video_id.is_empty() => DatasetError::Content {
                video_id: id.to_string(),
                message,
            },
            other => other,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoEntry {
    pub id: String,
    pub path: String,
    pub label: usize,
    #[serde(default)]
    pub mask_path: Option<String>,
    #[serde(default)]
    pub factors: Option<FactorVector>,
    /// What variant of the data this video is; absent means original.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<Condition>,
}

impl VideoEntry {
    pub fn condition(&self) -> Condition {
        self.condition.clone().unwrap_or(Condition::Original)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub fps: f64,
    pub labels: Vec<String>,
    pub videos: Vec<VideoEntry>,
}

impl Manifest {
    /// Checks everything that does not need the file system.
    pub fn validate(&self) -> Result<LabelSpace, DatasetError> {
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(DatasetError::Invalid {
                pointer: "/fps".into(),
                message: format!("must be a positive number, got {}", self.fps),
            });
        }
        let labels = LabelSpace::new(self.labels.clone()).map_err(|e| DatasetError::Invalid {
            pointer: "/labels".into(),
            message: e.to_string(),
        })?;
        let mut seen = BTreeSet::new();
        for (i, v) in self.videos.iter().enumerate() {
            if !seen.insert(v.id.as_str()) {
                return Err(DatasetError::DuplicateId {
                    id: v.id.clone(),
                    pointer: format!("/videos/{i}/id"),
                });
            }
            if v.id.is_empty() || v.id.contains(['/', '\\']) {
                return Err(DatasetError::Invalid {
                    pointer: format!("/videos/{i}/id"),
                    message: format!("'{}' is not a usable video id", v.id),
                });
            }
            if v.label >= labels.len() {
                return Err(DatasetError::Invalid {
                    pointer: format!("/videos/{i}/label"),
                    message: format!("label {} out of range for {} labels (video '{}')", v.label, labels.len(), v.id),
                });
            }
        }
        Ok(labels)
    }
}

/// A loaded manifest; videos are read on demand.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    pub manifest: Manifest,
    pub labels: LabelSpace,
}

pub fn load_dataset(root: &Path) -> Result<Dataset, DatasetError> {
    let path = root.join(MANIFEST);
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(DatasetError::MissingManifest(path)),
        Err(e) => return Err(io_err(&path)(e)),
    };
    let de = &mut serde_json::Deserializer::from_str(&text);
    let manifest: Manifest = serde_path_to_error::deserialize(de).map_err(|e| DatasetError::Malformed {
        path: path.clone(),
        pointer: json_pointer(e.path()),
        message: e.inner().to_string(),
    })?;
    let labels = manifest.validate()?;
    for v in &manifest.videos {
        let dir = root.join(&v.path);
        if !dir.is_dir() {
            return Err(DatasetError::DanglingPath {
                video_id: v.id.clone(),
                what: "path",
                path: dir,
            });
        }
        if let Some(m) = &v.mask_path {
            let dir = root.join(m);
            if !dir.is_dir() {
                return Err(DatasetError::DanglingPath {
                    video_id: v.id.clone(),
                    what: "mask_path",
                    path: dir,
                });
            }
        }
    }
    Ok(Dataset {
        root: root.to_path_buf(),
        manifest,
        labels,
    })
}

/// Renders a serde path (`videos[2].factors.distance`) as a JSON pointer;
/// the empty string is the whole document.
pub fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{}", key.replace('~', "~0").replace('/', "~1"))),
            Segment::Enum { variant } => out.push_str(&format!("/{variant}")),
            Segment::Unknown => out.push_str("/?"),
        }
    }
    out
}

pub fn frame_name(i: usize) -> String {
    format!("frame_{i:06}.png")
}

pub fn mask_name(i: usize) -> String {
    format!("mask_{i:06}.png")
}

fn count_numbered(dir: &Path, name: fn(usize) -> String) -> usize {
    (0..).take_while(|&i| dir.join(name(i)).is_file()).count()
}

impl Dataset {
    pub fn entry(&self, video_id: &str) -> Option<&VideoEntry> {
        self.manifest.videos.iter().find(|v| v.id == video_id)
    }

    pub fn load_video(&self, entry: &VideoEntry) -> Result<Video, DatasetError> {
        let dir = self.root.join(&entry.path);
        let n = count_numbered(&dir, frame_name);
        if n == 0 {
            return Err(DatasetError::Content {
                video_id: entry.id.clone(),
                message: format!("no {} in {}", frame_name(0), dir.display()),
            });
        }
        let frames = (0..n)
            .map(|i| read_rgb(&dir.join(frame_name(i))))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.for_video(&entry.id))?;
        Video::new(entry.id.clone(), entry.label, self.manifest.fps, frames).map_err(|e| DatasetError::Content {
            video_id: entry.id.clone(),
            message: e.to_string(),
        })
    }

    /// `None` when the entry has no masks.
    pub fn load_masks(&self, entry: &VideoEntry, video: &Video) -> Result<Option<MaskSequence>, DatasetError> {
        let Some(mask_path) = &entry.mask_path else {
            return Ok(None);
        };
        let dir = self.root.join(mask_path);
        let n = count_numbered(&dir, mask_name);
        let masks = (0..n)
            .map(|i| read_mask(&dir.join(mask_name(i))))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.for_video(&entry.id))?;
        MaskSequence::paired(masks, video)
            .map(Some)
            .map_err(|e| DatasetError::Content {
                video_id: entry.id.clone(),
                message: e.to_string(),
            })
    }
}

fn decode_png(path: &Path) -> Result<(png::OutputInfo, Vec<u8>), DatasetError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let bad = |message: String| DatasetError::Content {
        video_id: String::new(),
        message: format!("{}: {message}", path.display()),
    };
    let mut decoder = png::Decoder::new(std::io::BufReader::new(file));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(|e| bad(e.to_string()))?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(|e| bad(e.to_string()))?;
    buf.truncate(info.buffer_size());
    if info.bit_depth != png::BitDepth::Eight {
        return Err(bad(format!("expected 8-bit samples, got {:?}", info.bit_depth)));
    }
    Ok((info, buf))
}

pub fn read_rgb(path: &Path) -> Result<Frame, DatasetError> {
    let (info, buf) = decode_png(path)?;
    if info.color_type != png::ColorType::Rgb {
        return Err(DatasetError::Content {
            video_id: String::new(),
            message: format!("{}: expected RGB, got {:?}", path.display(), info.color_type),
        });
    }
    Frame::new(info.width, info.height, buf).map_err(|e| DatasetError::Content {
        video_id: String::new(),
        message: format!("{}: {e}", path.display()),
    })
}

pub fn read_mask(path: &Path) -> Result<Mask, DatasetError> {
    let (info, buf) = decode_png(path)?;
    let bad = |message: String| DatasetError::Content {
        video_id: String::new(),
        message: format!("{}: {message}", path.display()),
    };
    if info.color_type != png::ColorType::Grayscale {
        return Err(bad(format!("expected 8-bit grayscale mask, got {:?}", info.color_type)));
    }
    if let Some(pos) = buf.iter().position(|&v| v != 0 && v != 255) {
        return Err(bad(format!(
            "mask value {} at pixel {pos}; only 0 and 255 are allowed",
            buf[pos]
        )));
    }
    let bits = buf.into_iter().map(|v| u8::from(v == 255)).collect();
    Mask::new(info.width, info.height, bits).map_err(|e| bad(e.to_string()))
}

fn write_png(path: &Path, width: u32, height: u32, color: png::ColorType, data: &[u8]) -> Result<(), DatasetError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), width, height);
    enc.set_color(color);
    enc.set_depth(png::BitDepth::Eight);
    enc.set_compression(png::Compression::Default);
    enc.set_filter(png::FilterType::Sub);
    enc.set_adaptive_filter(png::AdaptiveFilterType::NonAdaptive);
    let to_io = |e: png::EncodingError| DatasetError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    };
    let mut writer = enc.write_header().map_err(to_io)?;
    writer.write_image_data(data).map_err(to_io)?;
    writer.finish().map_err(to_io)
}

pub fn write_rgb(path: &Path, frame: &Frame) -> Result<(), DatasetError> {
    write_png(path, frame.width(), frame.height(), png::ColorType::Rgb, frame.pixels())
}

pub fn write_mask(path: &Path, mask: &Mask) -> Result<(), DatasetError> {
    let data: Vec<u8> = mask.bits().iter().map(|&b| b * 255).collect();
    write_png(path, mask.width(), mask.height(), png::ColorType::Grayscale, &data)
}

/// Relative directory used for a video's frames and masks.
pub fn video_dir(video_id: &str) -> String {
    format!("videos/{video_id}")
}

/// Writes one video (and its masks, alongside the frames) under `root`,
/// replacing whatever was there, and returns its manifest entry.
///
/// Safe to call concurrently for distinct video ids.
pub fn write_video(
    root: &Path,
    video: &Video,
    masks: Option<&MaskSequence>,
    factors: Option<FactorVector>,
    condition: Option<Condition>,
) -> Result<VideoEntry, DatasetError> {
    let rel = video_dir(video.video_id());
    let dir = root.join(&rel);
    if dir.exists() {
        fs::remove_dir_all(&dir).map_err(io_err(&dir))?;
    }
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    for (i, f) in video.frames().iter().enumerate() {
        write_rgb(&dir.join(frame_name(i)), f)?;
    }
    if let Some(masks) = masks {
        masks.check_pairing(video).map_err(|e| DatasetError::Content {
            video_id: video.video_id().to_string(),
            message: e.to_string(),
        })?;
        for (i, m) in masks.masks().iter().enumerate() {
            write_mask(&dir.join(mask_name(i)), m)?;
        }
    }
    Ok(VideoEntry {
        id: video.video_id().to_string(),
        path: rel.clone(),
        label: video.class_label(),
        mask_path: masks.map(|_| rel),
        factors,
        condition,
    })
}

/// Writes `manifest.json` with videos sorted by id.
pub fn write_manifest(root: &Path, manifest: &Manifest) -> Result<(), DatasetError> {
    let mut sorted = manifest.clone();
    sorted.videos.sort_by(|a, b| a.id.cmp(&b.id));
    sorted.validate()?;
    fs::create_dir_all(root).map_err(io_err(root))?;
    let path = root.join(MANIFEST);
    let mut text = serde_json::to_string_pretty(&sorted).expect("manifest serializes");
    text.push('\n');
    fs::write(&path, text).map_err(io_err(&path))
}

/// One video to persist, with its optional masks and metadata.
pub struct VideoRecord {
    pub video: Video,
    pub masks: Option<MaskSequence>,
    pub factors: Option<FactorVector>,
    pub condition: Option<Condition>,
}

/// Writes a whole dataset; the manifest is derived from the videos.
pub fn save_dataset(root: &Path, labels: &LabelSpace, fps: f64, videos: &[VideoRecord]) -> Result<Manifest, DatasetError> {
    fs::create_dir_all(root).map_err(io_err(root))?;
    let entries = videos
        .iter()
        .map(|r| write_video(root, &r.video, r.masks.as_ref(), r.factors.clone(), r.condition.clone()))
        .collect::<Result<Vec<_>, _>>()?;
    let manifest = Manifest {
        fps,
        labels: labels.labels().to_vec(),
        videos: entries,
    };
    write_manifest(root, &manifest)?;
    let mut sorted = manifest;
    sorted.videos.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(sorted)
}
