//! Foreground-only / background-only videos by black-mask superimposition.

use alloc::string::String;
use alloc::vec::Vec;

use crate::types::{Frame, MaskSequence, TypeError, Video};

/// Dropped-frame fraction above which a video pair is removed.
pub const DEFAULT_DROP_THRESHOLD: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SemanticError {
    #[error(transparent)]
    Mismatch(#[from] TypeError),
    #[error("video '{0}' has no frame with a detected foreground")]
    AllDropped(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemanticSplit {
    pub foreground: Video,
    pub background: Video,
    /// Source frame indices whose mask was empty.
    pub dropped_frames: Vec<usize>,
}

impl SemanticSplit {
    pub fn dropped_fraction(&self, source_frames: usize) -> f64 {
        self.dropped_frames.len() as f64 / source_frames as f64
    }
}

/// Keeps masked pixels in the foreground video and unmasked pixels in the
/// background video, everything else black. Frames with an all-zero mask are
/// left out of both outputs (indices are compacted).
///
/// Output ids carry the `_fg` / `_bg` suffixes.
pub fn split_fg_bg(video: &Video, masks: &MaskSequence) -> Result<SemanticSplit, SemanticError> {
    masks.check_pairing(video)?;
    let mut fg = Vec::new();
    let mut bg = Vec::new();
    let mut dropped_frames = Vec::new();
    for (i, (frame, mask)) in video.frames().iter().zip(masks.masks()).enumerate() {
        if mask.is_empty() {
            dropped_frames.push(i);
            continue;
        }
        let src = frame.pixels();
        let mut f = alloc::vec![0u8; src.len()];
        let mut b = alloc::vec![0u8; src.len()];
        for (p, &m) in mask.bits().iter().enumerate() {
            let px = &src[p * 3..p * 3 + 3];
            if m == 1 {
                f[p * 3..p * 3 + 3].copy_from_slice(px);
            } else {
                b[p * 3..p * 3 + 3].copy_from_slice(px);
            }
        }
        fg.push(Frame::new(frame.width(), frame.height(), f)?);
        bg.push(Frame::new(frame.width(), frame.height(), b)?);
    }
    if fg.is_empty() {
        return Err(SemanticError::AllDropped(video.video_id().into()));
    }
    let id = video.video_id();
    Ok(SemanticSplit {
        foreground: Video::new(alloc::format!("{id}_fg"), video.class_label(), video.fps(), fg)?,
        background: Video::new(alloc::format!("{id}_bg"), video.class_label(), video.fps(), bg)?,
        dropped_frames,
    })
}

/// Ids whose dropped-frame fraction is at most `threshold`, in input order.
pub fn filter_undetected<'a, I>(pairs: I, threshold: f64) -> Vec<String>
where
    I: IntoIterator<Item = (&'a str, f64)>,
{
    pairs
        .into_iter()
        .filter(|&(_, frac)| frac <= threshold)
        .map(|(id, _)| String::from(id))
        .collect()
}
