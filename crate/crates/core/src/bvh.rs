//! BVH motion-capture parsing and forward kinematics.
//!
//! A BVH file declares a joint hierarchy (`HIERARCHY`) followed by one row of
//! channel values per frame (`MOTION`). Rotations are in degrees and are
//! applied intrinsically in the order the channels are declared; translation
//! channels add to the joint's static offset. No unit conversion is applied.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::geom::{Mat3, Rigid, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Xposition,
    Yposition,
    Zposition,
    Xrotation,
    Yrotation,
    Zrotation,
}

impl Channel {
    fn parse(s: &str) -> Option<Channel> {
        Some(match s {
            "Xposition" => Channel::Xposition,
            "Yposition" => Channel::Yposition,
            "Zposition" => Channel::Zposition,
            "Xrotation" => Channel::Xrotation,
            "Yrotation" => Channel::Yrotation,
            "Zrotation" => Channel::Zrotation,
            _ => return None,
        })
    }

    pub fn is_position(self) -> bool {
        matches!(
            self,
            Channel::Xposition | Channel::Yposition | Channel::Zposition
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::Xposition => "Xposition",
            Channel::Yposition => "Yposition",
            Channel::Zposition => "Zposition",
            Channel::Xrotation => "Xrotation",
            Channel::Yrotation => "Yrotation",
            Channel::Zrotation => "Zrotation",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub name: String,
    pub parent: Option<usize>,
    pub offset: Vec3,
    pub channels: Vec<Channel>,
}

/// A bone tip without channels, attached to a leaf joint.
#[derive(Debug, Clone, PartialEq)]
pub struct EndSite {
    pub parent: usize,
    pub offset: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    joints: Vec<Joint>,
    end_sites: Vec<EndSite>,
    channel_starts: Vec<usize>,
    channel_count: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SkeletonError {
    #[error("skeleton has no joints")]
    Empty,
    #[error("joint 0 must be the root")]
    RootHasParent,
    #[error("joint {0} has no parent; only one root is allowed")]
    SecondRoot(usize),
    #[error("joint {joint} references parent {parent} that is not declared before it")]
    ParentOrder { joint: usize, parent: usize },
    #[error("end site references unknown joint {0}")]
    EndSiteParent(usize),
}

impl Skeleton {
    pub fn new(joints: Vec<Joint>, end_sites: Vec<EndSite>) -> Result<Self, SkeletonError> {
        if joints.is_empty() {
            return Err(SkeletonError::Empty);
        }
        if joints[0].parent.is_some() {
            return Err(SkeletonError::RootHasParent);
        }
        for (i, j) in joints.iter().enumerate().skip(1) {
            match j.parent {
                None => return Err(SkeletonError::SecondRoot(i)),
                Some(p) if p >= i => return Err(SkeletonError::ParentOrder { joint: i, parent: p }),
                Some(_) => {}
            }
        }
        if let Some(e) = end_sites.iter().find(|e| e.parent >= joints.len()) {
            return Err(SkeletonError::EndSiteParent(e.parent));
        }
        let mut channel_starts = Vec::with_capacity(joints.len());
        let mut channel_count = 0;
        for j in &joints {
            channel_starts.push(channel_count);
            channel_count += j.channels.len();
        }
        Ok(Self {
            joints,
            end_sites,
            channel_starts,
            channel_count,
        })
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn end_sites(&self) -> &[EndSite] {
        &self.end_sites
    }

    pub fn channel_count(&self) -> usize {
        self.channel_count
    }

    /// Number of points produced by forward kinematics (joints, then end sites).
    pub fn point_count(&self) -> usize {
        self.joints.len() + self.end_sites.len()
    }

    /// `(parent point, child point)` pairs, indexed like [`PoseFrame::joint_positions`].
    pub fn bones(&self) -> Vec<(usize, usize)> {
        let mut bones: Vec<(usize, usize)> = self
            .joints
            .iter()
            .enumerate()
            .filter_map(|(i, j)| j.parent.map(|p| (p, i)))
            .collect();
        let n = self.joints.len();
        bones.extend(self.end_sites.iter().enumerate().map(|(k, e)| (e.parent, n + k)));
        bones
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClipError {
    #[error("frame time must be positive and finite, got {0}")]
    FrameTime(f64),
    #[error("a motion clip needs at least one frame")]
    NoFrames,
    #[error("frame {frame} has {found} values, skeleton declares {expected} channels")]
    RowLength {
        frame: usize,
        expected: usize,
        found: usize,
    },
    #[error("frame {frame} has a non-finite channel value")]
    NonFinite { frame: usize },
    #[error("frame index {index} out of range for clip with {frames} frames")]
    FrameIndex { index: usize, frames: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionClip {
    skeleton: Skeleton,
    frame_time: f64,
    values: Vec<f64>,
    frame_count: usize,
    pub activity_label: String,
}

impl MotionClip {
    pub fn new(
        skeleton: Skeleton,
        frame_time: f64,
        frames: Vec<Vec<f64>>,
        activity_label: impl Into<String>,
    ) -> Result<Self, ClipError> {
        if !(frame_time.is_finite() && frame_time > 0.0) {
            return Err(ClipError::FrameTime(frame_time));
        }
        if frames.is_empty() {
            return Err(ClipError::NoFrames);
        }
        let stride = skeleton.channel_count();
        let mut values = Vec::with_capacity(stride * frames.len());
        for (frame, row) in frames.iter().enumerate() {
            if row.len() != stride {
                return Err(ClipError::RowLength {
                    frame,
                    expected: stride,
                    found: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(ClipError::NonFinite { frame });
            }
            values.extend_from_slice(row);
        }
        Ok(Self {
            skeleton,
            frame_time,
            frame_count: frames.len(),
            values,
            activity_label: activity_label.into(),
        })
    }

    pub fn skeleton(&self) -> &Skeleton {
        &self.skeleton
    }

    pub fn frame_time(&self) -> f64 {
        self.frame_time
    }

    pub fn frame_count(&self) -> usize {
        self.frame_count
    }

    pub fn frame(&self, index: usize) -> Option<&[f64]> {
        let stride = self.skeleton.channel_count;
        (index < self.frame_count).then(|| &self.values[index * stride..(index + 1) * stride])
    }

    pub fn fps(&self) -> f64 {
        1.0 / self.frame_time
    }

    /// Keeps the first `n` frames (at least one).
    pub fn truncated(&self, n: usize) -> MotionClip {
        let n = n.clamp(1, self.frame_count);
        let stride = self.skeleton.channel_count;
        MotionClip {
            skeleton: self.skeleton.clone(),
            frame_time: self.frame_time,
            values: self.values[..n * stride].to_vec(),
            frame_count: n,
            activity_label: self.activity_label.clone(),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.activity_label = label.into();
        self
    }
}

/// World-space positions of every joint followed by every end site.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseFrame {
    pub joint_positions: Vec<Vec3>,
}

/// Duration of the clip in seconds.
pub fn clip_duration(clip: &MotionClip) -> f64 {
    clip.frame_count as f64 * clip.frame_time
}

/// Local transform of one joint for one row of channel values.
fn local_transform(joint: &Joint, values: &[f64]) -> Rigid {
    let mut translation = joint.offset;
    let mut rotation = Mat3::IDENTITY;
    for (&ch, &v) in joint.channels.iter().zip(values) {
        match ch {
            Channel::Xposition => translation.x += v,
            Channel::Yposition => translation.y += v,
            Channel::Zposition => translation.z += v,
            Channel::Xrotation => rotation = rotation * Mat3::rot_x(v),
            Channel::Yrotation => rotation = rotation * Mat3::rot_y(v),
            Channel::Zrotation => rotation = rotation * Mat3::rot_z(v),
        }
    }
    Rigid {
        rotation,
        translation,
    }
}

/// World transforms of every joint at `frame_index`.
pub fn joint_transforms(clip: &MotionClip, frame_index: usize) -> Result<Vec<Rigid>, ClipError> {
    let row = clip.frame(frame_index).ok_or(ClipError::FrameIndex {
        index: frame_index,
        frames: clip.frame_count,
    })?;
    let sk = &clip.skeleton;
    let mut world: Vec<Rigid> = Vec::with_capacity(sk.joints.len());
    for (i, joint) in sk.joints.iter().enumerate() {
        let start = sk.channel_starts[i];
        let local = local_transform(joint, &row[start..start + joint.channels.len()]);
        let w = match joint.parent {
            Some(p) => world[p].compose(&local),
            None => local,
        };
        world.push(w);
    }
    Ok(world)
}

pub fn forward_kinematics(clip: &MotionClip, frame_index: usize) -> Result<PoseFrame, ClipError> {
    let world = joint_transforms(clip, frame_index)?;
    let mut joint_positions: Vec<Vec3> = world.iter().map(|w| w.translation).collect();
    joint_positions.extend(
        clip.skeleton
            .end_sites
            .iter()
            .map(|e| world[e.parent].apply(e.offset)),
    );
    Ok(PoseFrame { joint_positions })
}

/// A parse failure with the 1-based line it was detected on.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("line {line}: {kind}")]
pub struct BvhError {
    pub line: usize,
    pub kind: BvhErrorKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BvhErrorKind {
    Lexical(String),
    Expected { expected: String, found: String },
    UnbalancedBraces,
    UnknownChannel(String),
    ChannelCount { expected: usize, found: usize },
    FrameCount { declared: usize, found: usize },
    Clip(ClipError),
    Skeleton(SkeletonError),
}

impl fmt::Display for BvhErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BvhErrorKind::Lexical(s) => write!(f, "lexical error: {s}"),
            BvhErrorKind::Expected { expected, found } => {
                write!(f, "expected {expected}, found {found}")
            }
            BvhErrorKind::UnbalancedBraces => f.write_str("unbalanced braces"),
            BvhErrorKind::UnknownChannel(c) => write!(f, "unknown channel '{c}'"),
            BvhErrorKind::ChannelCount { expected, found } => {
                write!(f, "channel count mismatch: expected {expected} values, found {found}")
            }
            BvhErrorKind::FrameCount { declared, found } => {
                write!(f, "frame count mismatch: declared {declared}, found {found} motion rows")
            }
            BvhErrorKind::Clip(e) => write!(f, "{e}"),
            BvhErrorKind::Skeleton(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    line: usize,
}

struct Tokens<'a> {
    tokens: Vec<Token<'a>>,
    pos: usize,
    last_line: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let mut tokens = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            for word in line.split_whitespace() {
                // braces glued to names ("Hips{") are split off
                let mut rest = word;
                while !rest.is_empty() {
                    match rest.find(['{', '}']) {
                        Some(0) => {
                            tokens.push(Token {
                                text: &rest[..1],
                                line: line_no,
                            });
                            rest = &rest[1..];
                        }
                        Some(k) => {
                            tokens.push(Token {
                                text: &rest[..k],
                                line: line_no,
                            });
                            rest = &rest[k..];
                        }
                        None => {
                            tokens.push(Token {
                                text: rest,
                                line: line_no,
                            });
                            rest = "";
                        }
                    }
                }
            }
        }
        let last_line = text.lines().count().max(1);
        Self {
            tokens,
            pos: 0,
            last_line,
        }
    }

    fn peek(&self) -> Option<Token<'a>> {
        self.tokens.get(self.pos).copied()
    }

    fn next(&mut self) -> Option<Token<'a>> {
        let t = self.peek();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn line(&self) -> usize {
        self.peek().map_or(self.last_line, |t| t.line)
    }

    fn err(&self, line: usize, kind: BvhErrorKind) -> BvhError {
        BvhError { line, kind }
    }

    fn expect(&mut self, word: &str) -> Result<Token<'a>, BvhError> {
        match self.next() {
            Some(t) if t.text == word => Ok(t),
            Some(t) => Err(self.err(
                t.line,
                BvhErrorKind::Expected {
                    expected: alloc::format!("'{word}'"),
                    found: alloc::format!("'{}'", t.text),
                },
            )),
            None => Err(self.err(
                self.last_line,
                BvhErrorKind::Expected {
                    expected: alloc::format!("'{word}'"),
                    found: "end of input".to_string(),
                },
            )),
        }
    }

    fn open_brace(&mut self) -> Result<(), BvhError> {
        match self.next() {
            Some(t) if t.text == "{" => Ok(()),
            Some(t) => Err(self.err(t.line, BvhErrorKind::UnbalancedBraces)),
            None => Err(self.err(self.last_line, BvhErrorKind::UnbalancedBraces)),
        }
    }

    fn name(&mut self) -> Result<&'a str, BvhError> {
        match self.next() {
            Some(t) if t.text != "{" && t.text != "}" => Ok(t.text),
            Some(t) => Err(self.err(
                t.line,
                BvhErrorKind::Expected {
                    expected: "joint name".to_string(),
                    found: alloc::format!("'{}'", t.text),
                },
            )),
            None => Err(self.err(
                self.last_line,
                BvhErrorKind::Expected {
                    expected: "joint name".to_string(),
                    found: "end of input".to_string(),
                },
            )),
        }
    }

    fn number(&mut self) -> Result<f64, BvhError> {
        let t = self.next().ok_or_else(|| {
            self.err(
                self.last_line,
                BvhErrorKind::Expected {
                    expected: "number".to_string(),
                    found: "end of input".to_string(),
                },
            )
        })?;
        parse_number(t.text).ok_or_else(|| {
            self.err(
                t.line,
                BvhErrorKind::Lexical(alloc::format!("'{}' is not a number", t.text)),
            )
        })
    }

    fn offset(&mut self) -> Result<Vec3, BvhError> {
        self.expect("OFFSET")?;
        Ok(Vec3::new(self.number()?, self.number()?, self.number()?))
    }
}

fn parse_number(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Parses BVH 1.0 text. LF and CRLF line endings are accepted.
pub fn parse_bvh(text: &str) -> Result<MotionClip, BvhError> {
    let mut toks = Tokens::new(text);
    toks.expect("HIERARCHY")?;
    let root_line = toks.line();
    toks.expect("ROOT")?;

    let mut joints: Vec<Joint> = Vec::new();
    let mut end_sites: Vec<EndSite> = Vec::new();
    parse_joint(&mut toks, None, &mut joints, &mut end_sites)?;

    match toks.peek() {
        Some(t) if t.text == "ROOT" => {
            return Err(toks.err(
                t.line,
                BvhErrorKind::Skeleton(SkeletonError::SecondRoot(joints.len())),
            ))
        }
        Some(t) if t.text == "}" => return Err(toks.err(t.line, BvhErrorKind::UnbalancedBraces)),
        _ => {}
    }
    let skeleton = Skeleton::new(joints, end_sites)
        .map_err(|e| toks.err(root_line, BvhErrorKind::Skeleton(e)))?;

    toks.expect("MOTION")?;
    let frames_line = toks.line();
    toks.expect("Frames:")?;
    let declared = toks.number()?;
    if declared < 0.0 || libm::trunc(declared) != declared {
        return Err(toks.err(
            frames_line,
            BvhErrorKind::Lexical(alloc::format!("invalid frame count {declared}")),
        ));
    }
    let declared = declared as usize;
    toks.expect("Frame")?;
    let time_line = toks.line();
    toks.expect("Time:")?;
    let frame_time = toks.number()?;
    let after_header = toks.pos;

    // Rows are line-oriented; group the remaining tokens by source line.
    let stride = skeleton.channel_count();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(declared);
    let rest = &toks.tokens[after_header..];
    let mut i = 0;
    while i < rest.len() {
        let line = rest[i].line;
        let mut row = Vec::with_capacity(stride);
        while i < rest.len() && rest[i].line == line {
            let v = parse_number(rest[i].text).ok_or_else(|| BvhError {
                line,
                kind: BvhErrorKind::Lexical(alloc::format!("'{}' is not a number", rest[i].text)),
            })?;
            row.push(v);
            i += 1;
        }
        if row.len() != stride {
            return Err(BvhError {
                line,
                kind: BvhErrorKind::ChannelCount {
                    expected: stride,
                    found: row.len(),
                },
            });
        }
        rows.push(row);
    }
    if rows.len() != declared {
        return Err(BvhError {
            line: frames_line,
            kind: BvhErrorKind::FrameCount {
                declared,
                found: rows.len(),
            },
        });
    }
    MotionClip::new(skeleton, frame_time, rows, "").map_err(|e| {
        let line = match e {
            ClipError::FrameTime(_) => time_line,
            _ => frames_line,
        };
        BvhError {
            line,
            kind: BvhErrorKind::Clip(e),
        }
    })
}

fn parse_joint(
    toks: &mut Tokens<'_>,
    parent: Option<usize>,
    joints: &mut Vec<Joint>,
    end_sites: &mut Vec<EndSite>,
) -> Result<(), BvhError> {
    let name = toks.name()?.to_string();
    toks.open_brace()?;
    let offset = toks.offset()?;
    let mut channels = Vec::new();
    if toks.peek().is_some_and(|t| t.text == "CHANNELS") {
        toks.next();
        let n_line = toks.line();
        let n = toks.number()?;
        if n < 0.0 || libm::trunc(n) != n || n > 6.0 {
            return Err(toks.err(
                n_line,
                BvhErrorKind::Lexical(alloc::format!("invalid channel count {n}")),
            ));
        }
        for _ in 0..n as usize {
            let t = toks.next().ok_or_else(|| {
                toks.err(
                    toks.last_line,
                    BvhErrorKind::Expected {
                        expected: "channel name".to_string(),
                        found: "end of input".to_string(),
                    },
                )
            })?;
            let ch = Channel::parse(t.text)
                .ok_or_else(|| toks.err(t.line, BvhErrorKind::UnknownChannel(t.text.to_string())))?;
            channels.push(ch);
        }
    }
    let index = joints.len();
    joints.push(Joint {
        name,
        parent,
        offset,
        channels,
    });
    loop {
        let t = toks
            .next()
            .ok_or_else(|| toks.err(toks.last_line, BvhErrorKind::UnbalancedBraces))?;
        match t.text {
            "}" => return Ok(()),
            "JOINT" => parse_joint(toks, Some(index), joints, end_sites)?,
            "End" => {
                toks.expect("Site")?;
                toks.open_brace()?;
                let offset = toks.offset()?;
                match toks.next() {
                    Some(c) if c.text == "}" => {}
                    Some(c) => return Err(toks.err(c.line, BvhErrorKind::UnbalancedBraces)),
                    None => return Err(toks.err(toks.last_line, BvhErrorKind::UnbalancedBraces)),
                }
                end_sites.push(EndSite {
                    parent: index,
                    offset,
                });
            }
            "MOTION" => return Err(toks.err(t.line, BvhErrorKind::UnbalancedBraces)),
            other => {
                return Err(toks.err(
                    t.line,
                    BvhErrorKind::Expected {
                        expected: "'JOINT', 'End Site' or '}'".to_string(),
                        found: alloc::format!("'{other}'"),
                    },
                ))
            }
        }
    }
}
