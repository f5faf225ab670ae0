//! Deterministic synthetic rendering of a motion clip under nuisance factors.
//!
//! The figure is drawn as a stick figure (capsules along bones plus joint
//! dots) or as a point-light display (joint dots only), projected through a
//! pinhole camera placed by azimuth, elevation and distance around the
//! subject. Pixels are sampled at their centers without anti-aliasing, so the
//! output bytes depend only on the [`SceneSpec`].
//!
//! BVH data is Y-up; the scene is Z-up. Points are mapped with
//! `(x, y, z) -> (x, -z, y)`, so azimuth 0 looks at the subject from the
//! BVH +X axis.

use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, Uniform};

use crate::bvh::{forward_kinematics, MotionClip};
use crate::geom::{sin_cos_deg, Vec3};
use crate::seed;
use crate::types::{Factor, FactorVector, Frame, Mask, MaskSequence, TypeError, Video};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RenderError {
    #[error("elevation of exactly +/-90 degrees leaves the camera up vector undefined")]
    DegenerateUp,
    #[error("subject is entirely behind the camera in frames {0:?}")]
    BehindCamera(Vec<usize>),
    #[error("unknown background '{0}'")]
    UnknownBackground(String),
    #[error("unknown appearance '{0}'")]
    UnknownAppearance(String),
    #[error("focal length must be positive, got {0}")]
    FocalLength(f64),
    #[error("image must be at least 32x32, got {0}x{1}")]
    ImageSize(u32, u32),
    #[error("sweep count must be at least 1")]
    SweepCount,
    #[error("sweep step must be non-zero and finite")]
    SweepDelta,
    #[error("nuisance pool '{0}' is empty")]
    EmptyPool(&'static str),
    #[error("clip has zero height; cannot derive a focal length")]
    FlatClip,
    #[error(transparent)]
    Factors(#[from] TypeError),
}

/// Where the camera sits and what it looks at. Roll is always zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub position: Vec3,
    pub look_at: Vec3,
    pub up: Vec3,
}

/// `position = target + distance * (cos el cos az, cos el sin az, sin el)`, +Z up.
pub fn camera_from_factors(factors: &FactorVector, target: Vec3) -> Result<CameraPose, RenderError> {
    if !(factors.distance.is_finite() && factors.distance > 0.0) {
        return Err(TypeError::Distance(factors.distance).into());
    }
    if libm::fabs(factors.elevation_deg) == 90.0 {
        return Err(RenderError::DegenerateUp);
    }
    let (saz, caz) = sin_cos_deg(factors.azimuth_deg);
    let (sel, cel) = sin_cos_deg(factors.elevation_deg);
    let dir = Vec3::new(cel * caz, cel * saz, sel);
    Ok(CameraPose {
        position: target + dir.scale(factors.distance),
        look_at: target,
        up: Vec3::new(0.0, 0.0, 1.0),
    })
}

/// A pinhole camera with its principal point at the image center.
#[derive(Debug, Clone, Copy)]
struct Camera {
    position: Vec3,
    right: Vec3,
    up: Vec3,
    forward: Vec3,
    focal: f64,
    cx: f64,
    cy: f64,
}

impl Camera {
    fn new(pose: &CameraPose, focal: f64, width: u32, height: u32) -> Result<Self, RenderError> {
        let forward = (pose.look_at - pose.position)
            .normalized()
            .ok_or(RenderError::DegenerateUp)?;
        let right = forward
            .cross(pose.up)
            .normalized()
            .ok_or(RenderError::DegenerateUp)?;
        let up = right.cross(forward);
        Ok(Self {
            position: pose.position,
            right,
            up,
            forward,
            focal,
            cx: f64::from(width) / 2.0,
            cy: f64::from(height) / 2.0,
        })
    }

    /// `(u, v, depth)`; depth <= 0 means behind the camera.
    fn project(&self, p: Vec3) -> (f64, f64, f64) {
        let d = p - self.position;
        let z = d.dot(self.forward);
        let x = d.dot(self.right);
        let y = d.dot(self.up);
        (self.cx + self.focal * x / z, self.cy - self.focal * y / z, z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderStyle {
    StickFigure,
    PointLight,
}

impl RenderStyle {
    pub fn name(self) -> &'static str {
        match self {
            RenderStyle::StickFigure => "stick-figure",
            RenderStyle::PointLight => "point-light",
        }
    }

    pub fn parse(s: &str) -> Option<RenderStyle> {
        match s {
            "stick-figure" | "stick" => Some(RenderStyle::StickFigure),
            "point-light" => Some(RenderStyle::PointLight),
            _ => None,
        }
    }
}

/// Colors and limb thickness of one rendered "actor".
///
/// `limb_radius` is a fraction of the clip's standing height, so a profile
/// looks the same for skeletons authored in different units.
#[derive(Debug, Clone, PartialEq)]
pub struct AppearanceProfile {
    pub appearance_id: String,
    pub limb_color: [u8; 3],
    pub limb_radius: f64,
    pub joint_color: [u8; 3],
}

const BUILTIN_APPEARANCES: [(&str, [u8; 3], f64, [u8; 3]); 8] = [
    ("crimson", [200, 30, 40], 0.030, [250, 220, 60]),
    ("navy", [30, 40, 150], 0.030, [240, 240, 240]),
    ("forest", [20, 110, 40], 0.035, [230, 120, 30]),
    ("charcoal", [50, 50, 55], 0.040, [200, 200, 210]),
    ("amber", [230, 150, 20], 0.028, [90, 40, 10]),
    ("violet", [130, 50, 170], 0.032, [120, 230, 200]),
    ("teal", [20, 150, 150], 0.045, [250, 250, 120]),
    ("white", [245, 245, 245], 0.025, [255, 60, 60]),
];

impl AppearanceProfile {
    /// The eight built-in appearance ids, in catalog order.
    pub fn builtin_ids() -> Vec<&'static str> {
        BUILTIN_APPEARANCES.iter().map(|a| a.0).collect()
    }

    pub fn builtin(id: &str) -> Result<AppearanceProfile, RenderError> {
        BUILTIN_APPEARANCES
            .iter()
            .find(|a| a.0 == id)
            .map(|&(id, limb_color, limb_radius, joint_color)| AppearanceProfile {
                appearance_id: id.to_string(),
                limb_color,
                limb_radius,
                joint_color,
            })
            .ok_or_else(|| RenderError::UnknownAppearance(id.to_string()))
    }
}

/// Procedural backgrounds selected by `background_id`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Background {
    Flat([u8; 3]),
    Checker { cell: u32, a: [u8; 3], b: [u8; 3] },
    Gradient { top: [u8; 3], bottom: [u8; 3] },
    Noise,
}

const BACKGROUNDS: [(&str, Background); 9] = [
    ("gray", Background::Flat([128, 128, 128])),
    ("sky", Background::Flat([135, 185, 235])),
    ("grass", Background::Flat([70, 140, 60])),
    ("sand", Background::Flat([210, 190, 140])),
    ("night", Background::Flat([20, 24, 48])),
    (
        "checker",
        Background::Checker {
            cell: 8,
            a: [90, 90, 90],
            b: [170, 170, 170],
        },
    ),
    (
        "checker-fine",
        Background::Checker {
            cell: 3,
            a: [60, 100, 60],
            b: [150, 190, 150],
        },
    ),
    (
        "gradient",
        Background::Gradient {
            top: [120, 170, 230],
            bottom: [110, 90, 60],
        },
    ),
    ("noise", Background::Noise),
];

pub fn background_ids() -> Vec<&'static str> {
    BACKGROUNDS.iter().map(|b| b.0).collect()
}

fn lookup_background(id: &str) -> Result<Background, RenderError> {
    BACKGROUNDS
        .iter()
        .find(|b| b.0 == id)
        .map(|b| b.1)
        .ok_or_else(|| RenderError::UnknownBackground(id.to_string()))
}

fn lerp_u8(a: u8, b: u8, num: u64, den: u64) -> u8 {
    let (a, b) = (u64::from(a), u64::from(b));
    // exact integer interpolation, rounded half up
    let v = (2 * (a * (den - num) + b * num) + den) / (2 * den);
    v as u8
}

fn lit(c: [u8; 3], light: f64) -> [u8; 3] {
    c.map(|v| {
        let x = libm::round(f64::from(v) * light);
        x.clamp(0.0, 255.0) as u8
    })
}

fn background_raster(
    bg: Background,
    width: u32,
    height: u32,
    light: f64,
    noise_seed: u64,
) -> Vec<u8> {
    let n = width as usize * height as usize;
    let mut px = Vec::with_capacity(n * 3);
    match bg {
        Background::Noise => {
            let mut rng = seed::rng(noise_seed);
            let dist = Uniform::new_inclusive(0u8, 255u8).expect("valid range");
            for _ in 0..n * 3 {
                let v = dist.sample(&mut rng);
                px.push(lit([v, 0, 0], light)[0]);
            }
        }
        _ => {
            for y in 0..height {
                for x in 0..width {
                    let c = match bg {
                        Background::Flat(c) => c,
                        Background::Checker { cell, a, b } => {
                            if ((x / cell) + (y / cell)) % 2 == 0 {
                                a
                            } else {
                                b
                            }
                        }
                        Background::Gradient { top, bottom } => {
                            let den = u64::from(height.max(2) - 1);
                            let num = u64::from(y);
                            [0, 1, 2].map(|k| lerp_u8(top[k], bottom[k], num, den))
                        }
                        Background::Noise => unreachable!(),
                    };
                    px.extend_from_slice(&lit(c, light));
                }
            }
        }
    }
    px
}

/// Everything [`render`] needs to produce one video.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub clip: Arc<MotionClip>,
    pub factors: FactorVector,
    pub image_size: (u32, u32),
    pub focal_length: f64,
    pub seed: u64,
    pub style: RenderStyle,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), RenderError> {
        if !(self.focal_length.is_finite() && self.focal_length > 0.0) {
            return Err(RenderError::FocalLength(self.focal_length));
        }
        let (w, h) = self.image_size;
        if w < 32 || h < 32 {
            return Err(RenderError::ImageSize(w, h));
        }
        lookup_background(&self.factors.background_id)?;
        AppearanceProfile::builtin(&self.factors.appearance_id)?;
        Ok(())
    }
}

/// Focal length (pixels) at which the clip's first-frame standing height
/// spans `fraction` of the image height when viewed from `distance`.
pub fn focal_for_height_fraction(
    clip: &MotionClip,
    image_height: u32,
    distance: f64,
    fraction: f64,
) -> Result<f64, RenderError> {
    let h = figure_height(clip);
    if !(h > 0.0) {
        return Err(RenderError::FlatClip);
    }
    Ok(fraction * f64::from(image_height) * distance / h)
}

fn to_scene(p: Vec3) -> Vec3 {
    Vec3::new(p.x, -p.z, p.y)
}

fn figure_height(clip: &MotionClip) -> f64 {
    let pts = scene_points_frame(clip, 0);
    let (lo, hi) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        (lo.min(p.z), hi.max(p.z))
    });
    hi - lo
}

fn scene_points_frame(clip: &MotionClip, frame: usize) -> Vec<Vec3> {
    forward_kinematics(clip, frame)
        .expect("frame index within clip")
        .joint_positions
        .into_iter()
        .map(to_scene)
        .collect()
}

/// Scene-space (Z-up) FK positions for every frame: the identity factor as
/// the rasterizer sees it. Depends on the clip only.
pub fn scene_points(clip: &MotionClip) -> Vec<Vec<Vec3>> {
    (0..clip.frame_count())
        .map(|f| scene_points_frame(clip, f))
        .collect()
}

/// Center of the axis-aligned box around every point of every frame.
pub fn subject_center(points: &[Vec<Vec3>]) -> Vec3 {
    let mut lo = Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut hi = Vec3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points.iter().flatten() {
        lo = Vec3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z));
        hi = Vec3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z));
    }
    (lo + hi).scale(0.5)
}

struct Canvas<'a> {
    width: u32,
    height: u32,
    rgb: &'a mut [u8],
    mask: &'a mut [u8],
}

impl Canvas<'_> {
    fn span(lo: f64, hi: f64, limit: u32) -> Option<(u32, u32)> {
        let a = libm::floor(lo - 0.5).max(0.0);
        let b = libm::ceil(hi - 0.5).min(f64::from(limit) - 1.0);
        (a <= b).then(|| (a as u32, b as u32))
    }

    fn paint(&mut self, x: u32, y: u32, color: [u8; 3]) {
        let i = y as usize * self.width as usize + x as usize;
        self.rgb[i * 3..i * 3 + 3].copy_from_slice(&color);
        self.mask[i] = 1;
    }

    /// Every pixel whose center lies within `r` of the segment `a`-`b`.
    fn capsule(&mut self, a: (f64, f64), b: (f64, f64), r: f64, color: [u8; 3]) {
        let Some((x0, x1)) = Self::span(a.0.min(b.0) - r, a.0.max(b.0) + r, self.width) else {
            return;
        };
        let Some((y0, y1)) = Self::span(a.1.min(b.1) - r, a.1.max(b.1) + r, self.height) else {
            return;
        };
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let len2 = dx * dx + dy * dy;
        let r2 = r * r;
        for y in y0..=y1 {
            for x in x0..=x1 {
                let (px, py) = (f64::from(x) + 0.5, f64::from(y) + 0.5);
                let t = if len2 > 0.0 {
                    (((px - a.0) * dx + (py - a.1) * dy) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let (qx, qy) = (a.0 + t * dx - px, a.1 + t * dy - py);
                if qx * qx + qy * qy <= r2 {
                    self.paint(x, y, color);
                }
            }
        }
    }
}

const MIN_RADIUS_PX: f64 = 0.75;

#[derive(Clone, Copy)]
enum Item {
    Bone(usize, usize),
    Dot(usize),
}

fn render_frame(
    points: &[Vec3],
    bones: &[(usize, usize)],
    camera: &Camera,
    profile: &AppearanceProfile,
    radius_world: f64,
    style: RenderStyle,
    light: f64,
    canvas: &mut Canvas<'_>,
) -> bool {
    let projected: Vec<(f64, f64, f64)> = points.iter().map(|&p| camera.project(p)).collect();
    let near = 1e-9;
    if projected.iter().all(|p| p.2 <= near) {
        return false;
    }
    let mut items: Vec<(f64, Item)> = Vec::new();
    if style == RenderStyle::StickFigure {
        for &(a, b) in bones {
            if projected[a].2 > near && projected[b].2 > near {
                items.push(((projected[a].2 + projected[b].2) / 2.0, Item::Bone(a, b)));
            }
        }
    }
    for (i, p) in projected.iter().enumerate() {
        if p.2 > near {
            items.push((p.2, Item::Dot(i)));
        }
    }
    // far to near; sort is stable so equal depths keep declaration order
    items.sort_by(|a, b| b.0.total_cmp(&a.0));

    let limb = lit(profile.limb_color, light);
    let joint = lit(profile.joint_color, light);
    let px_radius = |depth: f64, scale: f64| (scale * radius_world * camera.focal / depth).max(MIN_RADIUS_PX);
    for (depth, item) in items {
        match item {
            Item::Bone(a, b) => {
                let (pa, pb) = (projected[a], projected[b]);
                canvas.capsule((pa.0, pa.1), (pb.0, pb.1), px_radius(depth, 1.0), limb);
            }
            Item::Dot(i) => {
                let p = projected[i];
                let scale = match style {
                    RenderStyle::StickFigure => 1.3,
                    RenderStyle::PointLight => 1.6,
                };
                canvas.capsule((p.0, p.1), (p.0, p.1), px_radius(depth, scale), joint);
            }
        }
    }
    true
}

/// Renders the pure background for `spec` (no figure).
pub fn render_background(spec: &SceneSpec) -> Result<Frame, RenderError> {
    spec.validate()?;
    let bg = lookup_background(&spec.factors.background_id)?;
    let (w, h) = spec.image_size;
    let px = background_raster(
        bg,
        w,
        h,
        spec.factors.light_intensity,
        seed::derive(spec.seed, "background", &spec.factors.background_id),
    );
    Ok(Frame::new(w, h, px)?)
}

/// Renders one frame per clip frame plus the exact figure masks.
///
/// Every mask pixel is 1 exactly where the RGB output differs from
/// [`render_background`]: figure pixels that would coincide with the
/// background color are nudged by one level in the blue channel.
pub fn render(spec: &SceneSpec) -> Result<(Video, MaskSequence), RenderError> {
    spec.validate()?;
    let (w, h) = spec.image_size;
    let points = scene_points(&spec.clip);
    let target = subject_center(&points);
    let pose = camera_from_factors(&spec.factors, target)?;
    let camera = Camera::new(&pose, spec.focal_length, w, h)?;
    let profile = AppearanceProfile::builtin(&spec.factors.appearance_id)?;
    let radius_world = profile.limb_radius * figure_height(&spec.clip);
    let bones = spec.clip.skeleton().bones();
    let background = render_background(spec)?;
    let bg = background.pixels();

    let mut frames = Vec::with_capacity(points.len());
    let mut masks = Vec::with_capacity(points.len());
    let mut behind = Vec::new();
    for (index, pts) in points.iter().enumerate() {
        let mut rgb = bg.to_vec();
        let mut mask = vec![0u8; w as usize * h as usize];
        let mut canvas = Canvas {
            width: w,
            height: h,
            rgb: &mut rgb,
            mask: &mut mask,
        };
        if !render_frame(
            pts,
            &bones,
            &camera,
            &profile,
            radius_world,
            spec.style,
            spec.factors.light_intensity,
            &mut canvas,
        ) {
            behind.push(index);
            continue;
        }
        for (i, &m) in mask.iter().enumerate() {
            if m == 1 && rgb[i * 3..i * 3 + 3] == bg[i * 3..i * 3 + 3] {
                let b = &mut rgb[i * 3 + 2];
                *b = if *b < 255 { *b + 1 } else { *b - 1 };
            }
        }
        frames.push(Frame::new(w, h, rgb)?);
        masks.push(Mask::new(w, h, mask)?);
    }
    if !behind.is_empty() {
        return Err(RenderError::BehindCamera(behind));
    }
    let video = Video::new("render", 0, spec.clip.fps(), frames)?;
    Ok((video, MaskSequence::new(masks)))
}

/// One controlled split: `count` scenes where `factor` takes the values
/// `x1, x1 + delta, x1 + 2 delta, ...` and everything else comes from `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSweep {
    pub factor: Factor,
    pub x1: f64,
    pub delta: f64,
    pub count: usize,
    pub base: SceneSpec,
}

impl FactorSweep {
    pub fn values(&self) -> Vec<f64> {
        (0..self.count)
            .map(|i| self.x1 + i as f64 * self.delta)
            .collect()
    }
}

pub fn enumerate_sweep(sweep: &FactorSweep) -> Result<Vec<SceneSpec>, RenderError> {
    if sweep.count == 0 {
        return Err(RenderError::SweepCount);
    }
    if !(sweep.delta.is_finite() && sweep.delta != 0.0) {
        return Err(RenderError::SweepDelta);
    }
    sweep
        .values()
        .into_iter()
        .map(|x| {
            let factors = sweep.base.factors.with_factor(sweep.factor, x)?;
            Ok(SceneSpec {
                factors,
                ..sweep.base.clone()
            })
        })
        .collect()
}

/// Pools the randomized nuisance factors are drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct NuisancePools {
    pub backgrounds: Vec<String>,
    pub light_intensities: Vec<f64>,
    pub appearances: Vec<String>,
}

impl NuisancePools {
    pub fn builtin() -> Self {
        Self {
            backgrounds: background_ids().into_iter().map(String::from).collect(),
            light_intensities: vec![0.6, 0.8, 1.0, 1.2],
            appearances: AppearanceProfile::builtin_ids()
                .into_iter()
                .map(String::from)
                .collect(),
        }
    }
}

fn pick<'a, T>(pool: &'a [T], name: &'static str, rng: &mut rand_chacha::ChaCha8Rng) -> Result<&'a T, RenderError> {
    if pool.is_empty() {
        return Err(RenderError::EmptyPool(name));
    }
    let dist = Uniform::new(0, pool.len()).expect("non-empty pool");
    Ok(&pool[dist.sample(rng)])
}

/// Resamples background, light intensity and appearance; the clip is untouched.
pub fn randomize_nuisance(
    spec: &SceneSpec,
    pools: &NuisancePools,
    seed: u64,
) -> Result<SceneSpec, RenderError> {
    let mut rng = seed::rng(seed);
    let background = pick(&pools.backgrounds, "backgrounds", &mut rng)?.clone();
    let light = *pick(&pools.light_intensities, "light_intensities", &mut rng)?;
    let appearance = pick(&pools.appearances, "appearances", &mut rng)?.clone();
    let f = &spec.factors;
    let factors = FactorVector::new(
        f.azimuth_deg,
        f.elevation_deg,
        f.distance,
        appearance,
        background,
        light,
    )?;
    Ok(SceneSpec {
        factors,
        ..spec.clone()
    })
}
