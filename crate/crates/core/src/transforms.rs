//! Image-space transforms, applied frame by frame and uniformly over a video.
//!
//! Every transform returns a new video with the same frame count, frame size,
//! fps, id and label. All arithmetic on 8-bit values rounds half up.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;

use rand_distr::{Distribution, Normal};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::seed;
use crate::types::{Frame, TypeError, Video};

pub const DEFAULT_BLUR_KERNEL: usize = 5;
pub const DEFAULT_NOISE_SIGMA: f64 = 20.0;
pub const DEFAULT_ROTATION_DEG: f64 = 25.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TransformError {
    #[error("unknown transform kind '{0}'")]
    UnknownKind(String),
    #[error("blur kernel must be odd and >= 1, got {0}")]
    Kernel(usize),
    #[error("noise sigma must be finite and >= 0, got {0}")]
    Sigma(f64),
    #[error("rotation angle must be finite, got {0}")]
    Angle(f64),
    #[error(transparent)]
    Type(#[from] TypeError),
}

/// One image-space transform and its parameters.
///
/// Serialized as `{"kind": "...", "params": {...}}`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(tag = "kind", content = "params", rename_all = "snake_case", deny_unknown_fields)
)]
pub enum ImageTransformSpec {
    Identity {},
    AverageBlur {
        kernel: usize,
    },
    HistEqualization {},
    Grayscale {},
    GaussianNoise {
        sigma: f64,
        /// Global seed; each video draws from `(seed, video_id)`.
        #[cfg_attr(feature = "serde", serde(default))]
        seed: u64,
    },
    RotateCw {
        angle_deg: f64,
    },
}

impl ImageTransformSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ImageTransformSpec::Identity {} => "identity",
            ImageTransformSpec::AverageBlur { .. } => "average_blur",
            ImageTransformSpec::HistEqualization {} => "hist_equalization",
            ImageTransformSpec::Grayscale {} => "grayscale",
            ImageTransformSpec::GaussianNoise { .. } => "gaussian_noise",
            ImageTransformSpec::RotateCw { .. } => "rotate_cw",
        }
    }

    pub fn validate(&self) -> Result<(), TransformError> {
        match *self {
            ImageTransformSpec::AverageBlur { kernel } if kernel == 0 || kernel % 2 == 0 => {
                Err(TransformError::Kernel(kernel))
            }
            ImageTransformSpec::GaussianNoise { sigma, .. } if !(sigma.is_finite() && sigma >= 0.0) => {
                Err(TransformError::Sigma(sigma))
            }
            ImageTransformSpec::RotateCw { angle_deg } if !angle_deg.is_finite() => {
                Err(TransformError::Angle(angle_deg))
            }
            _ => Ok(()),
        }
    }

    /// Replaces the noise seed (other kinds are returned unchanged).
    pub fn with_seed(self, seed: u64) -> Self {
        match self {
            ImageTransformSpec::GaussianNoise { sigma, .. } => {
                ImageTransformSpec::GaussianNoise { sigma, seed }
            }
            other => other,
        }
    }
}

impl FromStr for ImageTransformSpec {
    type Err = TransformError;

    /// A kind name with default parameters.
    fn from_str(kind: &str) -> Result<Self, Self::Err> {
        Ok(match kind {
            "identity" => ImageTransformSpec::Identity {},
            "average_blur" => ImageTransformSpec::AverageBlur {
                kernel: DEFAULT_BLUR_KERNEL,
            },
            "hist_equalization" => ImageTransformSpec::HistEqualization {},
            "grayscale" => ImageTransformSpec::Grayscale {},
            "gaussian_noise" => ImageTransformSpec::GaussianNoise {
                sigma: DEFAULT_NOISE_SIGMA,
                seed: 0,
            },
            "rotate_cw" => ImageTransformSpec::RotateCw {
                angle_deg: DEFAULT_ROTATION_DEG,
            },
            other => return Err(TransformError::UnknownKind(other.to_string())),
        })
    }
}

/// The six evaluated transforms, in table order.
pub fn default_suite() -> Vec<ImageTransformSpec> {
    vec![
        ImageTransformSpec::Identity {},
        ImageTransformSpec::AverageBlur {
            kernel: DEFAULT_BLUR_KERNEL,
        },
        ImageTransformSpec::HistEqualization {},
        ImageTransformSpec::Grayscale {},
        ImageTransformSpec::GaussianNoise {
            sigma: DEFAULT_NOISE_SIGMA,
            seed: 0,
        },
        ImageTransformSpec::RotateCw {
            angle_deg: DEFAULT_ROTATION_DEG,
        },
    ]
}

pub fn apply_transform(video: &Video, spec: &ImageTransformSpec) -> Result<Video, TransformError> {
    spec.validate()?;
    let frames = video.frames();
    let out: Vec<Frame> = match *spec {
        ImageTransformSpec::Identity {} => frames.to_vec(),
        ImageTransformSpec::AverageBlur { kernel } => {
            frames.iter().map(|f| average_blur(f, kernel)).collect()
        }
        ImageTransformSpec::HistEqualization {} => frames.iter().map(hist_equalization).collect(),
        ImageTransformSpec::Grayscale {} => frames.iter().map(grayscale).collect(),
        ImageTransformSpec::GaussianNoise { sigma, seed } => {
            let video_seed = seed::derive(seed, "gaussian_noise", video.video_id());
            frames
                .iter()
                .enumerate()
                .map(|(i, f)| gaussian_noise(f, sigma, seed::derive_index(video_seed, i as u64)))
                .collect()
        }
        ImageTransformSpec::RotateCw { angle_deg } => {
            frames.iter().map(|f| rotate_cw(f, angle_deg)).collect()
        }
    };
    Ok(video.with_frames(out)?)
}

fn rebuild(f: &Frame, px: Vec<u8>) -> Frame {
    Frame::new(f.width(), f.height(), px).expect("transform keeps frame size")
}

/// `k x k` box mean with edge clamping.
pub fn average_blur(f: &Frame, k: usize) -> Frame {
    if k == 1 {
        return f.clone();
    }
    let (w, h) = (f.width() as usize, f.height() as usize);
    let r = (k / 2) as isize;
    let src = f.pixels();
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    // horizontal pass keeps exact integer sums
    let mut rows = vec![0u32; w * h * 3];
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                let mut s = 0u32;
                for dx in -r..=r {
                    let xx = clamp(x as isize + dx, w);
                    s += u32::from(src[(y * w + xx) * 3 + c]);
                }
                rows[(y * w + x) * 3 + c] = s;
            }
        }
    }
    let n = (k * k) as u32;
    let mut out = vec![0u8; w * h * 3];
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                let mut s = 0u32;
                for dy in -r..=r {
                    let yy = clamp(y as isize + dy, h);
                    s += rows[(yy * w + x) * 3 + c];
                }
                out[(y * w + x) * 3 + c] = ((s + n / 2) / n) as u8;
            }
        }
    }
    rebuild(f, out)
}

/// Per-channel equalization: `round(255 (cdf(v) - cdf_min) / (1 - cdf_min))`.
/// A constant channel is left unchanged.
pub fn hist_equalization(f: &Frame) -> Frame {
    let src = f.pixels();
    let n = (src.len() / 3) as u64;
    let mut out = src.to_vec();
    for c in 0..3 {
        let mut hist = [0u64; 256];
        for px in src.chunks_exact(3) {
            hist[px[c] as usize] += 1;
        }
        let mut cdf = [0u64; 256];
        let mut acc = 0;
        for (v, &count) in hist.iter().enumerate() {
            acc += count;
            cdf[v] = acc;
        }
        let cdf_min = hist
            .iter()
            .position(|&h| h > 0)
            .map(|v| cdf[v])
            .unwrap_or(0);
        let den = n - cdf_min;
        if den == 0 {
            continue;
        }
        let mut lut = [0u8; 256];
        for v in 0..256 {
            let num = 255 * cdf[v].saturating_sub(cdf_min);
            lut[v] = ((2 * num + den) / (2 * den)) as u8;
        }
        for (i, px) in src.chunks_exact(3).enumerate() {
            out[i * 3 + c] = lut[px[c] as usize];
        }
    }
    rebuild(f, out)
}

/// `Y = 0.299 R + 0.587 G + 0.114 B`, replicated to three channels.
pub fn grayscale(f: &Frame) -> Frame {
    let mut out = Vec::with_capacity(f.pixels().len());
    for px in f.pixels().chunks_exact(3) {
        let y = (299 * u32::from(px[0]) + 587 * u32::from(px[1]) + 114 * u32::from(px[2]) + 500) / 1000;
        let y = y as u8;
        out.extend_from_slice(&[y, y, y]);
    }
    rebuild(f, out)
}

/// Adds `round(n)`, `n ~ Normal(0, sigma)`, independently to every channel value.
pub fn gaussian_noise(f: &Frame, sigma: f64, seed: u64) -> Frame {
    if sigma == 0.0 {
        return f.clone();
    }
    let normal = Normal::new(0.0, sigma).expect("sigma validated");
    let mut rng = seed::rng(seed);
    let out = f
        .pixels()
        .iter()
        .map(|&v| {
            let n = libm::round(normal.sample(&mut rng));
            (f64::from(v) + n).clamp(0.0, 255.0) as u8
        })
        .collect();
    rebuild(f, out)
}

/// Clockwise rotation about the frame center with bilinear sampling; samples
/// falling outside the source are black.
pub fn rotate_cw(f: &Frame, angle_deg: f64) -> Frame {
    let (w, h) = (f.width() as usize, f.height() as usize);
    let (s, c) = crate::geom::sin_cos_deg(angle_deg);
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let (max_x, max_y) = (w as f64 - 1.0, h as f64 - 1.0);
    let src = f.pixels();
    let mut out = vec![0u8; w * h * 3];
    for y in 0..h {
        for x in 0..w {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            // inverse map: rotate the destination offset counter-clockwise (y down)
            let sx = cx + dx * c + dy * s;
            let sy = cy - dx * s + dy * c;
            if !(sx >= 0.0 && sy >= 0.0 && sx <= max_x && sy <= max_y) {
                continue;
            }
            let x0 = libm::floor(sx) as usize;
            let y0 = libm::floor(sy) as usize;
            let x1 = (x0 + 1).min(w - 1);
            let y1 = (y0 + 1).min(h - 1);
            let fx = sx - x0 as f64;
            let fy = sy - y0 as f64;
            for ch in 0..3 {
                let p = |xx: usize, yy: usize| f64::from(src[(yy * w + xx) * 3 + ch]);
                let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
                let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                out[(y * w + x) * 3 + ch] = libm::floor(v + 0.5).clamp(0.0, 255.0) as u8;
            }
        }
    }
    rebuild(f, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(w: u32, h: u32, px: Vec<u8>) -> Frame {
        Frame::new(w, h, px).unwrap()
    }

    fn video(frames: Vec<Frame>) -> Video {
        Video::new("v", 0, 25.0, frames).unwrap()
    }

    fn ramp(w: u32, h: u32) -> Frame {
        let px = (0..w * h * 3).map(|i| (i * 7 % 251) as u8).collect();
        frame(w, h, px)
    }

    #[test]
    fn grayscale_of_pure_red() {
        let g = grayscale(&Frame::filled(1, 1, [255, 0, 0]).unwrap());
        assert_eq!(g.pixels(), &[76, 76, 76]);
    }

    #[test]
    fn hist_equalization_two_levels() {
        let mut px = Vec::new();
        for i in 0..16 {
            let v = if i < 8 { 10 } else { 200 };
            px.extend_from_slice(&[v, v, v]);
        }
        let out = hist_equalization(&frame(4, 4, px));
        for (i, p) in out.pixels().chunks(3).enumerate() {
            let want = if i < 8 { 0 } else { 255 };
            assert_eq!(p, &[want; 3]);
        }
    }

    #[test]
    fn hist_equalization_constant_channel_unchanged() {
        let f = Frame::filled(3, 3, [42, 0, 255]).unwrap();
        assert_eq!(hist_equalization(&f), f);
    }

    #[test]
    fn even_kernel_is_rejected() {
        let v = video(vec![ramp(4, 4)]);
        let err = apply_transform(&v, &ImageTransformSpec::AverageBlur { kernel: 4 });
        assert_eq!(err.unwrap_err(), TransformError::Kernel(4));
        let err = apply_transform(&v, &ImageTransformSpec::GaussianNoise { sigma: -1.0, seed: 0 });
        assert!(matches!(err, Err(TransformError::Sigma(_))));
    }

    #[test]
    fn unknown_kind() {
        assert_eq!(
            "sharpen".parse::<ImageTransformSpec>().unwrap_err(),
            TransformError::UnknownKind("sharpen".into())
        );
    }

    #[test]
    fn zero_angle_and_zero_sigma_are_identity() {
        let v = video(vec![ramp(7, 5), ramp(7, 5)]);
        let r = apply_transform(&v, &ImageTransformSpec::RotateCw { angle_deg: 0.0 }).unwrap();
        assert_eq!(r, v);
        let n = apply_transform(&v, &ImageTransformSpec::GaussianNoise { sigma: 0.0, seed: 9 }).unwrap();
        assert_eq!(n, v);
        let i = apply_transform(&v, &ImageTransformSpec::Identity {}).unwrap();
        assert_eq!(i, v);
    }

    #[test]
    fn quarter_turn_moves_right_edge_to_bottom() {
        // 3x3, single white pixel at the middle of the right edge
        let mut px = vec![0u8; 27];
        px[(3 + 2) * 3..(3 + 2) * 3 + 3].copy_from_slice(&[255; 3]);
        let out = rotate_cw(&frame(3, 3, px), 90.0);
        assert_eq!(out.pixel(1, 2), [255; 3]);
        assert_eq!(out.pixel(2, 1), [0; 3]);
    }

    #[test]
    fn blur_kernel_one_is_identity() {
        let f = ramp(5, 4);
        assert_eq!(average_blur(&f, 1), f);
    }

    #[test]
    fn default_suite_order() {
        let kinds: Vec<_> = default_suite().iter().map(|s| s.kind()).collect();
        assert_eq!(
            kinds,
            ["identity", "average_blur", "hist_equalization", "grayscale", "gaussian_noise", "rotate_cw"]
        );
        assert_eq!(
            default_suite()[5],
            ImageTransformSpec::RotateCw { angle_deg: 25.0 }
        );
    }
}
