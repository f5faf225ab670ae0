//! Deterministic stand-in models used to exercise the pipeline without a
//! real classifier.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;

use rand_distr::{Distribution, Uniform};

use crate::seed;
use crate::types::{FactorVector, FeatureTensor, LabelSpace, ScoreVector, Video};

/// Side of the square grid frames are pooled down to.
pub const POOL_GRID: usize = 8;
pub const POOLED_DIM: usize = POOL_GRID * POOL_GRID * 3;

pub const FEATURE_TAGS: [&str; 2] = ["pooled", "consensus"];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MockError {
    #[error("unknown mock mode '{0}', expected uniform, centroid or azimuth_oracle")]
    UnknownMode(String),
    #[error("azimuth_oracle needs the video's factors (video '{0}')")]
    MissingFactors(String),
    #[error("unknown feature tag '{0}'")]
    UnknownFeature(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MockMode {
    /// Every class scores `1/N`.
    Uniform,
    /// Softmax of negative distances from the pooled mean frame to seeded
    /// per-class prototypes.
    Centroid,
    /// Class 0 scores `(1 + cos 2 az) / 2`; the rest share the remainder.
    AzimuthOracle,
}

impl FromStr for MockMode {
    type Err = MockError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(MockMode::Uniform),
            "centroid" => Ok(MockMode::Centroid),
            "azimuth_oracle" => Ok(MockMode::AzimuthOracle),
            other => Err(MockError::UnknownMode(other.to_string())),
        }
    }
}

/// Mean over frames of each frame area-pooled to an 8x8 RGB grid, scaled to `[0, 1]`.
pub fn pooled_mean_frame(video: &Video) -> Vec<f64> {
    let (w, h) = video.size();
    let (w, h) = (w as usize, h as usize);
    let mut acc = vec![0.0; POOLED_DIM];
    for frame in video.frames() {
        let px = frame.pixels();
        for gy in 0..POOL_GRID {
            let (y0, y1) = (gy * h / POOL_GRID, ((gy + 1) * h / POOL_GRID).max(gy * h / POOL_GRID + 1));
            for gx in 0..POOL_GRID {
                let (x0, x1) = (gx * w / POOL_GRID, ((gx + 1) * w / POOL_GRID).max(gx * w / POOL_GRID + 1));
                let mut sums = [0u64; 3];
                for y in y0..y1.min(h) {
                    for x in x0..x1.min(w) {
                        for c in 0..3 {
                            sums[c] += u64::from(px[(y * w + x) * 3 + c]);
                        }
                    }
                }
                let count = ((y1.min(h) - y0) * (x1.min(w) - x0)) as f64;
                for c in 0..3 {
                    acc[(gy * POOL_GRID + gx) * 3 + c] += sums[c] as f64 / count / 255.0;
                }
            }
        }
    }
    let n = video.frame_count() as f64;
    acc.iter_mut().for_each(|v| *v /= n);
    acc
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| libm::exp(l - max)).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

#[derive(Debug, Clone)]
pub struct MockModel {
    mode: MockMode,
    labels: LabelSpace,
    prototypes: Vec<Vec<f64>>,
}

impl MockModel {
    pub fn new(mode: MockMode, labels: LabelSpace, seed: u64) -> Self {
        let prototypes = match mode {
            MockMode::Centroid => (0..labels.len())
                .map(|class| {
                    let mut rng = seed::rng(seed::derive(seed, "mock-prototype", &class.to_string()));
                    let dist = Uniform::new(0.0, 1.0).expect("valid range");
                    (0..POOLED_DIM).map(|_| dist.sample(&mut rng)).collect()
                })
                .collect(),
            _ => Vec::new(),
        };
        Self {
            mode,
            labels,
            prototypes,
        }
    }

    pub fn labels(&self) -> &LabelSpace {
        &self.labels
    }

    pub fn mode(&self) -> MockMode {
        self.mode
    }

    pub fn scores(&self, video: &Video, factors: Option<&FactorVector>) -> Result<ScoreVector, MockError> {
        let n = self.labels.len();
        let scores = match self.mode {
            MockMode::Uniform => vec![1.0 / n as f64; n],
            MockMode::Centroid => {
                let pooled = pooled_mean_frame(video);
                let logits: Vec<f64> = self
                    .prototypes
                    .iter()
                    .map(|p| {
                        let d2: f64 = p.iter().zip(&pooled).map(|(a, b)| (a - b) * (a - b)).sum();
                        -libm::sqrt(d2)
                    })
                    .collect();
                softmax(&logits)
            }
            MockMode::AzimuthOracle => {
                let f = factors.ok_or_else(|| MockError::MissingFactors(video.video_id().to_string()))?;
                let s0 = (1.0 + crate::geom::sin_cos_deg(2.0 * f.azimuth_deg).1) / 2.0;
                let mut s = vec![0.0; n];
                s[0] = s0;
                if n > 1 {
                    let rest = (1.0 - s0) / (n - 1) as f64;
                    s[1..].iter_mut().for_each(|v| *v = rest);
                }
                s
            }
        };
        Ok(ScoreVector::new(scores).expect("mock scores are finite"))
    }

    /// `pooled`: the pooled mean frame; `consensus`: the score vector itself.
    pub fn feature(
        &self,
        tag: &str,
        video: &Video,
        scores: &ScoreVector,
    ) -> Result<FeatureTensor, MockError> {
        let values: Vec<f32> = match tag {
            "pooled" => pooled_mean_frame(video).iter().map(|&v| v as f32).collect(),
            "consensus" => scores.as_slice().iter().map(|&v| v as f32).collect(),
            other => return Err(MockError::UnknownFeature(other.to_string())),
        };
        Ok(FeatureTensor::new(vec![values.len()], values).expect("1-d shape"))
    }
}

/// One-shot form of [`MockModel::scores`].
pub fn mock_scores(
    video: &Video,
    labels: &LabelSpace,
    mode: MockMode,
    seed: u64,
    factors: Option<&FactorVector>,
) -> Result<ScoreVector, MockError> {
    MockModel::new(mode, labels.clone(), seed).scores(video, factors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Frame;

    fn labels(n: usize) -> LabelSpace {
        LabelSpace::new((0..n).map(|i| alloc::format!("c{i}")).collect()).unwrap()
    }

    fn video() -> Video {
        let frames = (0..3)
            .map(|k| Frame::new(16, 12, (0..16 * 12 * 3).map(|i| ((i * 5 + k * 17) % 256) as u8).collect()).unwrap())
            .collect();
        Video::new("v", 0, 10.0, frames).unwrap()
    }

    #[test]
    fn uniform_scores() {
        let s = mock_scores(&video(), &labels(5), MockMode::Uniform, 0, None).unwrap();
        assert!(s.as_slice().iter().all(|&v| v == 0.2));
    }

    #[test]
    fn azimuth_oracle_at_ninety() {
        let f = FactorVector::new(90.0, 0.0, 5.0, "crimson", "gray", 1.0).unwrap();
        let s = mock_scores(&video(), &labels(3), MockMode::AzimuthOracle, 0, Some(&f)).unwrap();
        assert!(s.as_slice()[0].abs() < 1e-12);
        assert!((s.as_slice()[1] - 0.5).abs() < 1e-12);
        assert_eq!(
            mock_scores(&video(), &labels(3), MockMode::AzimuthOracle, 0, None).unwrap_err(),
            MockError::MissingFactors("v".into())
        );
    }

    #[test]
    fn centroid_is_a_distribution() {
        let m = MockModel::new(MockMode::Centroid, labels(4), 11);
        let s = m.scores(&video(), None).unwrap();
        assert!((s.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let other = MockModel::new(MockMode::Centroid, labels(4), 12).scores(&video(), None).unwrap();
        assert_ne!(s, other);
    }

    #[test]
    fn pooled_feature_shape() {
        let m = MockModel::new(MockMode::Uniform, labels(2), 0);
        let v = video();
        let s = m.scores(&v, None).unwrap();
        let t = m.feature("pooled", &v, &s).unwrap();
        assert_eq!(t.shape, vec![POOLED_DIM]);
        assert!(t.values.iter().all(|&x| (0.0..=1.0).contains(&x)));
        assert_eq!(m.feature("consensus", &v, &s).unwrap().shape, vec![2]);
        assert!(m.feature("conv5", &v, &s).is_err());
    }

    #[test]
    fn unknown_mode() {
        assert!("random".parse::<MockMode>().is_err());
        assert_eq!("azimuth_oracle".parse::<MockMode>(), Ok(MockMode::AzimuthOracle));
    }
}
