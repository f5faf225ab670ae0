//! Factor score curves, their extrema, and PCA embeddings of model features.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::metrics::{Condition, PredictionRecord};
use crate::types::Factor;

pub const DEFAULT_SMOOTHING_WINDOW: usize = 5;
pub const DEFAULT_PCA_DIMS: usize = 3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("no sweep records")]
    Empty,
    #[error("record '{0}' is not a sweep record")]
    NotSweep(String),
    #[error("records mix factors {0} and {1}")]
    MixedFactors(Factor, Factor),
    #[error("duplicate factor value {0}")]
    DuplicateValue(f64),
    #[error("class {class} is outside the score vector of record '{video_id}'")]
    ClassOutOfRange { class: usize, video_id: String },
    #[error("smoothing window {window} must be odd and between 1 and the curve length {len}")]
    Window { window: usize, len: usize },
    #[error("PCA needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("requested {d} components but at most {max} are available")]
    TooManyComponents { d: usize, max: usize },
    #[error("feature rows have inconsistent lengths")]
    Ragged,
    #[error("features contain non-finite values")]
    NonFinite,
    #[error("loop closure needs at least 3 samples, got {0}")]
    TooFewLoopSamples(usize),
    #[error("all consecutive samples coincide")]
    ZeroSteps,
}

/// The true-class score against a swept factor.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SweepCurve {
    pub factor: Factor,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub class_id: usize,
    #[cfg_attr(feature = "serde", serde(default))]
    pub appearance_id: Option<String>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub model: Option<String>,
}

/// Collects `scores[class_id]` at each swept value, sorted by value.
/// Missing values stay missing; duplicates are an error.
pub fn build_curve(records: &[PredictionRecord], class_id: usize) -> Result<SweepCurve, AnalysisError> {
    let mut factor: Option<Factor> = None;
    let mut points: Vec<(f64, f64)> = Vec::with_capacity(records.len());
    let mut appearance_id = None;
    for r in records {
        let Condition::Sweep { factor: f, value } = r.condition else {
            return Err(AnalysisError::NotSweep(r.video_id.clone()));
        };
        match factor {
            Some(prev) if prev != f => return Err(AnalysisError::MixedFactors(prev, f)),
            _ => factor = Some(f),
        }
        let y = r.scores.get(class_id).ok_or_else(|| AnalysisError::ClassOutOfRange {
            class: class_id,
            video_id: r.video_id.clone(),
        })?;
        if appearance_id.is_none() {
            appearance_id = r.factors.as_ref().map(|f| f.appearance_id.clone());
        }
        points.push((value, y));
    }
    let factor = factor.ok_or(AnalysisError::Empty)?;
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    if let Some(w) = points.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(AnalysisError::DuplicateValue(w[0].0));
    }
    Ok(SweepCurve {
        factor,
        xs: points.iter().map(|p| p.0).collect(),
        ys: points.iter().map(|p| p.1).collect(),
        class_id,
        appearance_id,
        model: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct CurveStats {
    pub peaks: Vec<f64>,
    pub valleys: Vec<f64>,
    pub range: (f64, f64),
    pub mean: f64,
    pub window: usize,
}

/// Centered moving average. Periodic curves wrap around; otherwise the
/// window is truncated at the ends.
pub fn smooth(ys: &[f64], window: usize, circular: bool) -> Vec<f64> {
    let n = ys.len() as isize;
    let r = (window / 2) as isize;
    (0..n)
        .map(|i| {
            let (mut sum, mut count) = (0.0, 0usize);
            for k in i - r..=i + r {
                let j = if circular {
                    k.rem_euclid(n)
                } else if (0..n).contains(&k) {
                    k
                } else {
                    continue;
                };
                sum += ys[j as usize];
                count += 1;
            }
            sum / count as f64
        })
        .collect()
}

/// Strict local extrema of the smoothed curve. On a non-periodic factor an
/// end point counts when it is strictly above (below) its one neighbor.
pub fn curve_stats(curve: &SweepCurve, window: usize) -> Result<CurveStats, AnalysisError> {
    let n = curve.ys.len();
    if window == 0 || window % 2 == 0 || window > n {
        return Err(AnalysisError::Window { window, len: n });
    }
    let circular = curve.factor.is_periodic();
    let s = smooth(&curve.ys, window, circular);
    let mut peaks = Vec::new();
    let mut valleys = Vec::new();
    for i in 0..n {
        let neighbors: Vec<f64> = if n == 1 {
            Vec::new()
        } else if circular {
            vec![s[(i + n - 1) % n], s[(i + 1) % n]]
        } else {
            let mut v = Vec::with_capacity(2);
            if i > 0 {
                v.push(s[i - 1]);
            }
            if i + 1 < n {
                v.push(s[i + 1]);
            }
            v
        };
        if neighbors.is_empty() {
            continue;
        }
        if neighbors.iter().all(|&o| s[i] > o) {
            peaks.push(curve.xs[i]);
        } else if neighbors.iter().all(|&o| s[i] < o) {
            valleys.push(curve.xs[i]);
        }
    }
    let min = curve.ys.iter().copied().fold(f64::INFINITY, f64::min);
    let max = curve.ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = curve.ys.iter().sum::<f64>() / n as f64;
    Ok(CurveStats {
        peaks,
        valleys,
        range: (min, max),
        mean,
        window,
    })
}

/// Principal components of a sample-by-feature matrix.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PcaEmbedding {
    /// Unit-norm basis vectors, one per row, by descending variance.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    /// Per-sample projections onto `components`.
    pub coords: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    /// Set when the data had fewer than `d` non-zero directions; only the
    /// supported components are returned.
    pub rank_deficient: bool,
}

/// Column-oriented dense matrix used by the Jacobi SVD.
struct Columns {
    rows: usize,
    cols: Vec<Vec<f64>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One-sided Jacobi: orthogonalizes the columns of `a` in place and returns
/// the accumulated right rotation `v` (columns are right singular vectors).
fn jacobi_orthogonalize(a: &mut Columns) -> Vec<Vec<f64>> {
    let p = a.cols.len();
    let mut v: Vec<Vec<f64>> = (0..p)
        .map(|i| {
            let mut e = vec![0.0; p];
            e[i] = 1.0;
            e
        })
        .collect();
    const MAX_SWEEPS: usize = 60;
    let eps = f64::EPSILON;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..p {
            for j in i + 1..p {
                let alpha = dot(&a.cols[i], &a.cols[i]);
                let beta = dot(&a.cols[j], &a.cols[j]);
                let gamma = dot(&a.cols[i], &a.cols[j]);
                if gamma == 0.0 || libm::fabs(gamma) <= eps * libm::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = libm::copysign(1.0, zeta) / (libm::fabs(zeta) + libm::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                for k in 0..a.rows {
                    let (x, y) = (a.cols[i][k], a.cols[j][k]);
                    a.cols[i][k] = c * x - s * y;
                    a.cols[j][k] = s * x + c * y;
                }
                for k in 0..p {
                    let (x, y) = (v[i][k], v[j][k]);
                    v[i][k] = c * x - s * y;
                    v[j][k] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    v
}

/// Right singular vectors and singular values of the `n x m` row-major
/// matrix, descending by singular value.
fn right_singular(rows: &[Vec<f64>], m: usize) -> Vec<(f64, Vec<f64>)> {
    let n = rows.len();
    let mut pairs: Vec<(f64, Vec<f64>)> = if m <= n {
        let mut a = Columns {
            rows: n,
            cols: (0..m).map(|j| rows.iter().map(|r| r[j]).collect()).collect(),
        };
        let v = jacobi_orthogonalize(&mut a);
        a.cols
            .iter()
            .zip(v)
            .map(|(col, vec)| (libm::sqrt(dot(col, col)), vec))
            .collect()
    } else {
        // Work on the transpose: its left vectors are A's right vectors.
        let mut a = Columns {
            rows: m,
            cols: rows.to_vec(),
        };
        jacobi_orthogonalize(&mut a);
        a.cols
            .into_iter()
            .map(|col| {
                let sigma = libm::sqrt(dot(&col, &col));
                let u = if sigma > 0.0 {
                    col.iter().map(|x| x / sigma).collect()
                } else {
                    vec![0.0; m]
                };
                (sigma, u)
            })
            .collect()
    };
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    pairs
}

/// Flips `v` so its largest-magnitude entry (first on ties) is non-negative.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if libm::fabs(*x) > libm::fabs(v[best]) {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// PCA via SVD of the mean-centered matrix.
pub fn pca(features: &[Vec<f64>], d: usize) -> Result<PcaEmbedding, AnalysisError> {
    let n = features.len();
    if n < 2 {
        return Err(AnalysisError::TooFewSamples(n));
    }
    let m = features[0].len();
    if features.iter().any(|r| r.len() != m) {
        return Err(AnalysisError::Ragged);
    }
    if features.iter().flatten().any(|x| !x.is_finite()) {
        return Err(AnalysisError::NonFinite);
    }
    let max = (n - 1).min(m);
    if d == 0 || d > max {
        return Err(AnalysisError::TooManyComponents { d, max });
    }
    let mut mean = vec![0.0; m];
    for r in features {
        for (acc, x) in mean.iter_mut().zip(r) {
            *acc += x;
        }
    }
    mean.iter_mut().for_each(|x| *x /= n as f64);
    let centered: Vec<Vec<f64>> = features
        .iter()
        .map(|r| r.iter().zip(&mean).map(|(x, mu)| x - mu).collect())
        .collect();

    let pairs = right_singular(&centered, m);
    let sigma_max = pairs.first().map_or(0.0, |p| p.0);
    let tol = sigma_max * (n.max(m) as f64) * f64::EPSILON * 8.0;
    let mut components = Vec::with_capacity(d);
    let mut explained_variance = Vec::with_capacity(d);
    for (sigma, mut v) in pairs.into_iter().take(d) {
        if !(sigma > tol) {
            break;
        }
        fix_sign(&mut v);
        components.push(v);
        explained_variance.push(sigma * sigma / (n - 1) as f64);
    }
    let coords = centered
        .iter()
        .map(|r| components.iter().map(|c| dot(r, c)).collect())
        .collect();
    Ok(PcaEmbedding {
        rank_deficient: components.len() < d,
        components,
        explained_variance,
        coords,
        mean,
    })
}

/// Distance from the last sample back to the first, relative to the mean
/// step between consecutive samples. About 1 for a closed loop.
pub fn loop_closure(coords: &[Vec<f64>]) -> Result<f64, AnalysisError> {
    let n = coords.len();
    if n < 3 {
        return Err(AnalysisError::TooFewLoopSamples(n));
    }
    let dist = |a: &[f64], b: &[f64]| {
        libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
    };
    let steps: f64 = coords.windows(2).map(|w| dist(&w[0], &w[1])).sum();
    let mean_step = steps / (n - 1) as f64;
    if mean_step == 0.0 {
        return Err(AnalysisError::ZeroSteps);
    }
    Ok(dist(&coords[n - 1], &coords[0]) / mean_step)
}
