//! Accuracy, accuracy changing rates and the reliance regimes.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::types::{Factor, FactorVector, FeatureTensor, ScoreVector};

/// Which variant of the data a prediction was made on.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Condition {
    Original,
    Foreground,
    Background,
    Transformed { name: String },
    Sweep { factor: Factor, value: f64 },
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::Original => f.write_str("original"),
            Condition::Foreground => f.write_str("foreground"),
            Condition::Background => f.write_str("background"),
            Condition::Transformed { name } => write!(f, "transformed:{name}"),
            Condition::Sweep { factor, value } => write!(f, "sweep:{factor}={value}"),
        }
    }
}

/// One model answer for one video, as persisted in JSON-lines files.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PredictionRecord {
    pub video_id: String,
    pub true_label: usize,
    pub scores: ScoreVector,
    pub condition: Condition,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub factors: Option<FactorVector>,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "BTreeMap::is_empty"))]
    pub features: BTreeMap<String, FeatureTensor>,
}

impl PredictionRecord {
    pub fn new(
        video_id: impl Into<String>,
        true_label: usize,
        scores: ScoreVector,
        condition: Condition,
    ) -> Self {
        Self {
            video_id: video_id.into(),
            true_label,
            scores,
            condition,
            factors: None,
            features: BTreeMap::new(),
        }
    }

    /// Zero-based rank of the true label; ties go to the lower class id.
    pub fn true_rank(&self) -> usize {
        let s = self.scores.as_slice();
        let t = s.get(self.true_label).copied().unwrap_or(f64::NEG_INFINITY);
        s.iter()
            .enumerate()
            .filter(|&(j, &v)| v > t || (v == t && j < self.true_label))
            .count()
    }

    pub fn correct_at(&self, k: usize) -> bool {
        self.true_label < self.scores.len() && self.true_rank() < k
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("no records")]
    Empty,
    #[error("k must be >= 1")]
    ZeroK,
    #[error("class {class} has no records for condition {condition}")]
    MissingCondition { class: usize, condition: &'static str },
    #[error("record '{0}' has a condition other than original/foreground/background")]
    UnexpectedCondition(String),
}

pub fn topk_accuracy(records: &[PredictionRecord], k: usize) -> Result<f64, MetricsError> {
    if k == 0 {
        return Err(MetricsError::ZeroK);
    }
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    let hits = records.iter().filter(|r| r.correct_at(k)).count();
    Ok(hits as f64 / records.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ChangingRates {
    pub cr_f: f64,
    pub cr_b: f64,
}

/// `CR_x = (Acc_o - Acc_x) / Acc_o`; `None` when `Acc_o = 0`.
pub fn changing_rates(acc_o: f64, acc_f: f64, acc_b: f64) -> Option<ChangingRates> {
    if acc_o == 0.0 {
        return None;
    }
    Some(ChangingRates {
        cr_f: (acc_o - acc_f) / acc_o,
        cr_b: (acc_o - acc_b) / acc_o,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Regime {
    ForegroundReliant,
    Mixed,
    BackgroundReliant,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::ForegroundReliant => "foreground_reliant",
            Regime::Mixed => "mixed",
            Regime::BackgroundReliant => "background_reliant",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeThresholds {
    pub lo: f64,
    pub hi: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        Self { lo: 0.25, hi: 0.75 }
    }
}

/// Foreground-reliant: the model still works on the foreground alone and
/// fails on the background alone. Background-reliant is the mirror image.
pub fn classify_regime(rates: ChangingRates, t: RegimeThresholds) -> Regime {
    if rates.cr_f <= t.lo && rates.cr_b >= t.hi {
        Regime::ForegroundReliant
    } else if rates.cr_f >= t.hi && rates.cr_b <= t.lo {
        Regime::BackgroundReliant
    } else {
        Regime::Mixed
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ClassMetrics {
    pub class_id: usize,
    pub acc_o: f64,
    pub acc_f: f64,
    pub acc_b: f64,
    pub cr_f: f64,
    pub cr_b: f64,
    pub n_videos: usize,
}

impl ClassMetrics {
    pub fn rates(&self) -> ChangingRates {
        ChangingRates {
            cr_f: self.cr_f,
            cr_b: self.cr_b,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemanticMetrics {
    /// Sorted by `cr_f`, then class id.
    pub classes: Vec<ClassMetrics>,
    /// Classes with `acc_o = 0`, for which changing rates are undefined.
    pub excluded: Vec<usize>,
}

#[derive(Default)]
struct Tally {
    hits: usize,
    total: usize,
}

impl Tally {
    fn accuracy(&self) -> f64 {
        self.hits as f64 / self.total as f64
    }
}

/// Top-1 accuracies per class and condition, then changing rates per class.
pub fn per_class_metrics(records: &[PredictionRecord]) -> Result<SemanticMetrics, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut sorted: Vec<&PredictionRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.video_id.cmp(&b.video_id));

    // class -> [original, foreground, background]
    let mut tallies: BTreeMap<usize, [Tally; 3]> = BTreeMap::new();
    for r in sorted {
        let slot = match r.condition {
            Condition::Original => 0,
            Condition::Foreground => 1,
            Condition::Background => 2,
            _ => return Err(MetricsError::UnexpectedCondition(r.video_id.clone())),
        };
        let t = &mut tallies.entry(r.true_label).or_default()[slot];
        t.total += 1;
        t.hits += usize::from(r.correct_at(1));
    }

    let mut classes = Vec::new();
    let mut excluded = Vec::new();
    for (&class, t) in &tallies {
        for (slot, name) in ["original", "foreground", "background"].iter().enumerate() {
            if t[slot].total == 0 {
                return Err(MetricsError::MissingCondition {
                    class,
                    condition: name,
                });
            }
        }
        let (acc_o, acc_f, acc_b) = (t[0].accuracy(), t[1].accuracy(), t[2].accuracy());
        match changing_rates(acc_o, acc_f, acc_b) {
            Some(cr) => classes.push(ClassMetrics {
                class_id: class,
                acc_o,
                acc_f,
                acc_b,
                cr_f: cr.cr_f,
                cr_b: cr.cr_b,
                n_videos: t[0].total,
            }),
            None => excluded.push(class),
        }
    }
    classes.sort_by(|a, b| a.cr_f.total_cmp(&b.cr_f).then(a.class_id.cmp(&b.class_id)));
    Ok(SemanticMetrics { classes, excluded })
}
