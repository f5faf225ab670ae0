//! `report`: tables, curves and embeddings computed from record files only.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use ipt_core::analysis::{build_curve, curve_stats, loop_closure, pca, CurveStats, PcaEmbedding, SweepCurve};
use ipt_core::metrics::{classify_regime, per_class_metrics, topk_accuracy, ClassMetrics, Condition, PredictionRecord, Regime};
use ipt_core::transforms::default_suite;
use ipt_core::LabelSpace;
use serde::{Deserialize, Serialize};

use crate::config::ReportConfig;
use crate::error::{Error, Result};
use crate::evaluate::read_records;
use crate::output::{write_atomic, write_json};
use crate::svg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ReportMode {
    Image,
    Semantic,
    Sweep,
}

/// Reads and concatenates record files, rejecting repeated
/// (condition, video id) pairs.
pub fn load_records(files: &[PathBuf]) -> Result<Vec<PredictionRecord>> {
    let mut all = Vec::new();
    let mut seen = BTreeSet::new();
    for f in files {
        for r in read_records(f)? {
            if !seen.insert((r.condition.to_string(), r.video_id.clone())) {
                return Err(Error::data(format!(
                    "{}: second record for '{}' under {}",
                    f.display(),
                    r.video_id,
                    r.condition
                )));
            }
            all.push(r);
        }
    }
    if all.is_empty() {
        return Err(Error::data("no records to report on"));
    }
    all.sort_by(|a, b| a.video_id.cmp(&b.video_id).then_with(|| a.condition.to_string().cmp(&b.condition.to_string())));
    Ok(all)
}

fn incompatible(mode: &str, r: &PredictionRecord) -> Error {
    Error::data(format!(
        "{mode} report cannot use record '{}' with condition {}",
        r.video_id, r.condition
    ))
}

fn csv_text(header: &[&str], rows: Vec<Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for row in rows {
        w.write_record(&row).expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRow {
    pub condition: String,
    pub videos: usize,
    pub top1: f64,
    pub top5: f64,
}

/// One row per distinct condition: originals first, then the transform
/// suite in its usual order, then anything else by name.
pub fn image_report(records: &[PredictionRecord], out: &Path) -> Result<Vec<ImageRow>> {
    let suite: Vec<&str> = default_suite().iter().map(|t| t.kind()).collect();
    let mut groups: BTreeMap<(usize, String), Vec<PredictionRecord>> = BTreeMap::new();
    for r in records {
        let key = match &r.condition {
            Condition::Original => (0, "original".to_string()),
            Condition::Transformed { name } => (
                suite.iter().position(|k| k == name).map_or(suite.len() + 1, |i| i + 1),
                name.clone(),
            ),
            _ => return Err(incompatible("image", r)),
        };
        groups.entry(key).or_default().push(r.clone());
    }
    let rows: Vec<ImageRow> = groups
        .into_iter()
        .map(|((_, condition), recs)| ImageRow {
            condition,
            videos: recs.len(),
            top1: topk_accuracy(&recs, 1).expect("non-empty group"),
            top5: topk_accuracy(&recs, 5).expect("non-empty group"),
        })
        .collect();
    write_atomic(
        &out.join("image_accuracy.csv"),
        &csv_text(
            &["condition", "videos", "top1", "top5"],
            rows.iter()
                .map(|r| vec![r.condition.clone(), r.videos.to_string(), r.top1.to_string(), r.top5.to_string()])
                .collect(),
        ),
    )?;
    write_json(&out.join("image_accuracy.json"), &rows)?;
    let names: Vec<String> = rows.iter().map(|r| r.condition.clone()).collect();
    let chart = svg::bar_chart(
        "Accuracy per transform",
        "accuracy",
        &names,
        &[
            ("top-1", rows.iter().map(|r| r.top1).collect()),
            ("top-5", rows.iter().map(|r| r.top5).collect()),
        ],
    );
    write_atomic(&out.join("image_accuracy.svg"), chart.as_bytes())?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub class_id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub acc_o: f64,
    pub acc_f: f64,
    pub acc_b: f64,
    pub cr_f: f64,
    pub cr_b: f64,
    pub n_videos: usize,
    pub regime: Regime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticReport {
    pub regime_lo: f64,
    pub regime_hi: f64,
    /// Sorted by `cr_f`, then class id.
    pub classes: Vec<ClassRow>,
    /// Classes the model never recognizes on the originals.
    pub excluded: Vec<usize>,
    pub regime_counts: BTreeMap<Regime, usize>,
}

/// Per-class changing rates. Originals count only when their `_fg`
/// counterpart survived the drop rule.
pub fn semantic_report(
    records: &[PredictionRecord],
    cfg: &ReportConfig,
    labels: Option<&LabelSpace>,
    out: &Path,
) -> Result<SemanticReport> {
    let fg_ids: BTreeSet<&str> = records
        .iter()
        .filter(|r| r.condition == Condition::Foreground)
        .filter_map(|r| r.video_id.strip_suffix("_fg"))
        .collect();
    if fg_ids.is_empty() {
        return Err(Error::data("semantic report needs foreground records (ids ending in _fg)"));
    }
    let mut used = Vec::new();
    for r in records {
        match r.condition {
            Condition::Original if !fg_ids.contains(r.video_id.as_str()) => {}
            Condition::Original | Condition::Foreground | Condition::Background => used.push(r.clone()),
            _ => return Err(incompatible("semantic", r)),
        }
    }
    let m = per_class_metrics(&used).map_err(|e| Error::data(e.to_string()))?;
    let t = cfg.thresholds();
    let name = |id: usize| labels.and_then(|l| l.name(id)).map(String::from);
    let classes: Vec<ClassRow> = m
        .classes
        .iter()
        .map(|c: &ClassMetrics| ClassRow {
            class_id: c.class_id,
            label: name(c.class_id),
            acc_o: c.acc_o,
            acc_f: c.acc_f,
            acc_b: c.acc_b,
            cr_f: c.cr_f,
            cr_b: c.cr_b,
            n_videos: c.n_videos,
            regime: classify_regime(c.rates(), t),
        })
        .collect();
    let mut regime_counts: BTreeMap<Regime, usize> =
        [Regime::ForegroundReliant, Regime::Mixed, Regime::BackgroundReliant].into_iter().map(|r| (r, 0)).collect();
    for c in &classes {
        *regime_counts.entry(c.regime).or_default() += 1;
    }
    let report = SemanticReport {
        regime_lo: t.lo,
        regime_hi: t.hi,
        classes,
        excluded: m.excluded,
        regime_counts,
    };

    let rows = report
        .classes
        .iter()
        .map(|c| {
            vec![
                c.class_id.to_string(),
                c.label.clone().unwrap_or_default(),
                c.acc_o.to_string(),
                c.acc_f.to_string(),
                c.acc_b.to_string(),
                c.cr_f.to_string(),
                c.cr_b.to_string(),
                c.n_videos.to_string(),
                c.regime.name().to_string(),
            ]
        })
        .collect();
    write_atomic(
        &out.join("semantic_metrics.csv"),
        &csv_text(&["class_id", "label", "acc_o", "acc_f", "acc_b", "cr_f", "cr_b", "n_videos", "regime"], rows),
    )?;
    write_json(&out.join("semantic_metrics.json"), &report)?;
    let names: Vec<String> = report
        .classes
        .iter()
        .map(|c| c.label.clone().unwrap_or_else(|| format!("class {}", c.class_id)))
        .collect();
    let chart = svg::bar_chart(
        "Accuracy changing rates (sorted by CR_f)",
        "changing rate",
        &names,
        &[
            ("CR_f", report.classes.iter().map(|c| c.cr_f).collect()),
            ("CR_b", report.classes.iter().map(|c| c.cr_b).collect()),
        ],
    );
    write_atomic(&out.join("cr_bars.svg"), chart.as_bytes())?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEmbedding {
    pub tag: String,
    pub embedding: PcaEmbedding,
    /// Only for periodic factors.
    #[serde(default)]
    pub loop_closure: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGroup {
    pub group: String,
    pub curve: SweepCurve,
    pub stats: CurveStats,
    #[serde(default)]
    pub embeddings: Vec<FeatureEmbedding>,
}

/// `clip_app_azimuth_0012` -> `clip_app_azimuth`.
pub fn sweep_group(video_id: &str) -> &str {
    match video_id.rsplit_once('_') {
        Some((stem, idx)) if !idx.is_empty() && idx.bytes().all(|b| b.is_ascii_digit()) => stem,
        _ => video_id,
    }
}

fn file_safe(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' }).collect()
}

fn embed_group(recs: &[PredictionRecord], curve: &SweepCurve, cfg: &ReportConfig) -> Result<Vec<FeatureEmbedding>> {
    let mut ordered: Vec<&PredictionRecord> = recs.iter().collect();
    ordered.sort_by(|a, b| match (&a.condition, &b.condition) {
        (Condition::Sweep { value: x, .. }, Condition::Sweep { value: y, .. }) => x.total_cmp(y),
        _ => std::cmp::Ordering::Equal,
    });
    let tags: BTreeSet<&String> = ordered
        .iter()
        .flat_map(|r| r.features.keys())
        .filter(|t| ordered.iter().all(|r| r.features.contains_key(*t)))
        .collect();
    let mut out = Vec::new();
    for tag in tags {
        let rows: Vec<Vec<f64>> = ordered
            .iter()
            .map(|r| r.features[tag].values.iter().map(|&v| f64::from(v)).collect())
            .collect();
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if n < 2 || m == 0 {
            continue;
        }
        let d = cfg.pca_dims.min(n - 1).min(m);
        let embedding = pca(&rows, d).map_err(|e| Error::data(format!("PCA of '{tag}': {e}")))?;
        if embedding.rank_deficient {
            log::warn!("features '{tag}' span fewer than {d} directions; reporting {}", embedding.components.len());
        }
        let loop_closure = if curve.factor.is_periodic() && n >= 3 && !embedding.components.is_empty() {
            loop_closure(&embedding.coords).ok()
        } else {
            None
        };
        out.push(FeatureEmbedding {
            tag: tag.clone(),
            embedding,
            loop_closure,
        });
    }
    Ok(out)
}

/// Score curves per sweep (records grouped by id stem), their extrema and,
/// when records carry features, PCA embeddings per feature tag.
pub fn sweep_report(records: &[PredictionRecord], cfg: &ReportConfig, out: &Path) -> Result<Vec<SweepGroup>> {
    let mut groups: BTreeMap<String, Vec<PredictionRecord>> = BTreeMap::new();
    for r in records {
        if !matches!(r.condition, Condition::Sweep { .. }) {
            return Err(incompatible("sweep", r));
        }
        groups.entry(sweep_group(&r.video_id).to_string()).or_default().push(r.clone());
    }
    let mut result = Vec::new();
    let mut csv_rows = Vec::new();
    for (group, recs) in groups {
        let class = recs[0].true_label;
        if let Some(r) = recs.iter().find(|r| r.true_label != class) {
            return Err(Error::data(format!("sweep '{group}' mixes classes ({} and {})", class, r.true_label)));
        }
        let mut curve = build_curve(&recs, class).map_err(|e| Error::data(format!("sweep '{group}': {e}")))?;
        curve.model = None;
        let stats = curve_stats(&curve, cfg.smoothing_window).map_err(|e| Error::data(format!("sweep '{group}': {e}")))?;
        let embeddings = embed_group(&recs, &curve, cfg)?;

        for (x, y) in curve.xs.iter().zip(&curve.ys) {
            csv_rows.push(vec![group.clone(), curve.factor.to_string(), class.to_string(), x.to_string(), y.to_string()]);
        }
        let marks: Vec<(f64, String)> = stats
            .peaks
            .iter()
            .map(|&x| (x, format!("peak {x}")))
            .chain(stats.valleys.iter().map(|&x| (x, format!("valley {x}"))))
            .collect();
        let chart = svg::line_chart(
            &format!("{group}: true-class score"),
            curve.factor.name(),
            "score",
            &[svg::Series {
                name: group.clone(),
                points: curve.xs.iter().copied().zip(curve.ys.iter().copied()).collect(),
            }],
            &marks,
        );
        let stem = file_safe(&group);
        write_atomic(&out.join(format!("curve_{stem}.svg")), chart.as_bytes())?;
        for e in &embeddings {
            let title = match e.loop_closure {
                Some(g) => format!("{group} / {}: PCA (loop closure {g:.3})", e.tag),
                None => format!("{group} / {}: PCA", e.tag),
            };
            let chart = svg::projections(&title, &e.embedding.coords);
            write_atomic(&out.join(format!("embedding_{stem}_{}.svg", file_safe(&e.tag))), chart.as_bytes())?;
        }
        result.push(SweepGroup {
            group,
            curve,
            stats,
            embeddings,
        });
    }
    write_atomic(&out.join("curves.csv"), &csv_text(&["group", "factor", "class_id", "x", "y"], csv_rows))?;
    write_json(&out.join("curves.json"), &result)?;
    Ok(result)
}

/// Runs one report mode over the given record files into `out`.
pub fn report(
    files: &[PathBuf],
    mode: ReportMode,
    cfg: &ReportConfig,
    labels: Option<&LabelSpace>,
    out: &Path,
) -> Result<serde_json::Value> {
    let records = load_records(files)?;
    std::fs::create_dir_all(out).map_err(|e| Error::data(format!("{}: {e}", out.display())))?;
    Ok(match mode {
        ReportMode::Image => serde_json::to_value(image_report(&records, out)?),
        ReportMode::Semantic => serde_json::to_value(semantic_report(&records, cfg, labels, out)?),
        ReportMode::Sweep => serde_json::to_value(sweep_report(&records, cfg, out)?),
    }
    .expect("report values serialize"))
}
