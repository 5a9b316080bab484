//! Micro average precision for both tracks and the ablation report.
//!
//! Descriptor-track muAP walks one global ranking of all (query, reference)
//! candidate pairs; pairs in the ground truth are positives and unretrieved
//! positives still count in the denominator. Matching-track muAP treats each
//! segment as a rectangle in its pair's (query-time x reference-time) plane
//! and accumulates area-based precision and recall over a global score walk;
//! areas are summed across pairs, with unions computed exactly per pair via
//! coordinate-compression sweeps.

use std::collections::{HashMap, HashSet};

use thiserror::Error;

use crate::alignment::SegmentMatch;
use crate::retrieval::CandidatePair;
use crate::views::{EditLabels, ViewStore};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("ground truth is empty")]
    EmptyGroundTruth,
    #[error("ground truth has zero total area")]
    ZeroAreaGroundTruth,
    #[error("duplicate candidate pair ({query_id}, {ref_id})")]
    DuplicatePair { query_id: String, ref_id: String },
    #[error("non-finite candidate score for ({query_id}, {ref_id})")]
    NonFiniteScore { query_id: String, ref_id: String },
    #[error("ground truth record has an invalid interval: {0:?}")]
    BadInterval(Box<SegmentMatch>),
    #[error("duplicate ground truth record: {0:?}")]
    DuplicateRecord(Box<SegmentMatch>),
    #[error("ground truth line {line}: {message}")]
    BadCsv { line: usize, message: String },
    #[error("pipeline: {0}")]
    Pipeline(#[from] crate::retrieval::PipelineError),
    #[error("alignment: {0}")]
    Alignment(#[from] crate::alignment::AlignError),
}

/// True copied segments; scores on the records are ignored.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    records: Vec<SegmentMatch>,
    pair_set: HashSet<(String, String)>,
}

impl GroundTruth {
    pub fn from_records(records: Vec<SegmentMatch>) -> Result<Self, EvalError> {
        let mut seen: HashSet<String> = HashSet::new();
        let mut pair_set = HashSet::new();
        for r in &records {
            if !(r.q_start <= r.q_end && r.r_start <= r.r_end)
                || !r.q_start.is_finite()
                || !r.q_end.is_finite()
                || !r.r_start.is_finite()
                || !r.r_end.is_finite()
            {
                return Err(EvalError::BadInterval(Box::new(r.clone())));
            }
            let key = format!(
                "{}\u{1f}{}\u{1f}{}\u{1f}{}\u{1f}{}\u{1f}{}",
                r.query_id, r.ref_id, r.q_start, r.q_end, r.r_start, r.r_end
            );
            if !seen.insert(key) {
                return Err(EvalError::DuplicateRecord(Box::new(r.clone())));
            }
            pair_set.insert((r.query_id.clone(), r.ref_id.clone()));
        }
        Ok(GroundTruth { records, pair_set })
    }

    pub fn records(&self) -> &[SegmentMatch] {
        &self.records
    }

    pub fn pair_set(&self) -> &HashSet<(String, String)> {
        &self.pair_set
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Ground-truth CSV: header plus one record per line, seconds with 3
    /// decimals.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("query_id,ref_id,query_start,query_end,ref_start,ref_end\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{:.3},{:.3},{:.3},{:.3}\n",
                r.query_id, r.ref_id, r.q_start, r.q_end, r.r_start, r.r_end
            ));
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Self, EvalError> {
        let expected = "query_id,ref_id,query_start,query_end,ref_start,ref_end";
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == expected => {}
            Some((_, header)) => {
                return Err(EvalError::BadCsv {
                    line: 1,
                    message: format!("unexpected header {header:?}"),
                })
            }
            None => {
                return Err(EvalError::BadCsv {
                    line: 1,
                    message: "empty file".to_string(),
                })
            }
        }
        let mut records = Vec::new();
        for (idx, raw) in lines {
            let line = idx + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = raw.split(',').collect();
            if fields.len() != 6 {
                return Err(EvalError::BadCsv {
                    line,
                    message: format!("expected 6 fields, got {}", fields.len()),
                });
            }
            let num = |s: &str| -> Result<f32, EvalError> {
                s.trim().parse().map_err(|_| EvalError::BadCsv {
                    line,
                    message: format!("bad number {s:?}"),
                })
            };
            records.push(SegmentMatch {
                query_id: fields[0].to_string(),
                ref_id: fields[1].to_string(),
                q_start: num(fields[2])?,
                q_end: num(fields[3])?,
                r_start: num(fields[4])?,
                r_end: num(fields[5])?,
                score: 0.0,
            });
        }
        GroundTruth::from_records(records)
    }
}

/// Global micro average precision over all candidate pairs: sort everything
/// by descending score (ties by query then reference id), accumulate
/// precision at each positive hit, divide by the total positive count.
pub fn descriptor_muap(pairs: &[CandidatePair], gt: &GroundTruth) -> Result<f64, EvalError> {
    if gt.pair_set.is_empty() {
        return Err(EvalError::EmptyGroundTruth);
    }
    let mut seen = HashSet::new();
    for p in pairs {
        if !p.score.is_finite() {
            return Err(EvalError::NonFiniteScore {
                query_id: p.query_id.clone(),
                ref_id: p.ref_id.clone(),
            });
        }
        if !seen.insert((p.query_id.as_str(), p.ref_id.as_str())) {
            return Err(EvalError::DuplicatePair {
                query_id: p.query_id.clone(),
                ref_id: p.ref_id.clone(),
            });
        }
    }
    let mut sorted: Vec<&CandidatePair> = pairs.iter().collect();
    sorted.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.query_id.cmp(&b.query_id))
            .then_with(|| a.ref_id.cmp(&b.ref_id))
    });
    let mut hits = 0usize;
    let mut ap = 0f64;
    for (rank0, p) in sorted.iter().enumerate() {
        if gt
            .pair_set
            .contains(&(p.query_id.clone(), p.ref_id.clone()))
        {
            hits += 1;
            ap += hits as f64 / (rank0 + 1) as f64;
        }
    }
    Ok(ap / gt.pair_set.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Rect {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Rect {
    fn from_match(m: &SegmentMatch) -> Rect {
        Rect {
            x0: m.q_start as f64,
            x1: m.q_end as f64,
            y0: m.r_start as f64,
            y1: m.r_end as f64,
        }
    }

    fn intersect(&self, other: &Rect) -> Option<Rect> {
        let x0 = self.x0.max(other.x0);
        let x1 = self.x1.min(other.x1);
        let y0 = self.y0.max(other.y0);
        let y1 = self.y1.min(other.y1);
        (x0 < x1 && y0 < y1).then_some(Rect { x0, x1, y0, y1 })
    }
}

/// Exact union area by coordinate compression: mark which cells of the
/// breakpoint grid are covered by any rectangle.
fn union_area(rects: &[Rect]) -> f64 {
    let live: Vec<&Rect> = rects.iter().filter(|r| r.x0 < r.x1 && r.y0 < r.y1).collect();
    if live.is_empty() {
        return 0.0;
    }
    let mut xs: Vec<f64> = live.iter().flat_map(|r| [r.x0, r.x1]).collect();
    let mut ys: Vec<f64> = live.iter().flat_map(|r| [r.y0, r.y1]).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    let mut area = 0.0;
    for xi in 0..xs.len() - 1 {
        let (x0, x1) = (xs[xi], xs[xi + 1]);
        let cx = 0.5 * (x0 + x1);
        for yi in 0..ys.len() - 1 {
            let (y0, y1) = (ys[yi], ys[yi + 1]);
            let cy = 0.5 * (y0 + y1);
            if live
                .iter()
                .any(|r| r.x0 <= cx && cx <= r.x1 && r.y0 <= cy && cy <= r.y1)
            {
                area += (x1 - x0) * (y1 - y0);
            }
        }
    }
    area
}

/// Area of union(preds) ∩ union(gts): union of all pairwise intersections.
fn covered_area(preds: &[Rect], gts: &[Rect]) -> f64 {
    let mut pieces = Vec::new();
    for p in preds {
        for g in gts {
            if let Some(r) = p.intersect(g) {
                pieces.push(r);
            }
        }
    }
    union_area(&pieces)
}

/// Area-based matching-track micro average precision. Predictions are walked
/// in descending score; at each step precision is (covered ground-truth
/// area) / (predicted area) and recall is (covered ground-truth area) /
/// (total ground-truth area), all areas summed over (query, reference)
/// pairs. muAP integrates precision over recall increments.
pub fn matching_muap(preds: &[SegmentMatch], gt: &GroundTruth) -> Result<f64, EvalError> {
    if gt.records.is_empty() {
        return Err(EvalError::EmptyGroundTruth);
    }
    let mut gt_rects: HashMap<(String, String), Vec<Rect>> = HashMap::new();
    for r in &gt.records {
        gt_rects
            .entry((r.query_id.clone(), r.ref_id.clone()))
            .or_default()
            .push(Rect::from_match(r));
    }
    let total_gt_area: f64 = gt_rects.values().map(|rs| union_area(rs)).sum();
    if total_gt_area == 0.0 {
        return Err(EvalError::ZeroAreaGroundTruth);
    }

    let mut sorted: Vec<&SegmentMatch> = preds.iter().collect();
    sorted.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.query_id.cmp(&b.query_id))
            .then_with(|| a.ref_id.cmp(&b.ref_id))
            .then_with(|| a.q_start.total_cmp(&b.q_start))
            .then_with(|| a.r_start.total_cmp(&b.r_start))
    });

    let empty: Vec<Rect> = Vec::new();
    let mut pred_rects: HashMap<(String, String), Vec<Rect>> = HashMap::new();
    let mut pred_area_by_pair: HashMap<(String, String), f64> = HashMap::new();
    let mut covered_by_pair: HashMap<(String, String), f64> = HashMap::new();
    let mut pred_total = 0.0;
    let mut covered_total = 0.0;
    let mut prev_recall = 0.0;
    let mut muap = 0.0;

    for m in sorted {
        let key = (m.query_id.clone(), m.ref_id.clone());
        let rects = pred_rects.entry(key.clone()).or_default();
        rects.push(Rect::from_match(m));
        let gts = gt_rects.get(&key).unwrap_or(&empty);

        let new_pred = union_area(rects);
        let new_covered = covered_area(rects, gts);
        pred_total += new_pred - pred_area_by_pair.get(&key).copied().unwrap_or(0.0);
        covered_total += new_covered - covered_by_pair.get(&key).copied().unwrap_or(0.0);
        pred_area_by_pair.insert(key.clone(), new_pred);
        covered_by_pair.insert(key, new_covered);

        let recall = covered_total / total_gt_area;
        let precision = if pred_total > 0.0 {
            covered_total / pred_total
        } else {
            0.0
        };
        muap += precision * (recall - prev_recall);
        prev_recall = recall;
    }
    Ok(muap)
}

/// One ablation configuration and its two-track scores.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub multi_view: bool,
    pub consistency_weight: bool,
    pub temporal_concat: bool,
    pub descriptor_muap: f64,
    pub matching_muap: f64,
}

/// Everything the ablation needs to run both pipelines.
pub struct AblationData<'a> {
    pub queries: &'a crate::store::Corpus,
    pub views: Option<&'a ViewStore>,
    pub labels: &'a [EditLabels],
    pub refs: &'a crate::store::Corpus,
    pub noise: &'a crate::store::Corpus,
    pub gt: &'a GroundTruth,
}

/// Run the cumulative ablation: baseline, +multi-view, +consistency
/// weighting, +temporal concat. Stages not being toggled (score
/// normalization, search, alignment) come from the base configs unchanged.
pub fn ablation_report(
    base: &crate::retrieval::DescriptorPipelineConfig,
    tn: &crate::alignment::TnConfig,
    data: &AblationData<'_>,
) -> Result<Vec<AblationRow>, EvalError> {
    let toggles = [
        (false, false, false),
        (true, false, false),
        (true, true, false),
        (true, true, true),
    ];
    let mut rows = Vec::with_capacity(toggles.len());
    for (multi_view, consistency_weight, temporal_concat) in toggles {
        let cfg = crate::retrieval::DescriptorPipelineConfig {
            multi_view,
            consistency_weight,
            temporal_concat,
            ..base.clone()
        };
        let out = crate::retrieval::pipeline_descriptor_track(
            data.queries,
            data.views,
            data.labels,
            data.refs,
            data.noise,
            &cfg,
        )?;
        let flat: Vec<CandidatePair> = out.candidates.iter().flatten().cloned().collect();
        let d_muap = descriptor_muap(&flat, data.gt)?;
        let segments =
            crate::alignment::pipeline_matching_track(&flat, &out.queries, &out.refs, tn)?;
        let m_muap = matching_muap(&segments, data.gt)?;
        rows.push(AblationRow {
            multi_view,
            consistency_weight,
            temporal_concat,
            descriptor_muap: d_muap,
            matching_muap: m_muap,
        });
    }
    Ok(rows)
}

/// Aligned-column text table. The header note records the metric convention
/// so reports are self-describing.
pub fn ablation_table_text(rows: &[AblationRow]) -> String {
    let mut out = String::new();
    out.push_str("# matching muAP: area precision/recall over per-pair rectangle unions, summed globally\n");
    out.push_str(&format!(
        "{:<11} {:<21} {:<15} {:>17} {:>15}\n",
        "multi-crop", "consistency-weighting", "temporal-concat", "muAP(descriptor)", "muAP(matching)"
    ));
    for r in rows {
        let mark = |b: bool| if b { "x" } else { "" };
        out.push_str(&format!(
            "{:<11} {:<21} {:<15} {:>17.4} {:>15.4}\n",
            mark(r.multi_view),
            mark(r.consistency_weight),
            mark(r.temporal_concat),
            r.descriptor_muap,
            r.matching_muap
        ));
    }
    out
}

pub fn ablation_table_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from(
        "multi_view,consistency_weight,temporal_concat,descriptor_muap,matching_muap\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{:.6},{:.6}\n",
            r.multi_view, r.consistency_weight, r.temporal_concat, r.descriptor_muap, r.matching_muap
        ));
    }
    out
}

pub fn parse_ablation_csv(text: &str) -> Result<Vec<AblationRow>, EvalError> {
    let expected = "multi_view,consistency_weight,temporal_concat,descriptor_muap,matching_muap";
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == expected => {}
        _ => {
            return Err(EvalError::BadCsv {
                line: 1,
                message: "unexpected ablation header".to_string(),
            })
        }
    }
    let mut rows = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != 5 {
            return Err(EvalError::BadCsv {
                line,
                message: format!("expected 5 fields, got {}", fields.len()),
            });
        }
        let flag = |s: &str| -> Result<bool, EvalError> {
            s.trim().parse().map_err(|_| EvalError::BadCsv {
                line,
                message: format!("bad flag {s:?}"),
            })
        };
        let num = |s: &str| -> Result<f64, EvalError> {
            s.trim().parse().map_err(|_| EvalError::BadCsv {
                line,
                message: format!("bad number {s:?}"),
            })
        };
        rows.push(AblationRow {
            multi_view: flag(fields[0])?,
            consistency_weight: flag(fields[1])?,
            temporal_concat: flag(fields[2])?,
            descriptor_muap: num(fields[3])?,
            matching_muap: num(fields[4])?,
        });
    }
    Ok(rows)
}
