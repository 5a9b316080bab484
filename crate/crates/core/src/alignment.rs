//! Frame-to-frame similarity matrices and temporal network alignment.
//!
//! Above-threshold frame matches become graph nodes weighted by their
//! similarity; edges connect nodes whose frame indices strictly increase on
//! both axes by at most `max_step`. Strict index monotonicity makes the
//! graph acyclic even when multi-view rows repeat timestamps, so a single
//! dynamic-programming pass in lexicographic order finds the exact
//! maximum-weight path. Its endpoints localize the copied segment.

use std::collections::HashMap;

use ndarray::Array2;
use rayon::prelude::*;
use thiserror::Error;

use crate::retrieval::CandidatePair;
use crate::store::{Corpus, DescriptorSet};

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("query dim {query} does not match reference dim {reference}")]
    DimMismatch { query: usize, reference: usize },
    #[error("candidate references unknown video {video_id}")]
    UnknownVideo { video_id: String },
    #[error("invalid alignment config: {0}")]
    BadConfig(String),
    #[error("matches line {line}: {message}")]
    BadCsv { line: usize, message: String },
}

/// Dense inner products between one query's frames and one reference's
/// frames, with the time axes kept alongside.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub query_id: String,
    pub ref_id: String,
    pub q_times: Vec<f32>,
    pub r_times: Vec<f32>,
    pub values: Array2<f32>,
}

pub fn similarity_matrix(
    q: &DescriptorSet,
    r: &DescriptorSet,
) -> Result<SimilarityMatrix, AlignError> {
    if q.dim() != r.dim() {
        return Err(AlignError::DimMismatch {
            query: q.dim(),
            reference: r.dim(),
        });
    }
    Ok(SimilarityMatrix {
        query_id: q.video_id().to_string(),
        ref_id: r.video_id().to_string(),
        q_times: q.timestamps().to_vec(),
        r_times: r.timestamps().to_vec(),
        values: q.matrix().dot(&r.matrix().t()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentScoreMode {
    /// Sum of node similarities along the path.
    PathSum,
    /// Mean node similarity along the path.
    PathMean,
}

impl SegmentScoreMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SegmentScoreMode::PathSum => "sum",
            SegmentScoreMode::PathMean => "mean",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TnConfig {
    /// Minimum similarity for a frame pair to become a node.
    pub sim_threshold: f32,
    /// Maximum frame-index gap per axis for an edge.
    pub max_step: usize,
    /// Minimum path length (nodes) to report a segment.
    pub min_nodes: usize,
    /// Maximum segments reported per pair.
    pub max_segments: usize,
    /// Minimum path weight (node-similarity sum) to report a segment.
    pub min_path_score: f64,
    pub score_mode: SegmentScoreMode,
}

impl Default for TnConfig {
    fn default() -> Self {
        TnConfig {
            sim_threshold: 0.25,
            max_step: 5,
            min_nodes: 3,
            max_segments: 4,
            min_path_score: 1.0,
            score_mode: SegmentScoreMode::PathSum,
        }
    }
}

impl TnConfig {
    pub fn validate(&self) -> Result<(), AlignError> {
        if self.max_step == 0 {
            return Err(AlignError::BadConfig("max_step must be >= 1".into()));
        }
        if self.min_nodes < 2 {
            return Err(AlignError::BadConfig("min_nodes must be >= 2".into()));
        }
        if self.max_segments == 0 {
            return Err(AlignError::BadConfig("max_segments must be >= 1".into()));
        }
        if !self.sim_threshold.is_finite() {
            return Err(AlignError::BadConfig("sim_threshold must be finite".into()));
        }
        Ok(())
    }
}

/// A localized copied segment between one query and one reference.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentMatch {
    pub query_id: String,
    pub ref_id: String,
    pub q_start: f32,
    pub q_end: f32,
    pub r_start: f32,
    pub r_end: f32,
    pub score: f64,
}

/// Maximum-weight path over the alive nodes. Nodes are lexicographically
/// sorted (query index, then reference index); ties prefer the smaller
/// predecessor, so results are deterministic. Returns indices into `nodes`.
fn best_path(
    nodes: &[(usize, usize)],
    values: &Array2<f32>,
    max_step: usize,
) -> Option<(Vec<usize>, f64)> {
    if nodes.is_empty() {
        return None;
    }
    let index: HashMap<(usize, usize), usize> =
        nodes.iter().enumerate().map(|(k, &n)| (n, k)).collect();
    let mut dp = vec![0f64; nodes.len()];
    let mut parent: Vec<Option<usize>> = vec![None; nodes.len()];
    for (k, &(i, j)) in nodes.iter().enumerate() {
        let mut best: Option<(f64, usize)> = None;
        // Visit predecessors in ascending (i, j) so a strict improvement
        // test keeps the lexicographically smallest on ties.
        for pi in i.saturating_sub(max_step)..i {
            for pj in j.saturating_sub(max_step)..j {
                if let Some(&p) = index.get(&(pi, pj)) {
                    let w = dp[p];
                    if best.is_none_or(|(bw, _)| w > bw) {
                        best = Some((w, p));
                    }
                }
            }
        }
        let base = values[(i, j)] as f64;
        match best {
            Some((w, p)) => {
                dp[k] = base + w;
                parent[k] = Some(p);
            }
            None => dp[k] = base,
        }
    }
    let mut end = 0;
    for k in 1..nodes.len() {
        if dp[k] > dp[end] {
            end = k;
        }
    }
    let mut path = vec![end];
    while let Some(p) = parent[*path.last().expect("non-empty")] {
        path.push(p);
    }
    path.reverse();
    Some((path, dp[end]))
}

/// The single maximum-weight monotone path over the admitted nodes, as
/// (query index, reference index) pairs plus its weight. This is the core
/// step [`tn_align`] repeats; exposed for diagnostics and oracle checks.
pub fn tn_best_path(
    sim: &SimilarityMatrix,
    sim_threshold: f32,
    max_step: usize,
) -> Option<(Vec<(usize, usize)>, f64)> {
    let (n_q, n_r) = sim.values.dim();
    let nodes: Vec<(usize, usize)> = (0..n_q)
        .flat_map(|i| (0..n_r).map(move |j| (i, j)))
        .filter(|&(i, j)| sim.values[(i, j)] >= sim_threshold)
        .collect();
    let (path, weight) = best_path(&nodes, &sim.values, max_step)?;
    Some((path.into_iter().map(|k| nodes[k]).collect(), weight))
}

/// Extract copied segments from one similarity matrix. Repeatedly finds the
/// maximum-weight monotone path, reports it when it clears the length and
/// weight gates, and removes its query-frame and reference-frame indices
/// from the node pool before searching again.
pub fn tn_align(sim: &SimilarityMatrix, cfg: &TnConfig) -> Vec<SegmentMatch> {
    let (n_q, n_r) = sim.values.dim();
    let mut nodes: Vec<(usize, usize)> = Vec::new();
    for i in 0..n_q {
        for j in 0..n_r {
            if sim.values[(i, j)] >= cfg.sim_threshold {
                nodes.push((i, j));
            }
        }
    }

    let mut segments = Vec::new();
    while segments.len() < cfg.max_segments {
        let Some((path, weight)) = best_path(&nodes, &sim.values, cfg.max_step) else {
            break;
        };
        if weight < cfg.min_path_score {
            // Removing nodes only lowers the best achievable weight.
            break;
        }
        if path.len() >= cfg.min_nodes {
            let (qi0, rj0) = nodes[path[0]];
            let (qi1, rj1) = nodes[*path.last().expect("non-empty")];
            let score = match cfg.score_mode {
                SegmentScoreMode::PathSum => weight,
                SegmentScoreMode::PathMean => weight / path.len() as f64,
            };
            segments.push(SegmentMatch {
                query_id: sim.query_id.clone(),
                ref_id: sim.ref_id.clone(),
                q_start: sim.q_times[qi0],
                q_end: sim.q_times[qi1],
                r_start: sim.r_times[rj0],
                r_end: sim.r_times[rj1],
                score,
            });
        }
        let mut used_q = vec![false; n_q];
        let mut used_r = vec![false; n_r];
        for &k in &path {
            let (i, j) = nodes[k];
            used_q[i] = true;
            used_r[j] = true;
        }
        nodes.retain(|&(i, j)| !used_q[i] && !used_r[j]);
    }
    segments
}

/// Align every candidate pair and return all segments, sorted by descending
/// score (ties by ids and intervals, so merges are deterministic under any
/// parallel schedule). Corpora must be the post-processed descriptor sets.
pub fn pipeline_matching_track(
    candidates: &[CandidatePair],
    queries: &Corpus,
    refs: &Corpus,
    cfg: &TnConfig,
) -> Result<Vec<SegmentMatch>, AlignError> {
    cfg.validate()?;
    let pairs: Vec<(&DescriptorSet, &DescriptorSet)> = candidates
        .iter()
        .map(|c| {
            let q = queries.get(&c.query_id).ok_or_else(|| AlignError::UnknownVideo {
                video_id: c.query_id.clone(),
            })?;
            let r = refs.get(&c.ref_id).ok_or_else(|| AlignError::UnknownVideo {
                video_id: c.ref_id.clone(),
            })?;
            Ok((q, r))
        })
        .collect::<Result<Vec<_>, AlignError>>()?;
    let mut segments: Vec<SegmentMatch> = pairs
        .par_iter()
        .map(|(q, r)| {
            let sim = similarity_matrix(q, r)?;
            Ok(tn_align(&sim, cfg))
        })
        .collect::<Result<Vec<_>, AlignError>>()?
        .into_iter()
        .flatten()
        .collect();
    segments.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.query_id.cmp(&b.query_id))
            .then_with(|| a.ref_id.cmp(&b.ref_id))
            .then_with(|| a.q_start.total_cmp(&b.q_start))
            .then_with(|| a.r_start.total_cmp(&b.r_start))
    });
    Ok(segments)
}

/// Matches CSV: seconds with 3 decimals, score with 6.
pub fn matches_to_csv(matches: &[SegmentMatch]) -> String {
    let mut out = String::from("query_id,ref_id,query_start,query_end,ref_start,ref_end,score\n");
    for m in matches {
        out.push_str(&format!(
            "{},{},{:.3},{:.3},{:.3},{:.3},{:.6}\n",
            m.query_id, m.ref_id, m.q_start, m.q_end, m.r_start, m.r_end, m.score
        ));
    }
    out
}

pub fn parse_matches_csv(text: &str) -> Result<Vec<SegmentMatch>, AlignError> {
    let expected = "query_id,ref_id,query_start,query_end,ref_start,ref_end,score";
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == expected => {}
        Some((_, header)) => {
            return Err(AlignError::BadCsv {
                line: 1,
                message: format!("unexpected header {header:?}"),
            })
        }
        None => {
            return Err(AlignError::BadCsv {
                line: 1,
                message: "empty file".to_string(),
            })
        }
    }
    let mut out = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != 7 {
            return Err(AlignError::BadCsv {
                line,
                message: format!("expected 7 fields, got {}", fields.len()),
            });
        }
        let num = |s: &str| -> Result<f64, AlignError> {
            s.trim().parse().map_err(|_| AlignError::BadCsv {
                line,
                message: format!("bad number {s:?}"),
            })
        };
        out.push(SegmentMatch {
            query_id: fields[0].to_string(),
            ref_id: fields[1].to_string(),
            q_start: num(fields[2])? as f32,
            q_end: num(fields[3])? as f32,
            r_start: num(fields[4])? as f32,
            r_end: num(fields[5])? as f32,
            score: num(fields[6])?,
        });
    }
    Ok(out)
}
