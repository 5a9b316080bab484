//! Exhaustive frame-level inner-product search and the descriptor-track
//! pipeline.
//!
//! Every (query video, reference video) pair is scored by aggregating the
//! frame-pair inner products of its similarity block; the top-k references
//! per query survive as candidates. The block products are evaluated one
//! video pair at a time, so memory stays bounded by the largest single
//! block while matrix multiplication does the heavy lifting.

use std::collections::HashMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::postproc::{
    self, consistency_weight, l2_normalize, ConsistencyStats, PostprocError, ScoreNormConfig,
    TemporalConcatConfig,
};
use crate::pca::{pca_fit, PcaError, PcaModel};
use crate::store::{Corpus, CorpusRole, DescriptorSet, StoreError};
use crate::views::{merge_views, route_scheme, EditLabel, EditLabels, ViewStore, ViewsError};

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("query corpus is empty")]
    EmptyQueries,
    #[error("reference corpus is empty")]
    EmptyRefs,
    #[error("query dim {query} does not match reference dim {reference}")]
    DimMismatch { query: usize, reference: usize },
    #[error("invalid search config: {0}")]
    BadConfig(String),
    #[error("candidates line {line}: {message}")]
    BadCsv { line: usize, message: String },
}

/// Stage-attributed error for the composed descriptor pipeline.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("multi-view stage: {0}")]
    MultiView(#[source] ViewsError),
    #[error("normalize stage: {0}")]
    Normalize(#[source] PostprocError),
    #[error("temporal-concat stage: {0}")]
    TemporalConcat(#[source] PostprocError),
    #[error("temporal-concat pca fit: {0}")]
    PcaFit(#[source] PcaError),
    #[error("search stage: {0}")]
    Search(#[source] RetrievalError),
    #[error("score-norm stage: {0}")]
    ScoreNorm(#[source] PostprocError),
    #[error("store: {0}")]
    Store(#[from] StoreError),
}

/// One scored retrieval candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePair {
    pub query_id: String,
    pub ref_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    /// Maximum over all query-frame x reference-frame inner products.
    MaxPair,
    /// Sum of the `agg_k` largest frame-pair products.
    SumTopkPairs,
}

impl Aggregation {
    pub fn as_str(self) -> &'static str {
        match self {
            Aggregation::MaxPair => "max_pair",
            Aggregation::SumTopkPairs => "sum_topk_pairs",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    /// Candidates kept per query.
    pub top_k: usize,
    pub aggregation: Aggregation,
    /// Pairs summed under [`Aggregation::SumTopkPairs`].
    pub agg_k: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            top_k: 1200,
            aggregation: Aggregation::MaxPair,
            agg_k: 5,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), RetrievalError> {
        if self.top_k == 0 {
            return Err(RetrievalError::BadConfig("top_k must be >= 1".into()));
        }
        if self.agg_k == 0 {
            return Err(RetrievalError::BadConfig("agg_k must be >= 1".into()));
        }
        Ok(())
    }
}

fn aggregate_block(block: &ndarray::Array2<f32>, cfg: &SearchConfig) -> f64 {
    match cfg.aggregation {
        Aggregation::MaxPair => block
            .iter()
            .fold(f32::NEG_INFINITY, |acc, &v| acc.max(v)) as f64,
        Aggregation::SumTopkPairs => {
            let mut values: Vec<f32> = block.iter().copied().collect();
            let k = cfg.agg_k.min(values.len());
            let split = values.len() - k;
            values.select_nth_unstable_by(split, |a, b| a.total_cmp(b));
            let mut top: Vec<f32> = values[split..].to_vec();
            top.sort_by(|a, b| b.total_cmp(a));
            top.iter().map(|&v| v as f64).sum()
        }
    }
}

/// Score one query video against every reference video, ranked descending
/// with ties broken by ascending reference id.
fn search_one(
    query: &DescriptorSet,
    refs: &Corpus,
    cfg: &SearchConfig,
) -> Vec<CandidatePair> {
    let mut scored: Vec<CandidatePair> = refs
        .iter()
        .map(|r| {
            let block = query.matrix().dot(&r.matrix().t());
            CandidatePair {
                query_id: query.video_id().to_string(),
                ref_id: r.video_id().to_string(),
                score: aggregate_block(&block, cfg),
            }
        })
        .collect();
    scored.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.ref_id.cmp(&b.ref_id))
    });
    scored.truncate(cfg.top_k);
    scored
}

/// Rank every reference for every query by aggregated frame-pair products.
/// Returns one ranked list per query, in corpus order.
pub fn exhaustive_search(
    queries: &Corpus,
    refs: &Corpus,
    cfg: &SearchConfig,
) -> Result<Vec<Vec<CandidatePair>>, RetrievalError> {
    cfg.validate()?;
    if queries.is_empty() {
        return Err(RetrievalError::EmptyQueries);
    }
    if refs.is_empty() {
        return Err(RetrievalError::EmptyRefs);
    }
    let (qd, rd) = (queries.dim().unwrap(), refs.dim().unwrap());
    if qd != rd {
        return Err(RetrievalError::DimMismatch {
            query: qd,
            reference: rd,
        });
    }
    let query_sets: Vec<&DescriptorSet> = queries.iter().collect();
    Ok(query_sets
        .par_iter()
        .map(|q| search_one(q, refs, cfg))
        .collect())
}

/// Full configuration of the descriptor track.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DescriptorPipelineConfig {
    /// Merge per-view descriptor sets for queries routed to a multi-crop
    /// scheme by their edit labels.
    pub multi_view: bool,
    pub consistency_weight: bool,
    /// Also weight reference videos (off by default: references are unedited
    /// by construction, the weighting targets copied-query structure).
    pub weight_references: bool,
    pub temporal_concat: bool,
    pub concat: TemporalConcatConfig,
    /// Apply consistency weighting before temporal concat instead of after.
    pub weight_before_concat: bool,
    pub score_norm: bool,
    pub score_norm_cfg: ScoreNormConfig,
    pub search: SearchConfig,
}

#[derive(Debug)]
pub struct DescriptorTrackOutput {
    /// Post-processed query corpus, one merged set per query.
    pub queries: Corpus,
    /// Post-processed reference corpus.
    pub refs: Corpus,
    /// Ranked candidates per query, aligned with `queries` order.
    pub candidates: Vec<Vec<CandidatePair>>,
    /// Consistency-weighting stats per weighted video.
    pub stats: Vec<(String, ConsistencyStats)>,
    /// PCA model fitted for temporal concat, when that stage ran.
    pub pca: Option<PcaModel>,
}

fn normalize_corpus(corpus: &Corpus) -> Result<Corpus, PostprocError> {
    let sets = corpus
        .iter()
        .map(l2_normalize)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Corpus::from_sets(corpus.role(), sets).expect("normalization keeps ids and dims"))
}

fn concat_corpus(
    corpus: &Corpus,
    cfg: &TemporalConcatConfig,
    pca: &PcaModel,
) -> Result<Corpus, PostprocError> {
    let sets: Vec<DescriptorSet> = corpus
        .iter()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|s| postproc::temporal_concat(s, cfg, pca))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Corpus::from_sets(corpus.role(), sets).expect("concat keeps ids and frame counts"))
}

/// The sets that make up one query video: the full-frame set alone, or the
/// views its routed crop scheme merges.
struct QueryBundle {
    sets: Vec<DescriptorSet>,
}

impl QueryBundle {
    fn merged(&self) -> Result<DescriptorSet, ViewsError> {
        merge_views(&self.sets)
    }
}

/// Pick each query's view sets per its routed crop scheme. Queries without
/// stored views (or routed to the full frame) keep their full-frame set.
/// Missing labels fall back to `other`, the catch-all scheme.
fn route_query_bundles(
    queries: &Corpus,
    views: Option<&ViewStore>,
    labels: &[EditLabels],
) -> Vec<QueryBundle> {
    let label_map: HashMap<&str, &EditLabels> = labels
        .iter()
        .map(|l| (l.video_id.as_str(), l))
        .collect();
    queries
        .iter()
        .map(|q| {
            let wanted = match label_map.get(q.video_id()) {
                Some(l) => route_scheme(l).view_count(),
                None => route_scheme(&EditLabels::new(
                    q.video_id().to_string(),
                    [EditLabel::Other],
                ))
                .view_count(),
            };
            let sets = match views.and_then(|v| v.get(q.video_id())) {
                Some(stored) if wanted > 1 => stored[..wanted.min(stored.len())].to_vec(),
                _ => vec![q.clone()],
            };
            QueryBundle { sets }
        })
        .collect()
}

/// Run the descriptor track: normalization, per-view temporal concat,
/// multi-view merge, consistency weighting, exhaustive search, score
/// normalization. Each stage honors its enable flag. Temporal windows are
/// built per view before merging so they never straddle crop views.
pub fn pipeline_descriptor_track(
    queries: &Corpus,
    views: Option<&ViewStore>,
    labels: &[EditLabels],
    refs: &Corpus,
    noise: &Corpus,
    cfg: &DescriptorPipelineConfig,
) -> Result<DescriptorTrackOutput, PipelineError> {
    let mut bundles = if cfg.multi_view {
        route_query_bundles(queries, views, labels)
    } else {
        queries
            .iter()
            .map(|q| QueryBundle { sets: vec![q.clone()] })
            .collect()
    };

    for bundle in bundles.iter_mut() {
        for set in bundle.sets.iter_mut() {
            *set = l2_normalize(set).map_err(PipelineError::Normalize)?;
        }
    }
    let mut r = normalize_corpus(refs).map_err(PipelineError::Normalize)?;
    let mut noise_proc = if cfg.score_norm {
        Some(normalize_corpus(noise).map_err(PipelineError::Normalize)?)
    } else {
        None
    };

    let mut stats = Vec::new();
    // Weighting before concat divides the raw descriptors instead of the
    // final ones; the divisor still comes from the whole (merged) video.
    if cfg.consistency_weight && cfg.weight_before_concat {
        for bundle in bundles.iter_mut() {
            let merged = bundle.merged().map_err(PipelineError::MultiView)?;
            let (_, st) = consistency_weight(&merged);
            let divisor = st.divisor();
            stats.push((merged.video_id().to_string(), st));
            for set in bundle.sets.iter_mut() {
                let scaled = set.matrix().mapv(|v| ((v as f64) / divisor) as f32);
                *set = set.with_matrix(scaled)?;
            }
        }
        if cfg.weight_references {
            let sets: Vec<DescriptorSet> = r
                .iter()
                .map(|s| {
                    let (weighted, st) = consistency_weight(s);
                    stats.push((s.video_id().to_string(), st));
                    weighted
                })
                .collect();
            r = Corpus::from_sets(CorpusRole::Reference, sets).expect("weighting keeps ids");
        }
    }

    let mut pca_model = None;
    if cfg.temporal_concat {
        let concat_cfg = TemporalConcatConfig {
            output_dim: Some(
                cfg.concat
                    .output_dim
                    .unwrap_or_else(|| r.dim().unwrap_or(1)),
            ),
            ..cfg.concat.clone()
        };
        concat_cfg
            .validate()
            .map_err(PipelineError::TemporalConcat)?;
        // Fit on the reference corpus's windows: references are the unedited
        // distribution and fixing the basis there avoids query-set leakage.
        let d = r.dim().unwrap_or(0);
        let total: usize = r.total_frames();
        let mut samples = ndarray::Array2::zeros((total, concat_cfg.window * d));
        let mut row = 0;
        for set in r.iter() {
            let w = postproc::concat_windows(set, &concat_cfg);
            samples
                .slice_mut(ndarray::s![row..row + w.nrows(), ..])
                .assign(&w);
            row += w.nrows();
        }
        let k = concat_cfg.output_dim.expect("set above");
        let pca = pca_fit(samples.view(), k).map_err(PipelineError::PcaFit)?;
        let processed: Vec<Vec<DescriptorSet>> = bundles
            .par_iter()
            .map(|bundle| {
                bundle
                    .sets
                    .iter()
                    .map(|s| postproc::temporal_concat(s, &concat_cfg, &pca))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(PipelineError::TemporalConcat)?;
        for (bundle, sets) in bundles.iter_mut().zip(processed) {
            bundle.sets = sets;
        }
        r = concat_corpus(&r, &concat_cfg, &pca).map_err(PipelineError::TemporalConcat)?;
        if let Some(n) = noise_proc.take() {
            noise_proc =
                Some(concat_corpus(&n, &concat_cfg, &pca).map_err(PipelineError::TemporalConcat)?);
        }
        pca_model = Some(pca);
    }

    let mut merged_sets = Vec::with_capacity(bundles.len());
    for bundle in &bundles {
        merged_sets.push(bundle.merged().map_err(PipelineError::MultiView)?);
    }
    let mut q = Corpus::from_sets(CorpusRole::Query, merged_sets)
        .expect("ids unique in source corpus");

    if cfg.consistency_weight && !cfg.weight_before_concat {
        let sets: Vec<DescriptorSet> = q
            .iter()
            .map(|s| {
                let (weighted, st) = consistency_weight(s);
                stats.push((s.video_id().to_string(), st));
                weighted
            })
            .collect();
        q = Corpus::from_sets(CorpusRole::Query, sets).expect("weighting keeps ids");
        if cfg.weight_references {
            let sets: Vec<DescriptorSet> = r
                .iter()
                .map(|s| {
                    let (weighted, st) = consistency_weight(s);
                    stats.push((s.video_id().to_string(), st));
                    weighted
                })
                .collect();
            r = Corpus::from_sets(CorpusRole::Reference, sets).expect("weighting keeps ids");
        }
    }

    let mut candidates =
        exhaustive_search(&q, &r, &cfg.search).map_err(PipelineError::Search)?;

    if cfg.score_norm {
        let noise_proc = noise_proc.expect("processed when score_norm is on");
        let query_sets: Vec<&DescriptorSet> = q.iter().collect();
        let baselines: Vec<f64> = query_sets
            .par_iter()
            .map(|qs| postproc::noise_baseline(qs, &noise_proc, &cfg.score_norm_cfg))
            .collect::<Result<Vec<_>, _>>()
            .map_err(PipelineError::ScoreNorm)?;
        for (list, baseline) in candidates.iter_mut().zip(baselines) {
            for pair in list.iter_mut() {
                pair.score -= cfg.score_norm_cfg.beta * baseline;
            }
        }
    }

    Ok(DescriptorTrackOutput {
        queries: q,
        refs: r,
        candidates,
        stats,
        pca: pca_model,
    })
}

/// Candidate CSV: `query_id,ref_id,score`, six decimals, rows grouped by
/// query (queries sorted by id) in rank order.
pub fn candidates_to_csv(per_query: &[Vec<CandidatePair>]) -> String {
    let mut groups: Vec<&Vec<CandidatePair>> = per_query.iter().collect();
    groups.sort_by(|a, b| {
        let a_id = a.first().map(|p| p.query_id.as_str()).unwrap_or("");
        let b_id = b.first().map(|p| p.query_id.as_str()).unwrap_or("");
        a_id.cmp(b_id)
    });
    let mut out = String::from("query_id,ref_id,score\n");
    for group in groups {
        for p in group {
            out.push_str(&format!("{},{},{:.6}\n", p.query_id, p.ref_id, p.score));
        }
    }
    out
}

pub fn parse_candidates_csv(text: &str) -> Result<Vec<CandidatePair>, RetrievalError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "query_id,ref_id,score" => {}
        Some((_, header)) => {
            return Err(RetrievalError::BadCsv {
                line: 1,
                message: format!("unexpected header {header:?}"),
            })
        }
        None => {
            return Err(RetrievalError::BadCsv {
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
        let mut fields = raw.split(',');
        let (Some(query_id), Some(ref_id), Some(score), None) = (
            fields.next(),
            fields.next(),
            fields.next(),
            fields.next(),
        ) else {
            return Err(RetrievalError::BadCsv {
                line,
                message: "expected 3 fields".to_string(),
            });
        };
        let score: f64 = score.trim().parse().map_err(|_| RetrievalError::BadCsv {
            line,
            message: format!("bad score {score:?}"),
        })?;
        out.push(CandidatePair {
            query_id: query_id.to_string(),
            ref_id: ref_id.to_string(),
            score,
        });
    }
    Ok(out)
}
