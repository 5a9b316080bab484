//! C ABI for the vcdet video copy detection engine.
//!
//! Corpora, candidate lists, and match lists are opaque handles created and
//! freed by this library. Every fallible call returns a [`VcdetStatus`];
//! when a call fails, `vcdet_last_error_message` returns a thread-local,
//! NUL-terminated description of the failure. String pointers returned by
//! accessors stay valid until their owning handle is freed.
//!
//! The generated header lands in `include/vcdet.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use vcdet::alignment::{self, SegmentMatch, SegmentScoreMode, TnConfig};
use vcdet::evaluation::{self, GroundTruth};
use vcdet::postproc::{ScoreNormConfig, TemporalConcatConfig};
use vcdet::retrieval::{
    self, Aggregation, CandidatePair, DescriptorPipelineConfig, SearchConfig,
};
use vcdet::store::{self, Corpus, CorpusRole};
use vcdet::views::{parse_labels_csv, EditLabels, ViewStore};

/// Result of a vcdet call. Anything other than `Ok` leaves a description in
/// `vcdet_last_error_message`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VcdetStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// File could not be read or written.
    Io = 3,
    /// File contents violated a format or an invariant.
    Format = 4,
    /// A configuration value was rejected.
    InvalidConfig = 5,
    /// A pipeline stage failed.
    Pipeline = 6,
    /// Evaluation rejected its inputs.
    Eval = 7,
    /// An index was out of bounds.
    OutOfRange = 8,
    /// Internal panic; state may be inconsistent.
    Panic = 9,
}

/// Corpus role tag used when loading VDSC files.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VcdetRole {
    Query = 0,
    Reference = 1,
    Noise = 2,
}

impl From<VcdetRole> for CorpusRole {
    fn from(r: VcdetRole) -> Self {
        match r {
            VcdetRole::Query => CorpusRole::Query,
            VcdetRole::Reference => CorpusRole::Reference,
            VcdetRole::Noise => CorpusRole::Noise,
        }
    }
}

/// Video-pair score aggregation for the exhaustive search.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VcdetAggregation {
    MaxPair = 0,
    SumTopkPairs = 1,
}

/// Segment score reported by the temporal alignment.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VcdetScoreMode {
    PathSum = 0,
    PathMean = 1,
}

/// Descriptor-track configuration. `tc_window` must be odd; the window
/// weights default to the triangular profile for that window. A
/// `tc_output_dim` of zero keeps the input descriptor dimension.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct VcdetDescriptorOptions {
    pub multi_view: bool,
    pub consistency_weight: bool,
    pub weight_references: bool,
    pub temporal_concat: bool,
    pub weight_before_concat: bool,
    pub score_norm: bool,
    pub tc_window: u32,
    pub tc_output_dim: u32,
    pub rank_k: u32,
    pub beta: f64,
    pub top_k: u32,
    pub aggregation: VcdetAggregation,
    pub agg_k: u32,
}

/// Temporal-network alignment configuration.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct VcdetTnOptions {
    pub sim_threshold: f32,
    pub max_step: u32,
    pub min_nodes: u32,
    pub max_segments: u32,
    pub min_path_score: f64,
    pub score_mode: VcdetScoreMode,
}

/// Synthetic dataset configuration for `vcdet_generate`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct VcdetSimOptions {
    pub seed: u64,
    pub refs: u32,
    pub queries: u32,
    pub dim: u32,
    pub frames_min: u32,
    pub frames_max: u32,
    pub copy_fraction: f64,
    pub noise_sigma: f64,
    /// Nonzero: unedited queries shadow reference content (near duplicates).
    pub near_duplicate_distractors: bool,
    pub stack_fraction: f64,
}

/// Loaded descriptor corpus.
pub struct VcdetCorpus {
    inner: Corpus,
}

/// Ranked retrieval candidates.
pub struct VcdetCandidates {
    pairs: Vec<CandidatePair>,
    ids: Vec<(CString, CString)>,
}

impl VcdetCandidates {
    fn new(pairs: Vec<CandidatePair>) -> Self {
        let ids = pairs
            .iter()
            .map(|p| {
                (
                    CString::new(p.query_id.as_str()).unwrap_or_default(),
                    CString::new(p.ref_id.as_str()).unwrap_or_default(),
                )
            })
            .collect();
        VcdetCandidates { pairs, ids }
    }
}

/// Localized copied segments.
pub struct VcdetMatches {
    segments: Vec<SegmentMatch>,
    ids: Vec<(CString, CString)>,
}

impl VcdetMatches {
    fn new(segments: Vec<SegmentMatch>) -> Self {
        let ids = segments
            .iter()
            .map(|s| {
                (
                    CString::new(s.query_id.as_str()).unwrap_or_default(),
                    CString::new(s.ref_id.as_str()).unwrap_or_default(),
                )
            })
            .collect();
        VcdetMatches { segments, ids }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl std::fmt::Display) {
    let text = message.to_string().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(text).unwrap_or_default();
    });
}

/// Description of the most recent failure on this thread. Valid until the
/// next failing vcdet call on the same thread.
#[no_mangle]
pub extern "C" fn vcdet_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

fn guard(body: impl FnOnce() -> VcdetStatus) -> VcdetStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            VcdetStatus::Panic
        }
    }
}

unsafe fn path_arg(ptr: *const c_char) -> Result<PathBuf, VcdetStatus> {
    if ptr.is_null() {
        set_error("null path");
        return Err(VcdetStatus::NullPointer);
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => {
            set_error("path is not valid UTF-8");
            Err(VcdetStatus::InvalidUtf8)
        }
    }
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> VcdetStatus {
    if out.is_null() {
        set_error("null output pointer");
        return VcdetStatus::NullPointer;
    }
    *out = Box::into_raw(Box::new(value));
    VcdetStatus::Ok
}

macro_rules! try_ref {
    ($ptr:expr, $name:literal) => {
        match $ptr.as_ref() {
            Some(r) => r,
            None => {
                set_error(concat!("null ", $name));
                return VcdetStatus::NullPointer;
            }
        }
    };
}

/// Load a VDSC corpus from `path` under the given role.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid location for a
/// handle pointer. The returned handle must be freed with
/// `vcdet_corpus_free`.
#[no_mangle]
pub unsafe extern "C" fn vcdet_corpus_read(
    path: *const c_char,
    role: VcdetRole,
    out: *mut *mut VcdetCorpus,
) -> VcdetStatus {
    guard(|| {
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match store::read_corpus(&path, role.into()) {
            Ok(inner) => write_out(out, VcdetCorpus { inner }),
            Err(e @ store::StoreError::Io(_)) => {
                set_error(e);
                VcdetStatus::Io
            }
            Err(e) => {
                set_error(e);
                VcdetStatus::Format
            }
        }
    })
}

/// Write a corpus back out in the VDSC format.
///
/// # Safety
/// `corpus` must be a live handle from this library; `path` must be a
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn vcdet_corpus_write(
    corpus: *const VcdetCorpus,
    path: *const c_char,
) -> VcdetStatus {
    guard(|| {
        let corpus = try_ref!(corpus, "corpus");
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match store::write_corpus(&corpus.inner, &path) {
            Ok(()) => VcdetStatus::Ok,
            Err(e) => {
                set_error(e);
                VcdetStatus::Io
            }
        }
    })
}

/// # Safety
/// `corpus` must be a handle from this library, not yet freed; null is a
/// no-op.
#[no_mangle]
pub unsafe extern "C" fn vcdet_corpus_free(corpus: *mut VcdetCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Number of videos in the corpus; 0 for null.
///
/// # Safety
/// `corpus` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vcdet_corpus_video_count(corpus: *const VcdetCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.inner.len())
}

/// Shared descriptor dimension; -1 for null or empty corpora.
///
/// # Safety
/// `corpus` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vcdet_corpus_dim(corpus: *const VcdetCorpus) -> i32 {
    corpus
        .as_ref()
        .and_then(|c| c.inner.dim())
        .map_or(-1, |d| d as i32)
}

/// Defaults mirroring the CLI: search keeps the top 1200 candidates by
/// max-pair aggregation, temporal concat uses a 3-frame triangular window,
/// score normalization subtracts the 10th noise neighbor at strength 1.
#[no_mangle]
pub extern "C" fn vcdet_descriptor_options_default() -> VcdetDescriptorOptions {
    VcdetDescriptorOptions {
        multi_view: false,
        consistency_weight: false,
        weight_references: false,
        temporal_concat: false,
        weight_before_concat: false,
        score_norm: false,
        tc_window: 3,
        tc_output_dim: 0,
        rank_k: 10,
        beta: 1.0,
        top_k: 1200,
        aggregation: VcdetAggregation::MaxPair,
        agg_k: 5,
    }
}

fn pipeline_config(opts: &VcdetDescriptorOptions) -> Result<DescriptorPipelineConfig, String> {
    let mut concat = TemporalConcatConfig::triangular(opts.tc_window as usize);
    if opts.tc_output_dim > 0 {
        concat.output_dim = Some(opts.tc_output_dim as usize);
    }
    concat.validate().map_err(|e| e.to_string())?;
    let score_norm_cfg = ScoreNormConfig {
        rank_k: opts.rank_k as usize,
        beta: opts.beta,
    };
    score_norm_cfg.validate().map_err(|e| e.to_string())?;
    let search = SearchConfig {
        top_k: opts.top_k as usize,
        aggregation: match opts.aggregation {
            VcdetAggregation::MaxPair => Aggregation::MaxPair,
            VcdetAggregation::SumTopkPairs => Aggregation::SumTopkPairs,
        },
        agg_k: opts.agg_k as usize,
    };
    search.validate().map_err(|e| e.to_string())?;
    Ok(DescriptorPipelineConfig {
        multi_view: opts.multi_view,
        consistency_weight: opts.consistency_weight,
        weight_references: opts.weight_references,
        temporal_concat: opts.temporal_concat,
        concat,
        weight_before_concat: opts.weight_before_concat,
        score_norm: opts.score_norm,
        score_norm_cfg,
        search,
    })
}

/// Run the descriptor track. `views` and `labels_csv_path` may be null when
/// multi-view is off (or to fall back to full frames and stub labels).
/// On success `out_candidates` receives the ranked candidates and, when
/// non-null, `out_queries`/`out_refs` receive the post-processed corpora.
///
/// # Safety
/// Handles must be live; paths NUL-terminated; out pointers valid. Returned
/// handles must be freed with their respective free functions.
#[no_mangle]
pub unsafe extern "C" fn vcdet_descriptor_run(
    queries: *const VcdetCorpus,
    views: *const VcdetCorpus,
    labels_csv_path: *const c_char,
    refs: *const VcdetCorpus,
    noise: *const VcdetCorpus,
    opts: VcdetDescriptorOptions,
    out_candidates: *mut *mut VcdetCandidates,
    out_queries: *mut *mut VcdetCorpus,
    out_refs: *mut *mut VcdetCorpus,
) -> VcdetStatus {
    guard(|| {
        let queries = try_ref!(queries, "queries");
        let refs = try_ref!(refs, "refs");
        let noise = try_ref!(noise, "noise");
        let cfg = match pipeline_config(&opts) {
            Ok(c) => c,
            Err(e) => {
                set_error(e);
                return VcdetStatus::InvalidConfig;
            }
        };
        let view_store = match views.as_ref() {
            None => None,
            Some(v) => match ViewStore::from_corpus(&v.inner) {
                Ok(store) => Some(store),
                Err(e) => {
                    set_error(e);
                    return VcdetStatus::Format;
                }
            },
        };
        let labels: Vec<EditLabels> = if labels_csv_path.is_null() {
            Vec::new()
        } else {
            let path = match path_arg(labels_csv_path) {
                Ok(p) => p,
                Err(s) => return s,
            };
            let text = match std::fs::read_to_string(&path) {
                Ok(t) => t,
                Err(e) => {
                    set_error(e);
                    return VcdetStatus::Io;
                }
            };
            match parse_labels_csv(&text) {
                Ok(l) => l,
                Err(e) => {
                    set_error(e);
                    return VcdetStatus::Format;
                }
            }
        };
        let out = match retrieval::pipeline_descriptor_track(
            &queries.inner,
            view_store.as_ref(),
            &labels,
            &refs.inner,
            &noise.inner,
            &cfg,
        ) {
            Ok(o) => o,
            Err(e) => {
                set_error(e);
                return VcdetStatus::Pipeline;
            }
        };
        let flat: Vec<CandidatePair> = out.candidates.iter().flatten().cloned().collect();
        if !out_queries.is_null() {
            let status = write_out(out_queries, VcdetCorpus { inner: out.queries });
            if status != VcdetStatus::Ok {
                return status;
            }
        }
        if !out_refs.is_null() {
            let status = write_out(out_refs, VcdetCorpus { inner: out.refs });
            if status != VcdetStatus::Ok {
                return status;
            }
        }
        write_out(out_candidates, VcdetCandidates::new(flat))
    })
}

/// # Safety
/// `candidates` must be a handle from this library, not yet freed; null is
/// a no-op.
#[no_mangle]
pub unsafe extern "C" fn vcdet_candidates_free(candidates: *mut VcdetCandidates) {
    if !candidates.is_null() {
        drop(Box::from_raw(candidates));
    }
}

/// # Safety
/// `candidates` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vcdet_candidates_len(candidates: *const VcdetCandidates) -> usize {
    candidates.as_ref().map_or(0, |c| c.pairs.len())
}

/// Query id of candidate `index`; null when out of range. The pointer stays
/// valid until the handle is freed.
///
/// # Safety
/// `candidates` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vcdet_candidates_query_id(
    candidates: *const VcdetCandidates,
    index: usize,
) -> *const c_char {
    candidates
        .as_ref()
        .and_then(|c| c.ids.get(index))
        .map_or(std::ptr::null(), |(q, _)| q.as_ptr())
}

/// Reference id of candidate `index`; null when out of range.
///
/// # Safety
/// `candidates` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vcdet_candidates_ref_id(
    candidates: *const VcdetCandidates,
    index: usize,
) -> *const c_char {
    candidates
        .as_ref()
        .and_then(|c| c.ids.get(index))
        .map_or(std::ptr::null(), |(_, r)| r.as_ptr())
}

/// Score of candidate `index`; NaN when out of range.
///
/// # Safety
/// `candidates` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vcdet_candidates_score(
    candidates: *const VcdetCandidates,
    index: usize,
) -> f64 {
    candidates
        .as_ref()
        .and_then(|c| c.pairs.get(index))
        .map_or(f64::NAN, |p| p.score)
}

/// Write candidates as the `query_id,ref_id,score` CSV.
///
/// # Safety
/// `candidates` must be a live handle; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn vcdet_candidates_write_csv(
    candidates: *const VcdetCandidates,
    path: *const c_char,
) -> VcdetStatus {
    guard(|| {
        let candidates = try_ref!(candidates, "candidates");
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        // One flat group per query is already rank-ordered; regroup to keep
        // the CSV contract of the CLI.
        let mut grouped: Vec<Vec<CandidatePair>> = Vec::new();
        for pair in &candidates.pairs {
            match grouped.last_mut() {
                Some(g) if g[0].query_id == pair.query_id => g.push(pair.clone()),
                _ => grouped.push(vec![pair.clone()]),
            }
        }
        match std::fs::write(&path, retrieval::candidates_to_csv(&grouped)) {
            Ok(()) => VcdetStatus::Ok,
            Err(e) => {
                set_error(e);
                VcdetStatus::Io
            }
        }
    })
}

/// Load candidates from a `query_id,ref_id,score` CSV.
///
/// # Safety
/// `path` must be NUL-terminated; `out` a valid location. Free the handle
/// with `vcdet_candidates_free`.
#[no_mangle]
pub unsafe extern "C" fn vcdet_candidates_read_csv(
    path: *const c_char,
    out: *mut *mut VcdetCandidates,
) -> VcdetStatus {
    guard(|| {
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) => {
                set_error(e);
                return VcdetStatus::Io;
            }
        };
        match retrieval::parse_candidates_csv(&text) {
            Ok(pairs) => write_out(out, VcdetCandidates::new(pairs)),
            Err(e) => {
                set_error(e);
                VcdetStatus::Format
            }
        }
    })
}

/// Defaults mirroring the CLI alignment flags.
#[no_mangle]
pub extern "C" fn vcdet_tn_options_default() -> VcdetTnOptions {
    VcdetTnOptions {
        sim_threshold: 0.25,
        max_step: 5,
        min_nodes: 3,
        max_segments: 4,
        min_path_score: 1.0,
        score_mode: VcdetScoreMode::PathSum,
    }
}

/// Localize copied segments for every candidate pair. `queries` and `refs`
/// must be the post-processed corpora from `vcdet_descriptor_run`.
///
/// # Safety
/// Handles must be live; `out` a valid location. Free the result with
/// `vcdet_matches_free`.
#[no_mangle]
pub unsafe extern "C" fn vcdet_match_run(
    candidates: *const VcdetCandidates,
    queries: *const VcdetCorpus,
    refs: *const VcdetCorpus,
    opts: VcdetTnOptions,
    out: *mut *mut VcdetMatches,
) -> VcdetStatus {
    guard(|| {
        let candidates = try_ref!(candidates, "candidates");
        let queries = try_ref!(queries, "queries");
        let refs = try_ref!(refs, "refs");
        let cfg = TnConfig {
            sim_threshold: opts.sim_threshold,
            max_step: opts.max_step as usize,
            min_nodes: opts.min_nodes as usize,
            max_segments: opts.max_segments as usize,
            min_path_score: opts.min_path_score,
            score_mode: match opts.score_mode {
                VcdetScoreMode::PathSum => SegmentScoreMode::PathSum,
                VcdetScoreMode::PathMean => SegmentScoreMode::PathMean,
            },
        };
        if let Err(e) = cfg.validate() {
            set_error(e);
            return VcdetStatus::InvalidConfig;
        }
        match alignment::pipeline_matching_track(
            &candidates.pairs,
            &queries.inner,
            &refs.inner,
            &cfg,
        ) {
            Ok(segments) => write_out(out, VcdetMatches::new(segments)),
            Err(e) => {
                set_error(e);
                VcdetStatus::Pipeline
            }
        }
    })
}

/// # Safety
/// `matches` must be a handle from this library, not yet freed; null is a
/// no-op.
#[no_mangle]
pub unsafe extern "C" fn vcdet_matches_free(matches: *mut VcdetMatches) {
    if !matches.is_null() {
        drop(Box::from_raw(matches));
    }
}

/// # Safety
/// `matches` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vcdet_matches_len(matches: *const VcdetMatches) -> usize {
    matches.as_ref().map_or(0, |m| m.segments.len())
}

/// Query id of match `index`; null when out of range.
///
/// # Safety
/// `matches` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vcdet_matches_query_id(
    matches: *const VcdetMatches,
    index: usize,
) -> *const c_char {
    matches
        .as_ref()
        .and_then(|m| m.ids.get(index))
        .map_or(std::ptr::null(), |(q, _)| q.as_ptr())
}

/// Reference id of match `index`; null when out of range.
///
/// # Safety
/// `matches` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vcdet_matches_ref_id(
    matches: *const VcdetMatches,
    index: usize,
) -> *const c_char {
    matches
        .as_ref()
        .and_then(|m| m.ids.get(index))
        .map_or(std::ptr::null(), |(_, r)| r.as_ptr())
}

/// Interval of match `index` in seconds. Out pointers may be null to skip a
/// field.
///
/// # Safety
/// `matches` must be a live handle; non-null out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn vcdet_matches_interval(
    matches: *const VcdetMatches,
    index: usize,
    q_start: *mut f32,
    q_end: *mut f32,
    r_start: *mut f32,
    r_end: *mut f32,
) -> VcdetStatus {
    guard(|| {
        let matches = try_ref!(matches, "matches");
        let Some(seg) = matches.segments.get(index) else {
            set_error(format!("index {index} out of range"));
            return VcdetStatus::OutOfRange;
        };
        if !q_start.is_null() {
            *q_start = seg.q_start;
        }
        if !q_end.is_null() {
            *q_end = seg.q_end;
        }
        if !r_start.is_null() {
            *r_start = seg.r_start;
        }
        if !r_end.is_null() {
            *r_end = seg.r_end;
        }
        VcdetStatus::Ok
    })
}

/// Score of match `index`; NaN when out of range.
///
/// # Safety
/// `matches` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vcdet_matches_score(matches: *const VcdetMatches, index: usize) -> f64 {
    matches
        .as_ref()
        .and_then(|m| m.segments.get(index))
        .map_or(f64::NAN, |s| s.score)
}

/// Write matches as the seven-column matches CSV.
///
/// # Safety
/// `matches` must be a live handle; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn vcdet_matches_write_csv(
    matches: *const VcdetMatches,
    path: *const c_char,
) -> VcdetStatus {
    guard(|| {
        let matches = try_ref!(matches, "matches");
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match std::fs::write(&path, alignment::matches_to_csv(&matches.segments)) {
            Ok(()) => VcdetStatus::Ok,
            Err(e) => {
                set_error(e);
                VcdetStatus::Io
            }
        }
    })
}

fn load_gt(path: &Path) -> Result<GroundTruth, (VcdetStatus, String)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| (VcdetStatus::Io, e.to_string()))?;
    GroundTruth::parse_csv(&text).map_err(|e| (VcdetStatus::Format, e.to_string()))
}

/// Descriptor-track micro average precision of `candidates` against the
/// ground-truth CSV at `gt_csv_path`.
///
/// # Safety
/// `candidates` must be a live handle; `gt_csv_path` NUL-terminated; `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn vcdet_descriptor_muap(
    candidates: *const VcdetCandidates,
    gt_csv_path: *const c_char,
    out: *mut f64,
) -> VcdetStatus {
    guard(|| {
        let candidates = try_ref!(candidates, "candidates");
        if out.is_null() {
            set_error("null output pointer");
            return VcdetStatus::NullPointer;
        }
        let path = match path_arg(gt_csv_path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let gt = match load_gt(&path) {
            Ok(g) => g,
            Err((status, msg)) => {
                set_error(msg);
                return status;
            }
        };
        match evaluation::descriptor_muap(&candidates.pairs, &gt) {
            Ok(v) => {
                *out = v;
                VcdetStatus::Ok
            }
            Err(e) => {
                set_error(e);
                VcdetStatus::Eval
            }
        }
    })
}

/// Matching-track micro average precision of `matches` against the
/// ground-truth CSV at `gt_csv_path`.
///
/// # Safety
/// `matches` must be a live handle; `gt_csv_path` NUL-terminated; `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn vcdet_matching_muap(
    matches: *const VcdetMatches,
    gt_csv_path: *const c_char,
    out: *mut f64,
) -> VcdetStatus {
    guard(|| {
        let matches = try_ref!(matches, "matches");
        if out.is_null() {
            set_error("null output pointer");
            return VcdetStatus::NullPointer;
        }
        let path = match path_arg(gt_csv_path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let gt = match load_gt(&path) {
            Ok(g) => g,
            Err((status, msg)) => {
                set_error(msg);
                return status;
            }
        };
        match evaluation::matching_muap(&matches.segments, &gt) {
            Ok(v) => {
                *out = v;
                VcdetStatus::Ok
            }
            Err(e) => {
                set_error(e);
                VcdetStatus::Eval
            }
        }
    })
}

/// Defaults mirroring the CLI `gen` flags.
#[no_mangle]
pub extern "C" fn vcdet_sim_options_default() -> VcdetSimOptions {
    VcdetSimOptions {
        seed: 42,
        refs: 50,
        queries: 20,
        dim: 64,
        frames_min: 24,
        frames_max: 48,
        copy_fraction: 0.5,
        noise_sigma: 0.2,
        near_duplicate_distractors: true,
        stack_fraction: 0.0,
    }
}

/// Generate a synthetic dataset into `out_dir`: VDSC corpora, ground-truth
/// and edit-label CSVs, and a run manifest, exactly like `vcdet gen`.
///
/// # Safety
/// `out_dir` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn vcdet_generate(
    opts: VcdetSimOptions,
    out_dir: *const c_char,
) -> VcdetStatus {
    guard(|| {
        let out = match path_arg(out_dir) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let args = vcdet::cli::GenArgs {
            seed: opts.seed,
            refs: opts.refs as usize,
            queries: opts.queries as usize,
            dim: opts.dim as usize,
            frames_min: opts.frames_min as usize,
            frames_max: opts.frames_max as usize,
            copy_fraction: opts.copy_fraction,
            noise_sigma: opts.noise_sigma,
            distractor_mode: if opts.near_duplicate_distractors {
                vcdet::cli::DistractorModeArg::NearDuplicate
            } else {
                vcdet::cli::DistractorModeArg::Random
            },
            stack_fraction: opts.stack_fraction,
            out,
        };
        match vcdet::cli::run_gen(&args) {
            Ok(()) => VcdetStatus::Ok,
            Err(e) => {
                set_error(format!("{e:#}"));
                VcdetStatus::Pipeline
            }
        }
    })
}
