//! Descriptor post-processing: L2 normalization, consistency weighting,
//! temporal concatenation, and score normalization.
//!
//! Consistency weighting divides a video's descriptor matrix by the mean of
//! its frame Gram matrix. Videos whose frames agree less (an inserted clip
//! forces a scene change) get a smaller divisor and therefore larger
//! descriptors, which lifts their retrieval scores relative to merely
//! similar, unedited videos.

use ndarray::{Array2, Axis};
use thiserror::Error;

use crate::pca::{PcaError, PcaModel};
use crate::store::{Corpus, DescriptorSet, StoreError, MAX_DIM};

/// Divisor floor for consistency weighting. The rescale is undefined at a
/// zero Gram mean, so near-zero means are clamped instead of rejected.
pub const GRAM_MEAN_FLOOR: f64 = 0.05;

#[derive(Debug, Error)]
pub enum PostprocError {
    #[error("video {video_id} frame {frame} is a zero vector and cannot be normalized")]
    ZeroRow { video_id: String, frame: usize },
    #[error("noise corpus is empty")]
    EmptyNoise,
    #[error("rank_k={rank_k} exceeds the noise pool of {pool} frames")]
    RankExceedsPool { rank_k: usize, pool: usize },
    #[error("descriptor dim {found} does not match expected {expected}")]
    DimMismatch { expected: usize, found: usize },
    #[error("invalid temporal concat config: {0}")]
    BadConcatConfig(String),
    #[error("invalid score norm config: {0}")]
    BadScoreNormConfig(String),
    #[error("config line {line}: {message}")]
    BadConfigFile { line: usize, message: String },
    #[error("pca: {0}")]
    Pca(#[from] PcaError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Per-video statistics from consistency weighting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyStats {
    /// Mean of the frame Gram matrix, diagonal included.
    pub gram_mean: f64,
    /// True when the divisor was clamped to [`GRAM_MEAN_FLOOR`].
    pub clamped: bool,
}

impl ConsistencyStats {
    pub fn divisor(&self) -> f64 {
        self.gram_mean.max(GRAM_MEAN_FLOOR)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalConcatConfig {
    /// Frames per concatenation; odd.
    pub window: usize,
    /// Per-offset weights, symmetric and peaked at the center frame.
    pub weights: Vec<f32>,
    /// PCA output dimension; `None` keeps the input descriptor dim.
    pub output_dim: Option<usize>,
}

impl Default for TemporalConcatConfig {
    fn default() -> Self {
        TemporalConcatConfig::triangular(3)
    }
}

impl TemporalConcatConfig {
    /// Linearly decaying weights: 1.0 at the center, 0.5 at the edges.
    pub fn triangular(window: usize) -> Self {
        let center = window / 2;
        let weights = (0..window)
            .map(|i| {
                if center == 0 {
                    1.0
                } else {
                    1.0 - 0.5 * (i as f32 - center as f32).abs() / center as f32
                }
            })
            .collect();
        TemporalConcatConfig {
            window,
            weights,
            output_dim: None,
        }
    }

    pub fn validate(&self) -> Result<(), PostprocError> {
        let bad = |m: String| Err(PostprocError::BadConcatConfig(m));
        if self.window == 0 || self.window.is_multiple_of(2) {
            return bad(format!("window must be odd and >= 1, got {}", self.window));
        }
        if self.weights.len() != self.window {
            return bad(format!(
                "expected {} weights, got {}",
                self.window,
                self.weights.len()
            ));
        }
        let center = self.window / 2;
        for (i, &w) in self.weights.iter().enumerate() {
            if !(w.is_finite() && w > 0.0) {
                return bad(format!("weight {i} must be a positive real, got {w}"));
            }
            if self.weights[self.window - 1 - i] != w {
                return bad("weights must be symmetric about the center".to_string());
            }
            if w > self.weights[center] {
                return bad("center weight must be the maximum".to_string());
            }
        }
        if let Some(k) = self.output_dim {
            if k == 0 || k > MAX_DIM {
                return bad(format!("output_dim {k} outside 1..={MAX_DIM}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreNormConfig {
    /// Which noise neighbor defines the per-query baseline.
    pub rank_k: usize,
    /// Subtraction strength; 0 disables the adjustment.
    pub beta: f64,
}

impl Default for ScoreNormConfig {
    fn default() -> Self {
        ScoreNormConfig {
            rank_k: 10,
            beta: 1.0,
        }
    }
}

impl ScoreNormConfig {
    pub fn validate(&self) -> Result<(), PostprocError> {
        if self.rank_k == 0 {
            return Err(PostprocError::BadScoreNormConfig(
                "rank_k must be >= 1".to_string(),
            ));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(PostprocError::BadScoreNormConfig(format!(
                "beta must be a non-negative real, got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

/// Scale every row to unit Euclidean norm.
pub fn l2_normalize(set: &DescriptorSet) -> Result<DescriptorSet, PostprocError> {
    let mut matrix = set.matrix().clone();
    for (i, mut row) in matrix.rows_mut().into_iter().enumerate() {
        let norm_sq: f64 = row.iter().map(|&v| (v as f64) * (v as f64)).sum();
        if norm_sq == 0.0 {
            return Err(PostprocError::ZeroRow {
                video_id: set.video_id().to_string(),
                frame: i,
            });
        }
        let norm = norm_sq.sqrt();
        row.mapv_inplace(|v| ((v as f64) / norm) as f32);
    }
    Ok(set.with_matrix(matrix)?)
}

/// Mean of the frame Gram matrix X*X^T, diagonal included. Computed via the
/// row-sum identity sum_ij <x_i, x_j> = ||sum_i x_i||^2, which also shows the
/// mean can never be negative.
pub fn gram_mean(set: &DescriptorSet) -> f64 {
    let n = set.n_frames() as f64;
    let sums = set.matrix().mapv(|v| v as f64).sum_axis(Axis(0));
    sums.dot(&sums) / (n * n)
}

/// Divide the whole matrix by the Gram mean. Expects L2-normalized rows.
pub fn consistency_weight(set: &DescriptorSet) -> (DescriptorSet, ConsistencyStats) {
    let mean = gram_mean(set);
    let stats = ConsistencyStats {
        gram_mean: mean,
        clamped: mean <= GRAM_MEAN_FLOOR,
    };
    let divisor = stats.divisor();
    let matrix = set.matrix().mapv(|v| ((v as f64) / divisor) as f32);
    let weighted = set
        .with_matrix(matrix)
        .expect("finite divisor >= floor keeps entries finite");
    (weighted, stats)
}

/// Materialize the weighted sliding windows: row i becomes the concatenation
/// [w_0 * x_{i-h}, ..., w_{window-1} * x_{i+h}] with boundary frames
/// edge-replicated. Output is `n x (window * d)`.
pub fn concat_windows(set: &DescriptorSet, cfg: &TemporalConcatConfig) -> Array2<f32> {
    let n = set.n_frames();
    let d = set.dim();
    let h = (cfg.window / 2) as isize;
    let matrix = set.matrix();
    let mut out = Array2::zeros((n, cfg.window * d));
    for i in 0..n {
        for (slot, offset) in (-h..=h).enumerate() {
            let j = (i as isize + offset).clamp(0, n as isize - 1) as usize;
            let w = cfg.weights[slot];
            let src = matrix.row(j);
            let mut dst = out.row_mut(i);
            for c in 0..d {
                dst[slot * d + c] = w * src[c];
            }
        }
    }
    out
}

/// Sliding-window concatenation followed by PCA reduction and row
/// re-normalization. Timestamps and frame count are unchanged.
pub fn temporal_concat(
    set: &DescriptorSet,
    cfg: &TemporalConcatConfig,
    pca: &PcaModel,
) -> Result<DescriptorSet, PostprocError> {
    cfg.validate()?;
    let concat_dim = cfg.window * set.dim();
    if pca.input_dim() != concat_dim {
        return Err(PostprocError::DimMismatch {
            expected: concat_dim,
            found: pca.input_dim(),
        });
    }
    if let Some(k) = cfg.output_dim {
        if pca.output_dim() != k {
            return Err(PostprocError::DimMismatch {
                expected: k,
                found: pca.output_dim(),
            });
        }
    }
    let windows = concat_windows(set, cfg);
    let reduced = pca.transform_rows(windows.view())?;
    l2_normalize(&set.with_matrix(reduced)?)
}

/// The rank_k-th largest inner product between any frame of `query_set` and
/// any frame of the noise corpus.
pub fn noise_baseline(
    query_set: &DescriptorSet,
    noise: &Corpus,
    cfg: &ScoreNormConfig,
) -> Result<f64, PostprocError> {
    cfg.validate()?;
    if noise.is_empty() {
        return Err(PostprocError::EmptyNoise);
    }
    let pool = noise.total_frames();
    if cfg.rank_k > pool {
        return Err(PostprocError::RankExceedsPool {
            rank_k: cfg.rank_k,
            pool,
        });
    }
    let d = noise.dim().expect("non-empty corpus has a dim");
    if query_set.dim() != d {
        return Err(PostprocError::DimMismatch {
            expected: d,
            found: query_set.dim(),
        });
    }
    // Keep the rank_k largest products seen so far; `top` stays sorted
    // descending and small (rank_k entries).
    let mut top: Vec<f64> = Vec::with_capacity(cfg.rank_k + 1);
    for noise_set in noise.iter() {
        let sims = query_set.matrix().dot(&noise_set.matrix().t());
        for &v in sims.iter() {
            let v = v as f64;
            if top.len() < cfg.rank_k {
                let pos = top.partition_point(|&t| t >= v);
                top.insert(pos, v);
            } else if v > *top.last().expect("non-empty at capacity") {
                let pos = top.partition_point(|&t| t >= v);
                top.insert(pos, v);
                top.pop();
            }
        }
    }
    Ok(top[cfg.rank_k - 1])
}

/// Shift one query's candidate scores by `-beta * baseline`. A uniform shift
/// never reorders candidates within the query.
pub fn score_normalize(
    scores: &[f64],
    query_set: &DescriptorSet,
    noise: &Corpus,
    cfg: &ScoreNormConfig,
) -> Result<Vec<f64>, PostprocError> {
    let baseline = noise_baseline(query_set, noise, cfg)?;
    Ok(scores.iter().map(|s| s - cfg.beta * baseline).collect())
}

/// Optional key=value overrides for the post-processing configs. Unknown keys
/// are rejected with their line number; `#` starts a comment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PostprocFileConfig {
    pub window: Option<usize>,
    pub weights: Option<Vec<f32>>,
    pub output_dim: Option<usize>,
    pub rank_k: Option<usize>,
    pub beta: Option<f64>,
}

impl PostprocFileConfig {
    pub fn parse(text: &str) -> Result<Self, PostprocError> {
        let mut cfg = PostprocFileConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or(PostprocError::BadConfigFile {
                line,
                message: format!("expected key=value, got {body:?}"),
            })?;
            let key = key.trim();
            let value = value.trim();
            let parse_err = |message: String| PostprocError::BadConfigFile { line, message };
            match key {
                "window" => {
                    cfg.window = Some(
                        value
                            .parse()
                            .map_err(|_| parse_err(format!("bad window {value:?}")))?,
                    )
                }
                "weights" => {
                    let weights = value
                        .split(',')
                        .map(|w| w.trim().parse::<f32>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|_| parse_err(format!("bad weights {value:?}")))?;
                    cfg.weights = Some(weights);
                }
                "output_dim" => {
                    cfg.output_dim = Some(
                        value
                            .parse()
                            .map_err(|_| parse_err(format!("bad output_dim {value:?}")))?,
                    )
                }
                "rank_k" => {
                    cfg.rank_k = Some(
                        value
                            .parse()
                            .map_err(|_| parse_err(format!("bad rank_k {value:?}")))?,
                    )
                }
                "beta" => {
                    cfg.beta = Some(
                        value
                            .parse()
                            .map_err(|_| parse_err(format!("bad beta {value:?}")))?,
                    )
                }
                other => {
                    return Err(parse_err(format!("unknown key {other:?}")));
                }
            }
        }
        Ok(cfg)
    }

    /// Fold the file overrides into concrete configs.
    pub fn apply(
        &self,
        mut concat: TemporalConcatConfig,
        mut norm: ScoreNormConfig,
    ) -> (TemporalConcatConfig, ScoreNormConfig) {
        if let Some(window) = self.window {
            concat = TemporalConcatConfig {
                output_dim: concat.output_dim,
                ..TemporalConcatConfig::triangular(window)
            };
        }
        if let Some(weights) = &self.weights {
            concat.weights = weights.clone();
            concat.window = weights.len();
        }
        if let Some(k) = self.output_dim {
            concat.output_dim = Some(k);
        }
        if let Some(rank_k) = self.rank_k {
            norm.rank_k = rank_k;
        }
        if let Some(beta) = self.beta {
            norm.beta = beta;
        }
        (concat, norm)
    }
}
