//! Synthetic corpus generator with planted ground truth.
//!
//! References are spherical random walks on the unit sphere, so adjacent
//! frames are correlated the way consecutive video frames are. An edited
//! query embeds a contiguous reference segment (each copied descriptor
//! perturbed by Gaussian noise of norm scale `noise_sigma`, then
//! re-normalized) among distractor frames. Stacking-style edits corrupt the
//! full-frame view's copied descriptors and park the cleanly perturbed
//! segment in an auxiliary view, which is what multi-crop retrieval exploits.
//! Generation is fully deterministic in the seed.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::alignment::SegmentMatch;
use crate::evaluation::GroundTruth;
use crate::store::{Corpus, CorpusRole, DescriptorSet, MAX_DIM};
use crate::views::{EditLabel, EditLabels, ViewStore};

// Per-step norm scale of the reference random walks. Large enough that far
// frames decorrelate within a video, small enough that the similarity
// matrix keeps a usable diagonal.
const WALK_STEP_SIGMA: f64 = 0.35;
// Extra corruption applied to the full-frame view of stacking-style edits.
const STACK_CORRUPT_SIGMA: f64 = 2.5;
// Near-duplicate distractors stay at least this far from their source so
// they never collapse into exact copies as noise_sigma -> 0.
const NEAR_DUP_SIGMA_FLOOR: f64 = 0.45;
const NEAR_DUP_SIGMA_FACTOR: f64 = 1.3;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("infeasible config: {0}")]
    Infeasible(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistractorMode {
    /// Distractor content is fresh random walks.
    Random,
    /// Unedited queries shadow reference content without copying it, the
    /// similar-but-not-copied failure mode consistency weighting targets.
    NearDuplicate,
}

impl DistractorMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DistractorMode::Random => "random",
            DistractorMode::NearDuplicate => "near_duplicate",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub n_refs: usize,
    pub n_queries: usize,
    pub d: usize,
    pub frames_min: usize,
    pub frames_max: usize,
    /// Fraction of queries that are edited (contain a copied segment).
    pub copy_fraction: f64,
    /// Norm scale of the perturbation applied to copied descriptors.
    pub noise_sigma: f64,
    pub distractor_mode: DistractorMode,
    /// Fraction of edited queries that simulate spatial stacking.
    pub stack_fraction: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 42,
            n_refs: 50,
            n_queries: 20,
            d: 64,
            frames_min: 24,
            frames_max: 48,
            copy_fraction: 0.5,
            noise_sigma: 0.2,
            distractor_mode: DistractorMode::NearDuplicate,
            stack_fraction: 0.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        if self.n_refs == 0 || self.n_queries == 0 {
            return bad("n_refs and n_queries must be >= 1".into());
        }
        if self.d == 0 || self.d > MAX_DIM {
            return bad(format!("d must be in 1..={MAX_DIM}, got {}", self.d));
        }
        if self.frames_min > self.frames_max {
            return bad(format!(
                "frames_min {} > frames_max {}",
                self.frames_min, self.frames_max
            ));
        }
        if !(0.0..=1.0).contains(&self.copy_fraction) {
            return bad(format!("copy_fraction {} outside [0, 1]", self.copy_fraction));
        }
        if !(0.0..=1.0).contains(&self.stack_fraction) {
            return bad(format!("stack_fraction {} outside [0, 1]", self.stack_fraction));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad(format!("noise_sigma {} must be >= 0", self.noise_sigma));
        }
        if self.frames_min < 4 {
            // A planted segment needs >= 2 frames at <= 60% of the video.
            return Err(SimError::Infeasible(format!(
                "frames_min {} leaves no room for a copied segment",
                self.frames_min
            )));
        }
        Ok(())
    }
}

#[derive(Debug)]
pub struct SimOutput {
    pub queries: Corpus,
    pub query_views: ViewStore,
    pub refs: Corpus,
    pub noise: Corpus,
    pub gt: GroundTruth,
    pub labels: Vec<EditLabels>,
}

struct Gen {
    rng: ChaCha8Rng,
    d: usize,
}

impl Gen {
    fn normal(&mut self) -> f64 {
        <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut self.rng)
    }

    fn unit(&mut self) -> Vec<f64> {
        let v: Vec<f64> = (0..self.d).map(|_| self.normal()).collect();
        normalize(v)
    }

    /// `x` plus a Gaussian perturbation of expected norm `sigma`,
    /// re-normalized. `sigma == 0` returns `x` bit for bit.
    fn perturb(&mut self, x: &[f64], sigma: f64) -> Vec<f64> {
        if sigma == 0.0 {
            return x.to_vec();
        }
        let scale = sigma / (self.d as f64).sqrt();
        let v: Vec<f64> = x.iter().map(|&c| c + scale * self.normal()).collect();
        normalize(v)
    }

    /// Random walk on the unit sphere starting from a fresh direction.
    fn walk(&mut self, len: usize) -> Vec<Vec<f64>> {
        let mut frames = Vec::with_capacity(len);
        frames.push(self.unit());
        for _ in 1..len {
            let prev = frames.last().expect("non-empty").clone();
            frames.push(self.perturb(&prev, WALK_STEP_SIGMA));
        }
        frames
    }

    /// Continue walking from an existing frame.
    fn walk_from(&mut self, start: &[f64], len: usize) -> Vec<Vec<f64>> {
        let mut frames = Vec::with_capacity(len);
        let mut prev = start.to_vec();
        for _ in 0..len {
            prev = self.perturb(&prev, WALK_STEP_SIGMA);
            frames.push(prev.clone());
        }
        frames
    }
}

fn normalize(v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    v.into_iter().map(|c| c / norm).collect()
}

fn to_set(id: &str, frames: &[Vec<f64>]) -> DescriptorSet {
    let n = frames.len();
    let d = frames[0].len();
    let matrix = Array2::from_shape_fn((n, d), |(i, j)| frames[i][j] as f32);
    DescriptorSet::new(id.to_string(), (0..n).map(|i| i as f32).collect(), matrix)
        .expect("generated frames are finite unit vectors")
}

/// Generate a full synthetic dataset: references, noise references, queries
/// (with per-view sets for stacking-style edits), ground truth, and labels.
pub fn generate(cfg: &SimConfig) -> Result<SimOutput, SimError> {
    cfg.validate()?;
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        d: cfg.d,
    };

    let id_width = |count: usize| count.to_string().len().max(4);
    let rw = id_width(cfg.n_refs);
    let qw = id_width(cfg.n_queries);

    // References first, then the noise batch, then queries: the draw order
    // is part of the determinism contract.
    let mut ref_frames: Vec<Vec<Vec<f64>>> = Vec::with_capacity(cfg.n_refs);
    let mut refs = Corpus::new(CorpusRole::Reference);
    for i in 0..cfg.n_refs {
        let len = g.rng.random_range(cfg.frames_min..=cfg.frames_max);
        let frames = g.walk(len);
        refs.push(to_set(&format!("ref_{i:0rw$}"), &frames))
            .expect("generated ids are unique");
        ref_frames.push(frames);
    }

    let n_noise = (cfg.n_refs / 2).max(2);
    let mut noise = Corpus::new(CorpusRole::Noise);
    for i in 0..n_noise {
        let len = g.rng.random_range(cfg.frames_min..=cfg.frames_max);
        let frames = g.walk(len);
        noise
            .push(to_set(&format!("noise_{i:04}"), &frames))
            .expect("generated ids are unique");
    }

    let n_edited = (cfg.copy_fraction * cfg.n_queries as f64).round() as usize;
    let n_stacked = (cfg.stack_fraction * n_edited as f64).round() as usize;

    let mut queries = Corpus::new(CorpusRole::Query);
    let mut query_views = ViewStore::new();
    let mut gt_records: Vec<SegmentMatch> = Vec::new();
    let mut labels = Vec::with_capacity(cfg.n_queries);

    for qi in 0..cfg.n_queries {
        let qid = format!("query_{qi:0qw$}");
        let q_len = g.rng.random_range(cfg.frames_min..=cfg.frames_max);
        let edited = qi < n_edited;
        let stacked = qi < n_stacked;

        // Distractor body. Edited queries always get fresh content so the
        // near-duplicate confusers are videos that contain no copy at all,
        // which is the failure mode consistency weighting separates.
        let mut base = if edited || cfg.distractor_mode == DistractorMode::Random {
            g.walk(q_len)
        } else {
            // Shadow a reference without copying it: close enough to rank
            // like a copy, far enough to never become one. The shadow spans
            // the whole query so unedited videos stay single-scene; the
            // missing scene change is exactly what consistency weighting
            // keys on.
            let src = &ref_frames[g.rng.random_range(0..cfg.n_refs)];
            let nd_sigma = (NEAR_DUP_SIGMA_FACTOR * cfg.noise_sigma).max(NEAR_DUP_SIGMA_FLOOR);
            let shadow_len = q_len.min(src.len());
            let r_off = g.rng.random_range(0..=src.len() - shadow_len);
            let mut frames: Vec<Vec<f64>> = (0..shadow_len)
                .map(|k| g.perturb(&src[r_off + k], nd_sigma))
                .collect();
            if frames.len() < q_len {
                let last = frames.last().expect("shadow_len >= 1").clone();
                let tail = q_len - frames.len();
                frames.extend(g.walk_from(&last, tail));
            }
            frames
        };

        if !edited {
            labels.push(EditLabels::new(qid.clone(), [EditLabel::None]));
            queries
                .push(to_set(&qid, &base))
                .expect("generated ids are unique");
            continue;
        }

        // Plant a copied segment: a contiguous reference window, perturbed
        // per frame and re-normalized.
        let ref_idx = g.rng.random_range(0..cfg.n_refs);
        let src = &ref_frames[ref_idx];
        let frac = g.rng.random_range(0.2..=0.6);
        let seg_len = ((frac * q_len as f64).floor() as usize)
            .clamp(2, q_len)
            .min(src.len());
        if seg_len < 2 {
            return Err(SimError::Infeasible(format!(
                "segment of {seg_len} frames cannot span a copy (query {qid})"
            )));
        }
        let q_off = g.rng.random_range(0..=q_len - seg_len);
        let r_off = g.rng.random_range(0..=src.len() - seg_len);
        let clean: Vec<Vec<f64>> = (0..seg_len)
            .map(|k| g.perturb(&src[r_off + k], cfg.noise_sigma))
            .collect();

        let ref_id = format!("ref_{ref_idx:0rw$}");
        gt_records.push(SegmentMatch {
            query_id: qid.clone(),
            ref_id,
            q_start: q_off as f32,
            q_end: (q_off + seg_len - 1) as f32,
            r_start: r_off as f32,
            r_end: (r_off + seg_len - 1) as f32,
            score: 0.0,
        });

        if stacked {
            // Full view: the composite frame hides the copy behind heavy
            // corruption. One auxiliary crop view carries the clean segment;
            // remaining views of the routed scheme are distractor content.
            let label = [
                EditLabel::StackVertical,
                EditLabel::StackHorizontal,
                EditLabel::StackGrid,
            ][g.rng.random_range(0..3)];
            let view_count = match label {
                EditLabel::StackGrid => 4,
                _ => 2,
            };
            for k in 0..seg_len {
                base[q_off + k] = g.perturb(&clean[k], STACK_CORRUPT_SIGMA);
            }
            let full = to_set(&qid, &base);

            let mut views = vec![full.clone()];
            for v in 1..view_count {
                let mut frames = g.walk(q_len);
                if v == 1 {
                    frames[q_off..q_off + seg_len].clone_from_slice(&clean);
                }
                views.push(to_set(&qid, &frames));
            }
            query_views.insert(qid.clone(), views);
            labels.push(EditLabels::new(qid.clone(), [label]));
            queries.push(full).expect("generated ids are unique");
        } else {
            base[q_off..q_off + seg_len].clone_from_slice(&clean);
            labels.push(EditLabels::new(qid.clone(), [EditLabel::Other]));
            queries
                .push(to_set(&qid, &base))
                .expect("generated ids are unique");
        }
    }

    let gt = GroundTruth::from_records(gt_records)
        .expect("planted intervals are valid and distinct");
    Ok(SimOutput {
        queries,
        query_views,
        refs,
        noise,
        gt,
        labels,
    })
}
