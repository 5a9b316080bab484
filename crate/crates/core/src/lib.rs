//! Video copy detection downstream of frame-level feature extraction.
//!
//! The pipeline takes per-frame video descriptors (one row per frame, up to
//! 512 dimensions) and produces two artifacts: post-processed video-level
//! descriptor corpora for similarity retrieval, and localized copied-segment
//! matches between query and reference videos. Evaluators for both outputs
//! and a synthetic corpus generator with planted ground truth are included.

pub mod alignment;
pub mod cli;
pub mod evaluation;
pub mod pca;
pub mod postproc;
pub mod retrieval;
pub mod simgen;
pub mod store;
pub mod views;

pub use store::{Corpus, CorpusRole, DescriptorSet};
