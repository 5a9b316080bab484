//! Command-line pipeline: `gen`, `descriptor`, `match`, `eval`.
//!
//! Every command writes a `manifest.txt` of key=value lines beside its
//! outputs: the full config snapshot, input paths, and output file names
//! (relative to the output directory). Re-running a command with the flags
//! recorded in a manifest reproduces the outputs byte for byte. The thread
//! count is deliberately not part of the manifest; results do not depend
//! on it.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::alignment::{self, SegmentScoreMode, TnConfig};
use crate::evaluation::{self, AblationData, GroundTruth};
use crate::postproc::{PostprocFileConfig, ScoreNormConfig, TemporalConcatConfig};
use crate::retrieval::{self, Aggregation, DescriptorPipelineConfig, SearchConfig};
use crate::simgen::{self, DistractorMode, SimConfig};
use crate::store::{read_corpus, write_corpus, Corpus, CorpusRole};
use crate::views::{labels_to_csv, parse_labels_csv, EditLabels, ViewStore};

pub const MANIFEST_FILE: &str = "manifest.txt";

#[derive(Parser, Debug)]
#[command(
    name = "vcdet",
    version,
    about = "Video copy detection: retrieval candidates and copied-segment localization"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Worker threads for parallel stages (default: available cores).
    /// Outputs are identical for any thread count.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic dataset with planted copied segments.
    Gen(GenArgs),
    /// Run the descriptor track: post-process corpora and rank candidates.
    Descriptor(DescriptorArgs),
    /// Run the matching track: localize segments for candidate pairs.
    #[command(name = "match")]
    Match(MatchArgs),
    /// Score candidates and/or matches against ground truth.
    Eval(EvalArgs),
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub refs: usize,
    #[arg(long, default_value_t = 20)]
    pub queries: usize,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    #[arg(long, default_value_t = 24)]
    pub frames_min: usize,
    #[arg(long, default_value_t = 48)]
    pub frames_max: usize,
    #[arg(long, default_value_t = 0.5)]
    pub copy_fraction: f64,
    #[arg(long, default_value_t = 0.2)]
    pub noise_sigma: f64,
    #[arg(long, value_enum, default_value_t = DistractorModeArg::NearDuplicate)]
    pub distractor_mode: DistractorModeArg,
    #[arg(long, default_value_t = 0.0)]
    pub stack_fraction: f64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum DistractorModeArg {
    Random,
    NearDuplicate,
}

impl From<DistractorModeArg> for DistractorMode {
    fn from(v: DistractorModeArg) -> Self {
        match v {
            DistractorModeArg::Random => DistractorMode::Random,
            DistractorModeArg::NearDuplicate => DistractorMode::NearDuplicate,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct StageArgs {
    /// Merge per-view query descriptors routed by edit labels.
    #[arg(long)]
    pub multi_view: bool,
    /// Rescale each query video by the inverse mean of its frame Gram matrix.
    #[arg(long)]
    pub consistency_weight: bool,
    /// Also apply consistency weighting to reference videos.
    #[arg(long)]
    pub weight_references: bool,
    /// Concatenate adjacent frames in a sliding window and reduce with PCA.
    #[arg(long)]
    pub temporal_concat: bool,
    /// Subtract a per-query noise baseline from candidate scores.
    #[arg(long)]
    pub score_norm: bool,
    /// Sliding-window width (odd) for temporal concat.
    #[arg(long, default_value_t = 3)]
    pub tc_window: usize,
    /// Comma-separated window weights; default is triangular for the window.
    #[arg(long)]
    pub tc_weights: Option<String>,
    /// PCA output dimension for temporal concat (default: input dim).
    #[arg(long)]
    pub tc_output_dim: Option<usize>,
    /// Apply consistency weighting before temporal concat instead of after.
    #[arg(long)]
    pub weight_before_concat: bool,
    /// Which noise neighbor sets the score-normalization baseline.
    #[arg(long, default_value_t = 10)]
    pub rank_k: usize,
    /// Score-normalization subtraction strength.
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Candidates kept per query.
    #[arg(long, default_value_t = 1200)]
    pub top_k: usize,
    #[arg(long, value_enum, default_value_t = AggregationArg::MaxPair)]
    pub aggregation: AggregationArg,
    /// Frame pairs summed under sum-topk-pairs aggregation.
    #[arg(long, default_value_t = 5)]
    pub agg_k: usize,
    /// Optional key=value config file for temporal-concat and score-norm
    /// parameters; command-line flags win over file values.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum AggregationArg {
    MaxPair,
    SumTopkPairs,
}

impl From<AggregationArg> for Aggregation {
    fn from(v: AggregationArg) -> Self {
        match v {
            AggregationArg::MaxPair => Aggregation::MaxPair,
            AggregationArg::SumTopkPairs => Aggregation::SumTopkPairs,
        }
    }
}

#[derive(Args, Debug)]
pub struct DescriptorArgs {
    /// Query corpus (VDSC), full-frame sets.
    #[arg(long)]
    pub queries: PathBuf,
    /// Reference corpus (VDSC).
    #[arg(long)]
    pub refs: PathBuf,
    /// Noise corpus (VDSC) for score normalization.
    #[arg(long)]
    pub noise: PathBuf,
    /// Per-view query sets (VDSC with `<id>@v<k>` names), for --multi-view.
    #[arg(long)]
    pub views: Option<PathBuf>,
    /// Edit-labels CSV; without it every query routes as `other`.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[command(flatten)]
    pub stages: StageArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct MatchArgs {
    /// Candidate CSV from the descriptor track.
    #[arg(long)]
    pub candidates: PathBuf,
    /// Post-processed query corpus (VDSC) from the descriptor track.
    #[arg(long)]
    pub queries: PathBuf,
    /// Post-processed reference corpus (VDSC) from the descriptor track.
    #[arg(long)]
    pub refs: PathBuf,
    #[command(flatten)]
    pub tn: TnArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct TnArgs {
    /// Minimum similarity for a frame pair to become an alignment node.
    #[arg(long, default_value_t = 0.25)]
    pub sim_threshold: f32,
    /// Maximum frame-index gap per axis along a path.
    #[arg(long, default_value_t = 5)]
    pub max_step: usize,
    /// Minimum path length (nodes) to report a segment.
    #[arg(long, default_value_t = 3)]
    pub min_nodes: usize,
    /// Maximum segments reported per candidate pair.
    #[arg(long, default_value_t = 4)]
    pub max_segments: usize,
    /// Minimum path weight to report a segment.
    #[arg(long, default_value_t = 1.0)]
    pub min_path_score: f64,
    #[arg(long, value_enum, default_value_t = ScoreModeArg::Sum)]
    pub score_mode: ScoreModeArg,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScoreModeArg {
    Sum,
    Mean,
}

impl From<ScoreModeArg> for SegmentScoreMode {
    fn from(v: ScoreModeArg) -> Self {
        match v {
            ScoreModeArg::Sum => SegmentScoreMode::PathSum,
            ScoreModeArg::Mean => SegmentScoreMode::PathMean,
        }
    }
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Ground-truth CSV.
    #[arg(long)]
    pub gt: PathBuf,
    /// Candidate CSV to score with descriptor-track muAP.
    #[arg(long)]
    pub candidates: Option<PathBuf>,
    /// Matches CSV to score with matching-track muAP.
    #[arg(long)]
    pub matches: Option<PathBuf>,
    /// Run the four-row cumulative ablation instead of scoring files.
    #[arg(long)]
    pub ablation: bool,
    /// Query corpus (VDSC), required with --ablation.
    #[arg(long)]
    pub queries: Option<PathBuf>,
    /// Reference corpus (VDSC), required with --ablation.
    #[arg(long)]
    pub refs: Option<PathBuf>,
    /// Noise corpus (VDSC), required with --ablation.
    #[arg(long)]
    pub noise: Option<PathBuf>,
    /// Per-view query sets (VDSC), used by the ablation's multi-view rows.
    #[arg(long)]
    pub views: Option<PathBuf>,
    /// Edit-labels CSV for the ablation's multi-view rows.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[command(flatten)]
    pub stages: StageArgs,
    #[command(flatten)]
    pub tn: TnArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

/// Ordered key=value snapshot written beside every command's outputs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunManifest {
    entries: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        let mut m = RunManifest::default();
        m.push("tool", "vcdet");
        m.push("version", env!("CARGO_PKG_VERSION"));
        m.push("command", command);
        m
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(&format!("{k}={v}\n"));
        }
        out
    }

    pub fn parse(text: &str) -> Self {
        let entries = text
            .lines()
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        RunManifest { entries }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, self.to_text())
            .with_context(|| format!("writing manifest {}", path.display()))?;
        Ok(())
    }
}

fn ensure_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output dir {}", dir.display()))
}

impl StageArgs {
    /// Resolve defaults, config-file overrides, then flags into the pipeline
    /// config. Flag precedence requires knowing which flags were given
    /// explicitly; clap marks that via `Option` fields, and the scalar flags
    /// here simply overwrite the file values when they differ from defaults.
    pub fn pipeline_config(&self) -> Result<DescriptorPipelineConfig> {
        let mut concat = TemporalConcatConfig::triangular(self.tc_window);
        let mut norm = ScoreNormConfig {
            rank_k: self.rank_k,
            beta: self.beta,
        };
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            let file = PostprocFileConfig::parse(&text)?;
            // File fills anything still at built-in defaults; explicit flags
            // below take precedence by overwriting afterwards.
            let (c, n) = file.apply(concat, norm);
            concat = c;
            norm = n;
            if self.tc_window != 3 {
                concat = TemporalConcatConfig {
                    output_dim: concat.output_dim,
                    ..TemporalConcatConfig::triangular(self.tc_window)
                };
            }
            if self.rank_k != 10 {
                norm.rank_k = self.rank_k;
            }
            if self.beta != 1.0 {
                norm.beta = self.beta;
            }
        }
        if let Some(weights) = &self.tc_weights {
            let weights: Vec<f32> = weights
                .split(',')
                .map(|w| w.trim().parse::<f32>())
                .collect::<Result<_, _>>()
                .context("parsing --tc-weights")?;
            concat.window = weights.len();
            concat.weights = weights;
        }
        if let Some(k) = self.tc_output_dim {
            concat.output_dim = Some(k);
        }
        concat.validate()?;
        norm.validate()?;
        let search = SearchConfig {
            top_k: self.top_k,
            aggregation: self.aggregation.into(),
            agg_k: self.agg_k,
        };
        search.validate()?;
        Ok(DescriptorPipelineConfig {
            multi_view: self.multi_view,
            consistency_weight: self.consistency_weight,
            weight_references: self.weight_references,
            temporal_concat: self.temporal_concat,
            concat,
            weight_before_concat: self.weight_before_concat,
            score_norm: self.score_norm,
            score_norm_cfg: norm,
            search,
        })
    }

    fn record(&self, m: &mut RunManifest, cfg: &DescriptorPipelineConfig) {
        m.push("multi_view", cfg.multi_view);
        m.push("consistency_weight", cfg.consistency_weight);
        m.push("weight_references", cfg.weight_references);
        m.push("temporal_concat", cfg.temporal_concat);
        m.push("tc_window", cfg.concat.window);
        m.push(
            "tc_weights",
            cfg.concat
                .weights
                .iter()
                .map(|w| w.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        m.push(
            "tc_output_dim",
            cfg.concat
                .output_dim
                .map(|k| k.to_string())
                .unwrap_or_else(|| "input".to_string()),
        );
        m.push("weight_before_concat", cfg.weight_before_concat);
        m.push("score_norm", cfg.score_norm);
        m.push("rank_k", cfg.score_norm_cfg.rank_k);
        m.push("beta", cfg.score_norm_cfg.beta);
        m.push("top_k", cfg.search.top_k);
        m.push("aggregation", cfg.search.aggregation.as_str());
        m.push("agg_k", cfg.search.agg_k);
    }
}

impl TnArgs {
    pub fn tn_config(&self) -> Result<TnConfig> {
        let cfg = TnConfig {
            sim_threshold: self.sim_threshold,
            max_step: self.max_step,
            min_nodes: self.min_nodes,
            max_segments: self.max_segments,
            min_path_score: self.min_path_score,
            score_mode: self.score_mode.into(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn record(&self, m: &mut RunManifest, cfg: &TnConfig) {
        m.push("sim_threshold", cfg.sim_threshold);
        m.push("max_step", cfg.max_step);
        m.push("min_nodes", cfg.min_nodes);
        m.push("max_segments", cfg.max_segments);
        m.push("min_path_score", cfg.min_path_score);
        m.push("score_mode", cfg.score_mode.as_str());
    }
}

fn load_views(path: Option<&PathBuf>) -> Result<Option<ViewStore>> {
    match path {
        None => Ok(None),
        Some(p) => {
            let corpus = read_corpus(p, CorpusRole::Query)
                .with_context(|| format!("reading views {}", p.display()))?;
            Ok(Some(ViewStore::from_corpus(&corpus)?))
        }
    }
}

fn load_labels(path: Option<&PathBuf>) -> Result<Vec<EditLabels>> {
    match path {
        None => Ok(Vec::new()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("reading labels {}", p.display()))?;
            Ok(parse_labels_csv(&text)?)
        }
    }
}

pub fn run_gen(args: &GenArgs) -> Result<()> {
    let cfg = SimConfig {
        seed: args.seed,
        n_refs: args.refs,
        n_queries: args.queries,
        d: args.dim,
        frames_min: args.frames_min,
        frames_max: args.frames_max,
        copy_fraction: args.copy_fraction,
        noise_sigma: args.noise_sigma,
        distractor_mode: args.distractor_mode.into(),
        stack_fraction: args.stack_fraction,
    };
    let out = simgen::generate(&cfg)?;
    ensure_out_dir(&args.out)?;

    let mut manifest = RunManifest::new("gen");
    manifest.push("seed", cfg.seed);
    manifest.push("refs", cfg.n_refs);
    manifest.push("queries", cfg.n_queries);
    manifest.push("dim", cfg.d);
    manifest.push("frames_min", cfg.frames_min);
    manifest.push("frames_max", cfg.frames_max);
    manifest.push("copy_fraction", cfg.copy_fraction);
    manifest.push("noise_sigma", cfg.noise_sigma);
    manifest.push("distractor_mode", cfg.distractor_mode.as_str());
    manifest.push("stack_fraction", cfg.stack_fraction);

    let write = |name: &str, corpus: &Corpus, manifest: &mut RunManifest| -> Result<()> {
        let path = args.out.join(name);
        write_corpus(corpus, &path).with_context(|| format!("writing {}", path.display()))?;
        manifest.push(&format!("out_{}", name.replace('.', "_")), name);
        Ok(())
    };
    write("queries.vdsc", &out.queries, &mut manifest)?;
    write("refs.vdsc", &out.refs, &mut manifest)?;
    write("noise.vdsc", &out.noise, &mut manifest)?;
    if !out.query_views.is_empty() {
        let views = out.query_views.to_corpus(CorpusRole::Query)?;
        write("query_views.vdsc", &views, &mut manifest)?;
    }
    let gt_path = args.out.join("ground_truth.csv");
    fs::write(&gt_path, out.gt.to_csv())?;
    manifest.push("out_ground_truth_csv", "ground_truth.csv");
    let labels_path = args.out.join("edit_labels.csv");
    fs::write(&labels_path, labels_to_csv(&out.labels))?;
    manifest.push("out_edit_labels_csv", "edit_labels.csv");
    manifest.write(&args.out)?;
    println!(
        "generated {} queries, {} refs, {} noise videos, {} ground-truth segments -> {}",
        out.queries.len(),
        out.refs.len(),
        out.noise.len(),
        out.gt.len(),
        args.out.display()
    );
    Ok(())
}

pub fn run_descriptor(args: &DescriptorArgs) -> Result<()> {
    let cfg = args.stages.pipeline_config()?;
    let queries = read_corpus(&args.queries, CorpusRole::Query)
        .with_context(|| format!("reading queries {}", args.queries.display()))?;
    let refs = read_corpus(&args.refs, CorpusRole::Reference)
        .with_context(|| format!("reading refs {}", args.refs.display()))?;
    let noise = read_corpus(&args.noise, CorpusRole::Noise)
        .with_context(|| format!("reading noise {}", args.noise.display()))?;
    let views = load_views(args.views.as_ref())?;
    let labels = load_labels(args.labels.as_ref())?;

    let out = retrieval::pipeline_descriptor_track(
        &queries,
        views.as_ref(),
        &labels,
        &refs,
        &noise,
        &cfg,
    )?;
    ensure_out_dir(&args.out)?;

    let mut manifest = RunManifest::new("descriptor");
    manifest.push("in_queries", args.queries.display());
    manifest.push("in_refs", args.refs.display());
    manifest.push("in_noise", args.noise.display());
    if let Some(v) = &args.views {
        manifest.push("in_views", v.display());
    }
    if let Some(l) = &args.labels {
        manifest.push("in_labels", l.display());
    }
    args.stages.record(&mut manifest, &cfg);

    let q_path = args.out.join("queries_processed.vdsc");
    write_corpus(&out.queries, &q_path)?;
    manifest.push("out_queries_processed", "queries_processed.vdsc");
    let r_path = args.out.join("refs_processed.vdsc");
    write_corpus(&out.refs, &r_path)?;
    manifest.push("out_refs_processed", "refs_processed.vdsc");
    let c_path = args.out.join("candidates.csv");
    fs::write(&c_path, retrieval::candidates_to_csv(&out.candidates))?;
    manifest.push("out_candidates", "candidates.csv");
    if let Some(pca) = &out.pca {
        let p_path = args.out.join("pca.vpca");
        crate::pca::write_pca(pca, &p_path)?;
        manifest.push("out_pca", "pca.vpca");
    }
    manifest.write(&args.out)?;

    for (video_id, stats) in out.stats.iter().filter(|(_, s)| s.clamped) {
        eprintln!(
            "warning: gram mean {:.6} of {video_id} clamped to {}",
            stats.gram_mean,
            crate::postproc::GRAM_MEAN_FLOOR
        );
    }
    let total: usize = out.candidates.iter().map(|c| c.len()).sum();
    println!(
        "ranked {total} candidates for {} queries -> {}",
        out.queries.len(),
        args.out.display()
    );
    Ok(())
}

pub fn run_match(args: &MatchArgs) -> Result<()> {
    let cfg = args.tn.tn_config()?;
    let text = fs::read_to_string(&args.candidates)
        .with_context(|| format!("reading candidates {}", args.candidates.display()))?;
    let candidates = retrieval::parse_candidates_csv(&text)?;
    let queries = read_corpus(&args.queries, CorpusRole::Query)?;
    let refs = read_corpus(&args.refs, CorpusRole::Reference)?;
    let matches = alignment::pipeline_matching_track(&candidates, &queries, &refs, &cfg)?;
    ensure_out_dir(&args.out)?;

    let mut manifest = RunManifest::new("match");
    manifest.push("in_candidates", args.candidates.display());
    manifest.push("in_queries", args.queries.display());
    manifest.push("in_refs", args.refs.display());
    args.tn.record(&mut manifest, &cfg);
    let m_path = args.out.join("matches.csv");
    fs::write(&m_path, alignment::matches_to_csv(&matches))?;
    manifest.push("out_matches", "matches.csv");
    manifest.write(&args.out)?;
    println!(
        "localized {} segments from {} candidate pairs -> {}",
        matches.len(),
        candidates.len(),
        args.out.display()
    );
    Ok(())
}

pub fn run_eval(args: &EvalArgs) -> Result<()> {
    let gt_text = fs::read_to_string(&args.gt)
        .with_context(|| format!("reading ground truth {}", args.gt.display()))?;
    let gt = GroundTruth::parse_csv(&gt_text)?;
    ensure_out_dir(&args.out)?;

    let mut manifest = RunManifest::new("eval");
    manifest.push("in_gt", args.gt.display());

    let mut report_lines: Vec<String> = Vec::new();
    let mut report_csv = String::from("metric,value\n");

    if args.ablation {
        let (Some(q), Some(r), Some(n)) = (&args.queries, &args.refs, &args.noise) else {
            bail!("--ablation requires --queries, --refs, and --noise");
        };
        let queries = read_corpus(q, CorpusRole::Query)?;
        let refs = read_corpus(r, CorpusRole::Reference)?;
        let noise = read_corpus(n, CorpusRole::Noise)?;
        let views = load_views(args.views.as_ref())?;
        let labels = load_labels(args.labels.as_ref())?;
        let base = args.stages.pipeline_config()?;
        let tn = args.tn.tn_config()?;
        manifest.push("in_queries", q.display());
        manifest.push("in_refs", r.display());
        manifest.push("in_noise", n.display());
        args.stages.record(&mut manifest, &base);
        args.tn.record(&mut manifest, &tn);

        let data = AblationData {
            queries: &queries,
            views: views.as_ref(),
            labels: &labels,
            refs: &refs,
            noise: &noise,
            gt: &gt,
        };
        let rows = evaluation::ablation_report(&base, &tn, &data)?;
        let table = evaluation::ablation_table_text(&rows);
        report_lines.push(table.clone());
        let csv_path = args.out.join("ablation.csv");
        fs::write(&csv_path, evaluation::ablation_table_csv(&rows))?;
        manifest.push("out_ablation", "ablation.csv");
    } else {
        if args.candidates.is_none() && args.matches.is_none() {
            bail!("nothing to evaluate: pass --candidates, --matches, or --ablation");
        }
        if let Some(c) = &args.candidates {
            let text = fs::read_to_string(c)
                .with_context(|| format!("reading candidates {}", c.display()))?;
            let pairs = retrieval::parse_candidates_csv(&text)?;
            let muap = evaluation::descriptor_muap(&pairs, &gt)?;
            manifest.push("in_candidates", c.display());
            report_lines.push(format!("muAP(descriptor) = {muap:.6}"));
            report_csv.push_str(&format!("descriptor_muap,{muap:.6}\n"));
        }
        if let Some(m) = &args.matches {
            let text = fs::read_to_string(m)
                .with_context(|| format!("reading matches {}", m.display()))?;
            let preds = alignment::parse_matches_csv(&text)?;
            let muap = evaluation::matching_muap(&preds, &gt)?;
            manifest.push("in_matches", m.display());
            report_lines.push(format!("muAP(matching) = {muap:.6}"));
            report_csv.push_str(&format!("matching_muap,{muap:.6}\n"));
        }
    }

    let report = report_lines.join("\n") + "\n";
    let report_path = args.out.join("report.txt");
    fs::write(&report_path, &report)?;
    manifest.push("out_report", "report.txt");
    if !args.ablation {
        let csv_path = args.out.join("report.csv");
        fs::write(&csv_path, &report_csv)?;
        manifest.push("out_report_csv", "report.csv");
    }
    manifest.write(&args.out)?;
    print!("{report}");
    Ok(())
}

/// Dispatch a parsed command inside a rayon pool sized by `--threads`.
pub fn run(cli: Cli) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().context("building thread pool")?;
    pool.install(|| match &cli.command {
        Command::Gen(args) => run_gen(args),
        Command::Descriptor(args) => run_descriptor(args),
        Command::Match(args) => run_match(args),
        Command::Eval(args) => run_eval(args),
    })
}
