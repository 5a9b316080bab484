//! Acceptance suite: one test per criterion, each printing a pass/fail line.
//!
//! Oracles here are deliberately naive re-implementations (scalar loops,
//! exhaustive enumeration, grid rasterization) kept independent of the
//! library's computation paths.

use std::collections::HashSet;
use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use vcdet::alignment::{pipeline_matching_track, tn_best_path, SimilarityMatrix, TnConfig};
use vcdet::evaluation::{
    ablation_report, descriptor_muap, matching_muap, AblationData, GroundTruth,
};
use vcdet::pca::pca_fit;
use vcdet::postproc::consistency_weight;
use vcdet::retrieval::{
    exhaustive_search, pipeline_descriptor_track, Aggregation, CandidatePair,
    DescriptorPipelineConfig, SearchConfig,
};
use vcdet::simgen::{generate, SimConfig};
use vcdet::store::{Corpus, CorpusRole, DescriptorSet};

fn report(criterion: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "acceptance {criterion} ({name}): {} {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} ({name}) failed: {detail}");
}

fn unit_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Array2<f32> {
    let mut m = Array2::from_shape_fn((n, d), |_| {
        <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng) as f32
    });
    for mut row in m.rows_mut() {
        let norm: f32 = row.iter().map(|v| v * v).sum::<f32>().sqrt();
        row.mapv_inplace(|v| v / norm);
    }
    m
}

fn corpus(role: CorpusRole, prefix: &str, rng: &mut ChaCha8Rng, videos: usize, frames: std::ops::RangeInclusive<usize>, d: usize) -> Corpus {
    let sets = (0..videos)
        .map(|i| {
            let n = rng.random_range(frames.clone());
            DescriptorSet::new(
                format!("{prefix}{i:03}"),
                (0..n).map(|t| t as f32).collect(),
                unit_rows(rng, n, d),
            )
            .unwrap()
        })
        .collect();
    Corpus::from_sets(role, sets).unwrap()
}

/// Criterion 1: exhaustive_search equals a naive double-loop oracle on 50
/// random instances (identical order, scores within 1e-5) in under 10 s.
#[test]
fn criterion_1_search_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for case in 0..50 {
        let d = rng.random_range(4..=32);
        let n_q = rng.random_range(1..=10);
        let n_r = rng.random_range(2..=30);
        let queries = corpus(CorpusRole::Query, "q", &mut rng, n_q, 3..=8, d);
        let refs = corpus(CorpusRole::Reference, "r", &mut rng, n_r, 3..=8, d);
        let cfg = SearchConfig {
            top_k: rng.random_range(1..=35),
            aggregation: if case % 2 == 0 {
                Aggregation::MaxPair
            } else {
                Aggregation::SumTopkPairs
            },
            agg_k: rng.random_range(1..=6),
        };
        let got = exhaustive_search(&queries, &refs, &cfg).unwrap();

        // Oracle: scalar loop over every frame pair of every video pair.
        for (qi, q) in queries.iter().enumerate() {
            let mut scored: Vec<(String, f64)> = refs
                .iter()
                .map(|r| {
                    let mut sims = Vec::new();
                    for a in 0..q.n_frames() {
                        for b in 0..r.n_frames() {
                            let mut s = 0f32;
                            for c in 0..d {
                                s += q.matrix()[[a, c]] * r.matrix()[[b, c]];
                            }
                            sims.push(s);
                        }
                    }
                    sims.sort_by(|x, y| y.total_cmp(x));
                    let score = match cfg.aggregation {
                        Aggregation::MaxPair => sims[0] as f64,
                        Aggregation::SumTopkPairs => {
                            sims.iter().take(cfg.agg_k).map(|&v| v as f64).sum()
                        }
                    };
                    (r.video_id().to_string(), score)
                })
                .collect();
            scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            scored.truncate(cfg.top_k);
            assert_eq!(got[qi].len(), scored.len());
            for (g, (rid, score)) in got[qi].iter().zip(scored.iter()) {
                assert_eq!(&g.ref_id, rid, "case {case} query {qi}");
                assert!((g.score - score).abs() < 1e-5, "case {case}: {} vs {score}", g.score);
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    report(
        1,
        "search oracle equivalence",
        elapsed < 10.0,
        &format!("50 instances in {elapsed:.2}s"),
    );
}

/// Exhaustive monotone-path enumeration by DFS, independent of the DP.
fn enumerate_best_path(
    values: &Array2<f32>,
    threshold: f32,
    max_step: usize,
) -> Option<(Vec<(usize, usize)>, f64)> {
    fn dfs(
        values: &Array2<f32>,
        threshold: f32,
        max_step: usize,
        path: &mut Vec<(usize, usize)>,
        weight: f64,
        best: &mut Option<(Vec<(usize, usize)>, f64)>,
    ) {
        if best.as_ref().is_none_or(|(_, bw)| weight > *bw) {
            *best = Some((path.clone(), weight));
        }
        let &(i, j) = path.last().unwrap();
        let (n_q, n_r) = values.dim();
        for di in 1..=max_step {
            for dj in 1..=max_step {
                let (ni, nj) = (i + di, j + dj);
                if ni < n_q && nj < n_r && values[(ni, nj)] >= threshold {
                    path.push((ni, nj));
                    dfs(values, threshold, max_step, path, weight + values[(ni, nj)] as f64, best);
                    path.pop();
                }
            }
        }
    }
    let mut best = None;
    let (n_q, n_r) = values.dim();
    for i in 0..n_q {
        for j in 0..n_r {
            if values[(i, j)] >= threshold {
                let mut path = vec![(i, j)];
                dfs(values, threshold, max_step, &mut path, values[(i, j)] as f64, &mut best);
            }
        }
    }
    best
}

/// Criterion 2: the alignment DP matches exhaustive path enumeration on 100
/// random matrices up to 8x8 with max_step <= 3, in under 30 s.
#[test]
fn criterion_2_alignment_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for case in 0..100 {
        let n_q = rng.random_range(2..=8);
        let n_r = rng.random_range(2..=8);
        let values = Array2::from_shape_fn((n_q, n_r), |_| rng.random_range(0.0f32..1.0));
        let max_step = rng.random_range(1..=3);
        let threshold = 0.5;
        let sim = SimilarityMatrix {
            query_id: "q".into(),
            ref_id: "r".into(),
            q_times: (0..n_q).map(|i| i as f32).collect(),
            r_times: (0..n_r).map(|j| j as f32).collect(),
            values: values.clone(),
        };
        let got = tn_best_path(&sim, threshold, max_step);
        let want = enumerate_best_path(&values, threshold, max_step);
        match (got, want) {
            (None, None) => {}
            (Some((gp, gw)), Some((wp, ww))) => {
                assert!((gw - ww).abs() < 1e-6, "case {case}: weight {gw} vs {ww}");
                assert_eq!(gp, wp, "case {case}: node sets differ");
            }
            (g, w) => panic!("case {case}: {g:?} vs {w:?}"),
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    report(
        2,
        "alignment oracle equivalence",
        elapsed < 30.0,
        &format!("100 matrices in {elapsed:.2}s"),
    );
}

/// Criterion 3: descriptor muAP matches a literal rank-walk oracle within
/// 1e-9 on 100 instances; matching muAP matches a 0.1 s grid-rasterization
/// oracle within 2e-2 on 50 rectangle sets. Under 30 s.
#[test]
fn criterion_3_metric_oracles() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(303);

    for _ in 0..100 {
        let n_pairs = rng.random_range(5..=40);
        let n_pos = rng.random_range(1..=n_pairs.min(10));
        let mut pairs = Vec::new();
        let mut gt_records = Vec::new();
        for i in 0..n_pairs {
            let q = format!("q{}", i % 7);
            let r = format!("r{i}");
            if i < n_pos {
                gt_records.push(vcdet::alignment::SegmentMatch {
                    query_id: q.clone(),
                    ref_id: r.clone(),
                    q_start: 0.0,
                    q_end: 5.0,
                    r_start: 0.0,
                    r_end: 5.0,
                    score: 0.0,
                });
            }
            pairs.push(CandidatePair {
                query_id: q,
                ref_id: r,
                score: rng.random_range(0.0..1.0),
            });
        }
        // Hold back some positives so unretrieved ones hit the denominator.
        let keep = rng.random_range(0..=n_pairs - 1);
        let kept: Vec<CandidatePair> = pairs.iter().skip(n_pairs - 1 - keep).cloned().collect();
        let gt = GroundTruth::from_records(gt_records).unwrap();

        let mut sorted = kept.clone();
        sorted.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.query_id.cmp(&b.query_id))
                .then_with(|| a.ref_id.cmp(&b.ref_id))
        });
        let mut hits = 0f64;
        let mut expected = 0f64;
        for (rank, p) in sorted.iter().enumerate() {
            if gt.pair_set().contains(&(p.query_id.clone(), p.ref_id.clone())) {
                hits += 1.0;
                expected += hits / (rank + 1) as f64;
            }
        }
        expected /= gt.pair_set().len() as f64;
        let got = descriptor_muap(&kept, &gt).unwrap();
        assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
    }

    // Matching metric vs grid rasterization. Rectangle coordinates live on
    // the 0.1 s lattice so the oracle grid is exact up to float rounding.
    for _ in 0..50 {
        fn snap(rng: &mut ChaCha8Rng, lo: i32, hi: i32) -> f32 {
            rng.random_range(lo..hi) as f32 * 0.1
        }
        let n_gt = rng.random_range(1..=3);
        let mut gt_records = Vec::new();
        for i in 0..n_gt {
            let (qs, rs) = (snap(&mut rng, 0, 150), snap(&mut rng, 0, 150));
            let (w, h) = (snap(&mut rng, 10, 80), snap(&mut rng, 10, 80));
            gt_records.push(vcdet::alignment::SegmentMatch {
                query_id: format!("q{i}"),
                ref_id: "r0".into(),
                q_start: qs,
                q_end: qs + w,
                r_start: rs,
                r_end: rs + h,
                score: 0.0,
            });
        }
        let gt = GroundTruth::from_records(gt_records.clone()).unwrap();
        let n_preds = rng.random_range(2..=6);
        let mut preds = Vec::new();
        for k in 0..n_preds {
            let base = &gt_records[k % gt_records.len()];
            let (dx, dy) = (snap(&mut rng, -40, 40), snap(&mut rng, -40, 40));
            let score = snap(&mut rng, 0, 1000) as f64;
            preds.push(vcdet::alignment::SegmentMatch {
                query_id: base.query_id.clone(),
                ref_id: "r0".into(),
                q_start: base.q_start + dx,
                q_end: base.q_end + dx,
                r_start: base.r_start + dy,
                r_end: base.r_end + dy,
                score,
            });
        }
        let got = matching_muap(&preds, &gt).unwrap();
        let want = grid_muap(&preds, &gt, 0.1);
        assert!((got - want).abs() < 2e-2, "{got} vs {want}");
    }

    let elapsed = start.elapsed().as_secs_f64();
    report(
        3,
        "metric oracle equivalence",
        elapsed < 30.0,
        &format!("100 AP + 50 area instances in {elapsed:.2}s"),
    );
}

/// Grid-rasterization oracle for the matching metric: per-pair planes,
/// cell-center membership tests, global precision/recall walk.
fn grid_muap(preds: &[vcdet::alignment::SegmentMatch], gt: &GroundTruth, cell: f64) -> f64 {
    use std::collections::HashMap;
    #[derive(Clone, Copy)]
    struct R {
        x0: f64,
        x1: f64,
        y0: f64,
        y1: f64,
    }
    let rect = |m: &vcdet::alignment::SegmentMatch| R {
        x0: m.q_start as f64,
        x1: m.q_end as f64,
        y0: m.r_start as f64,
        y1: m.r_end as f64,
    };
    let mut gt_rects: HashMap<(String, String), Vec<R>> = HashMap::new();
    for r in gt.records() {
        gt_rects
            .entry((r.query_id.clone(), r.ref_id.clone()))
            .or_default()
            .push(rect(r));
    }
    let rasterize = |rects: &[R], other: &[R]| -> (f64, f64) {
        if rects.is_empty() {
            return (0.0, 0.0);
        }
        let xs: Vec<f64> = rects.iter().chain(other).flat_map(|r| [r.x0, r.x1]).collect();
        let ys: Vec<f64> = rects.iter().chain(other).flat_map(|r| [r.y0, r.y1]).collect();
        let x_min = xs.iter().cloned().fold(f64::MAX, f64::min);
        let x_max = xs.iter().cloned().fold(f64::MIN, f64::max);
        let y_min = ys.iter().cloned().fold(f64::MAX, f64::min);
        let y_max = ys.iter().cloned().fold(f64::MIN, f64::max);
        let nx = ((x_max - x_min) / cell).ceil() as usize + 1;
        let ny = ((y_max - y_min) / cell).ceil() as usize + 1;
        let mut area = 0.0;
        let mut inter = 0.0;
        for ix in 0..nx {
            let cx = x_min + (ix as f64 + 0.5) * cell;
            for iy in 0..ny {
                let cy = y_min + (iy as f64 + 0.5) * cell;
                let inside = |r: &R| r.x0 <= cx && cx <= r.x1 && r.y0 <= cy && cy <= r.y1;
                if rects.iter().any(inside) {
                    area += cell * cell;
                    if other.iter().any(inside) {
                        inter += cell * cell;
                    }
                }
            }
        }
        (area, inter)
    };
    let total_gt: f64 = gt_rects.values().map(|rs| rasterize(rs, &[]).0).sum();
    let mut sorted: Vec<&vcdet::alignment::SegmentMatch> = preds.iter().collect();
    sorted.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.query_id.cmp(&b.query_id))
            .then_with(|| a.ref_id.cmp(&b.ref_id))
            .then_with(|| a.q_start.total_cmp(&b.q_start))
            .then_with(|| a.r_start.total_cmp(&b.r_start))
    });
    let empty: Vec<R> = Vec::new();
    let mut by_pair: HashMap<(String, String), Vec<R>> = HashMap::new();
    let mut muap = 0.0;
    let mut prev_recall = 0.0;
    for m in sorted {
        by_pair
            .entry((m.query_id.clone(), m.ref_id.clone()))
            .or_default()
            .push(rect(m));
        let mut pred_total = 0.0;
        let mut covered = 0.0;
        for (key, rects) in &by_pair {
            let gts = gt_rects.get(key).unwrap_or(&empty);
            let (area, inter) = rasterize(rects, gts);
            pred_total += area;
            covered += inter;
        }
        let recall = covered / total_gt;
        let precision = if pred_total > 0.0 { covered / pred_total } else { 0.0 };
        muap += precision * (recall - prev_recall);
        prev_recall = recall;
    }
    muap
}

/// Criterion 4: consistency weighting reproduces the hand-computed scalars
/// exactly and preserves per-frame argmax on 1000 random videos.
#[test]
fn criterion_4_consistency_weighting_exactness() {
    // n identical unit rows: gram mean exactly 1, output unchanged.
    let ident = DescriptorSet::new(
        "a".into(),
        vec![0.0, 1.0, 2.0],
        Array2::from_elem((3, 4), 0.5),
    )
    .unwrap();
    let (out, stats) = consistency_weight(&ident);
    assert_eq!(stats.gram_mean, 1.0);
    assert_eq!(out.matrix(), ident.matrix());

    // Single unit frame.
    let single = DescriptorSet::new(
        "b".into(),
        vec![0.0],
        Array2::from_shape_vec((1, 3), vec![0.0, 1.0, 0.0]).unwrap(),
    )
    .unwrap();
    let (out, stats) = consistency_weight(&single);
    assert_eq!(stats.gram_mean, 1.0);
    assert_eq!(out.matrix(), single.matrix());

    // Orthonormal pair: gram mean exactly (1+0+0+1)/4 = 0.5, output 2X.
    let ortho = DescriptorSet::new(
        "c".into(),
        vec![0.0, 1.0],
        Array2::from_shape_vec((2, 2), vec![1.0, 0.0, 0.0, 1.0]).unwrap(),
    )
    .unwrap();
    let (out, stats) = consistency_weight(&ortho);
    assert_eq!(stats.gram_mean, 0.5);
    assert_eq!(out.matrix()[[0, 0]], 2.0);
    assert_eq!(out.matrix()[[1, 1]], 2.0);

    // Positive rescaling preserves which frame best matches any reference.
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for _ in 0..1000 {
        let n = rng.random_range(2..=12);
        let d = rng.random_range(2..=24);
        let set = DescriptorSet::new(
            "v".into(),
            (0..n).map(|i| i as f32).collect(),
            unit_rows(&mut rng, n, d),
        )
        .unwrap();
        let reference: Vec<f32> = (0..d)
            .map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng) as f32)
            .collect();
        let (weighted, _) = consistency_weight(&set);
        let argmax = |m: &Array2<f32>| -> usize {
            let mut best = 0;
            let mut best_v = f32::NEG_INFINITY;
            for (i, row) in m.rows().into_iter().enumerate() {
                let v: f32 = row.iter().zip(&reference).map(|(a, b)| a * b).sum();
                if v > best_v {
                    best_v = v;
                    best = i;
                }
            }
            best
        };
        assert_eq!(argmax(set.matrix()), argmax(weighted.matrix()));
    }
    report(4, "consistency weighting exactness", true, "3 exact cases + 1000 argmax checks");
}

/// Criterion 5: PCA orthonormality within 1e-5, variance conservation
/// within 1e-4 relative, rank-k reconstruction within 1e-4; under 10 s.
#[test]
fn criterion_5_pca_numerics() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    for _ in 0..10 {
        let d = rng.random_range(4..=64);
        let m = rng.random_range(d.max(10)..=1000);
        let samples = Array2::from_shape_fn((m, d), |_| {
            <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng) as f32
        });
        let k = rng.random_range(1..=d);
        let model = pca_fit(samples.view(), k).unwrap();

        let gram = model.components().dot(&model.components().t());
        for i in 0..k {
            for j in 0..k {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((gram[[i, j]] - target).abs() <= 1e-5);
            }
        }

        // Full-rank fit conserves total variance against the trace.
        let full = pca_fit(samples.view(), d).unwrap();
        let x = samples.mapv(|v| v as f64);
        let mean = x.mean_axis(ndarray::Axis(0)).unwrap();
        let mut trace = 0.0;
        for c in 0..d {
            let col = x.column(c);
            trace += col.iter().map(|v| (v - mean[c]).powi(2)).sum::<f64>() / (m as f64 - 1.0);
        }
        let total: f64 = full.explained_variance().sum();
        assert!((total - trace).abs() <= 1e-4 * trace, "{total} vs {trace}");

        // Rank-k data reconstructs through the k-component model.
        let k_data = rng.random_range(1..=d.min(8));
        let basis = pca_fit(
            Array2::from_shape_fn((d.max(k_data + 1), d), |_| {
                <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng) as f32
            })
            .view(),
            k_data,
        )
        .unwrap();
        let coeffs = Array2::from_shape_fn((200, k_data), |_| {
            <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng) as f32
        });
        let low_rank = coeffs.dot(&basis.components().mapv(|v| v as f32)) ;
        let model = pca_fit(low_rank.view(), k_data).unwrap();
        for row in low_rank.rows().into_iter().take(20) {
            let y = model.transform(row).unwrap();
            let back = model.reconstruct(y.view()).unwrap();
            for (a, b) in row.iter().zip(back.iter()) {
                assert!((a - b).abs() < 1e-4, "{a} vs {b}");
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    report(5, "pca numerics", elapsed < 10.0, &format!("10 fits in {elapsed:.2}s"));
}

/// Criterion 6: on the pinned synthetic config, descriptor muAP never
/// decreases across the four cumulative ablation rows, the full pipeline
/// beats the baseline by at least 0.05 absolute, and the full pipeline's
/// matching muAP beats the baseline's. Under 2 minutes.
#[test]
fn criterion_6_synthetic_ablation_trend() {
    let start = Instant::now();
    let cfg = SimConfig {
        seed: 7,
        n_refs: 200,
        n_queries: 60,
        d: 128,
        noise_sigma: 0.35,
        stack_fraction: 0.3,
        ..Default::default()
    };
    let data = generate(&cfg).unwrap();
    let base = DescriptorPipelineConfig {
        score_norm: true,
        ..Default::default()
    };
    let tn = TnConfig::default();
    let rows = ablation_report(
        &base,
        &tn,
        &AblationData {
            queries: &data.queries,
            views: Some(&data.query_views),
            labels: &data.labels,
            refs: &data.refs,
            noise: &data.noise,
            gt: &data.gt,
        },
    )
    .unwrap();
    assert_eq!(rows.len(), 4);
    let desc: Vec<f64> = rows.iter().map(|r| r.descriptor_muap).collect();
    let non_decreasing = desc.windows(2).all(|w| w[1] >= w[0]);
    let gain = desc[3] - desc[0];
    let matching_improved = rows[3].matching_muap > rows[0].matching_muap;
    let elapsed = start.elapsed().as_secs_f64();
    report(
        6,
        "synthetic ablation trend",
        non_decreasing && gain >= 0.05 && matching_improved && elapsed < 120.0,
        &format!(
            "descriptor {:.4} -> {:.4} -> {:.4} -> {:.4}, matching {:.4} -> {:.4}, {elapsed:.1}s",
            desc[0], desc[1], desc[2], desc[3], rows[0].matching_muap, rows[3].matching_muap
        ),
    );
}

/// Criterion 7: at noise_sigma <= 0.2, every planted segment whose pair was
/// retrieved is localized with Jaccard >= 0.7 on both time axes.
///
/// Candidates come from the full retrieval pipeline. The matching corpora
/// keep the multi-view merge and temporal concat but skip consistency
/// weighting: the weighting rescales similarities per query, which would
/// detach the node-admission threshold from the raw similarity scale.
#[test]
fn criterion_7_localization_quality() {
    for sigma in [0.15, 0.2] {
        let cfg = SimConfig {
            seed: 7,
            n_refs: 200,
            n_queries: 60,
            d: 128,
            noise_sigma: sigma,
            stack_fraction: 0.3,
            ..Default::default()
        };
        let data = generate(&cfg).unwrap();
        let retrieval_cfg = DescriptorPipelineConfig {
            multi_view: true,
            consistency_weight: true,
            temporal_concat: true,
            score_norm: true,
            ..Default::default()
        };
        let ranked = pipeline_descriptor_track(
            &data.queries,
            Some(&data.query_views),
            &data.labels,
            &data.refs,
            &data.noise,
            &retrieval_cfg,
        )
        .unwrap();
        let matching_cfg = DescriptorPipelineConfig {
            multi_view: true,
            temporal_concat: true,
            ..Default::default()
        };
        let processed = pipeline_descriptor_track(
            &data.queries,
            Some(&data.query_views),
            &data.labels,
            &data.refs,
            &data.noise,
            &matching_cfg,
        )
        .unwrap();
        let flat: Vec<CandidatePair> = ranked.candidates.iter().flatten().cloned().collect();
        let retrieved: HashSet<(String, String)> = flat
            .iter()
            .map(|c| (c.query_id.clone(), c.ref_id.clone()))
            .collect();
        let tn = TnConfig {
            sim_threshold: 0.6,
            ..Default::default()
        };
        let segments =
            pipeline_matching_track(&flat, &processed.queries, &processed.refs, &tn).unwrap();

        let jaccard = |a0: f32, a1: f32, b0: f32, b1: f32| -> f64 {
            let inter = (a1.min(b1) - a0.max(b0)).max(0.0) as f64;
            let union = (a1.max(b1) - a0.min(b0)) as f64;
            if union == 0.0 {
                1.0
            } else {
                inter / union
            }
        };
        let mut checked = 0;
        let mut worst: f64 = 1.0;
        for rec in data.gt.records() {
            if !retrieved.contains(&(rec.query_id.clone(), rec.ref_id.clone())) {
                continue;
            }
            checked += 1;
            let best = segments
                .iter()
                .filter(|s| s.query_id == rec.query_id && s.ref_id == rec.ref_id)
                .map(|s| {
                    jaccard(s.q_start, s.q_end, rec.q_start, rec.q_end)
                        .min(jaccard(s.r_start, s.r_end, rec.r_start, rec.r_end))
                })
                .fold(f64::NEG_INFINITY, f64::max);
            worst = worst.min(best);
        }
        report(
            7,
            "localization quality",
            checked > 0 && worst >= 0.7,
            &format!("sigma={sigma}: worst dual-axis jaccard {worst:.3} over {checked} retrieved plants"),
        );
    }
}

/// Criterion 8: reruns of every command produce byte-identical outputs,
/// independent of the thread count.
#[test]
fn criterion_8_command_determinism() {
    use std::fs;
    use std::process::Command;

    let bin = env!("CARGO_BIN_EXE_vcdet");
    let root = tempfile::tempdir().unwrap();
    let dir = |name: &str| root.path().join(name).to_str().unwrap().to_string();

    let run = |args: &[&str]| {
        let out = Command::new(bin).args(args).output().unwrap();
        assert!(
            out.status.success(),
            "vcdet {args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    };
    let snapshot = |d: &str| -> Vec<(String, Vec<u8>)> {
        let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(d)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        files
    };

    let gen_args = |out: &str, threads: &str| {
        vec![
            "gen".to_string(),
            "--seed".into(), "7".into(),
            "--refs".into(), "50".into(),
            "--queries".into(), "20".into(),
            "--dim".into(), "64".into(),
            "--stack-fraction".into(), "0.3".into(),
            "--threads".into(), threads.into(),
            "--out".into(), out.into(),
        ]
    };
    for (out, threads) in [(dir("gen_a"), "1"), (dir("gen_b"), "4")] {
        let args = gen_args(&out, threads);
        run(&args.iter().map(String::as_str).collect::<Vec<_>>());
    }
    assert_eq!(snapshot(&dir("gen_a")), snapshot(&dir("gen_b")));

    let data = dir("gen_a");
    let desc_args = |out: &str, threads: &str| {
        vec![
            "descriptor".to_string(),
            "--queries".into(), format!("{data}/queries.vdsc"),
            "--refs".into(), format!("{data}/refs.vdsc"),
            "--noise".into(), format!("{data}/noise.vdsc"),
            "--views".into(), format!("{data}/query_views.vdsc"),
            "--labels".into(), format!("{data}/edit_labels.csv"),
            "--multi-view".into(),
            "--consistency-weight".into(),
            "--temporal-concat".into(),
            "--score-norm".into(),
            "--threads".into(), threads.into(),
            "--out".into(), out.into(),
        ]
    };
    for (out, threads) in [(dir("desc_a"), "1"), (dir("desc_b"), "4")] {
        let args = desc_args(&out, threads);
        run(&args.iter().map(String::as_str).collect::<Vec<_>>());
    }
    assert_eq!(snapshot(&dir("desc_a")), snapshot(&dir("desc_b")));

    let desc = dir("desc_a");
    let match_args = |out: &str, threads: &str| {
        vec![
            "match".to_string(),
            "--candidates".into(), format!("{desc}/candidates.csv"),
            "--queries".into(), format!("{desc}/queries_processed.vdsc"),
            "--refs".into(), format!("{desc}/refs_processed.vdsc"),
            "--threads".into(), threads.into(),
            "--out".into(), out.into(),
        ]
    };
    for (out, threads) in [(dir("match_a"), "1"), (dir("match_b"), "3")] {
        let args = match_args(&out, threads);
        run(&args.iter().map(String::as_str).collect::<Vec<_>>());
    }
    assert_eq!(snapshot(&dir("match_a")), snapshot(&dir("match_b")));

    let eval_args = |out: &str, threads: &str| {
        vec![
            "eval".to_string(),
            "--gt".into(), format!("{data}/ground_truth.csv"),
            "--candidates".into(), format!("{desc}/candidates.csv"),
            "--matches".into(), format!("{}/matches.csv", dir("match_a")),
            "--threads".into(), threads.into(),
            "--out".into(), out.into(),
        ]
    };
    for (out, threads) in [(dir("eval_a"), "1"), (dir("eval_b"), "2")] {
        let args = eval_args(&out, threads);
        run(&args.iter().map(String::as_str).collect::<Vec<_>>());
    }
    assert_eq!(snapshot(&dir("eval_a")), snapshot(&dir("eval_b")));

    report(8, "command determinism", true, "gen/descriptor/match/eval byte-identical across reruns and thread counts");
}
