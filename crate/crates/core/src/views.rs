//! Multi-crop geometry, per-view descriptor merging, and edit-label routing.
//!
//! Stacked or overlaid copies only match part of the query frame, so for
//! edited queries descriptors are extracted from sub-crops as well as the
//! full frame. The per-view sequences are merged into one descriptor set by
//! interleaving rows per frame time, repeating the timestamp once per view.

use std::collections::BTreeMap;
use std::fmt;

use ndarray::Array2;
use thiserror::Error;

use crate::store::{Corpus, DescriptorSet, StoreError};

/// Suffix separating a base video id from its view index in per-view files,
/// e.g. `q0001@v0`.
pub const VIEW_SUFFIX: &str = "@v";

#[derive(Debug, Error)]
pub enum ViewsError {
    #[error("frame {width}x{height} is too small to crop")]
    DegenerateFrame { width: u32, height: u32 },
    #[error("merge_views needs at least one view")]
    NoViews,
    #[error("view {index} ({field}) does not match view 0")]
    ViewMismatch { index: usize, field: &'static str },
    #[error("labels line {line}: unknown label {label:?}")]
    UnknownLabel { line: usize, label: String },
    #[error("labels line {line}: expected video_id,label1|label2|...")]
    BadLabelRow { line: usize },
    #[error("labels line {line}: `none` excludes all other labels")]
    NoneNotAlone { line: usize },
    #[error("labels line {line}: duplicate video id {video_id}")]
    DuplicateLabelRow { line: usize, video_id: String },
    #[error("view id {id:?} is missing the {VIEW_SUFFIX}<index> suffix")]
    MissingViewSuffix { id: String },
    #[error("video {video_id}: view indices are not contiguous from 0")]
    NonContiguousViews { video_id: String },
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Pixel rectangle: origin plus size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CropBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

/// Which crops to extract for a query frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CropScheme {
    /// Top and bottom halves, for vertically stacked composites.
    TwoViewVertical,
    /// Left and right halves, for horizontally stacked composites.
    TwoViewHorizontal,
    /// The four quadrants, for grid stacking.
    FourView,
    /// Full frame plus the four quadrants, for all other manipulations.
    FiveView,
    /// Full frame only.
    FullOnly,
}

impl CropScheme {
    pub fn view_count(self) -> usize {
        match self {
            CropScheme::TwoViewVertical | CropScheme::TwoViewHorizontal => 2,
            CropScheme::FourView => 4,
            CropScheme::FiveView => 5,
            CropScheme::FullOnly => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CropScheme::TwoViewVertical => "two_view_vertical",
            CropScheme::TwoViewHorizontal => "two_view_horizontal",
            CropScheme::FourView => "four_view",
            CropScheme::FiveView => "five_view",
            CropScheme::FullOnly => "full_only",
        }
    }
}

/// Crop rectangles for a frame. Odd dimensions split at floor(dim/2), with
/// the second box taking the remainder.
pub fn crop_boxes(
    scheme: CropScheme,
    frame_w: u32,
    frame_h: u32,
) -> Result<Vec<CropBox>, ViewsError> {
    if frame_w < 2 || frame_h < 2 {
        return Err(ViewsError::DegenerateFrame {
            width: frame_w,
            height: frame_h,
        });
    }
    let full = CropBox {
        x: 0,
        y: 0,
        w: frame_w,
        h: frame_h,
    };
    let half_w = frame_w / 2;
    let half_h = frame_h / 2;
    let quadrants = [
        CropBox { x: 0, y: 0, w: half_w, h: half_h },
        CropBox { x: half_w, y: 0, w: frame_w - half_w, h: half_h },
        CropBox { x: 0, y: half_h, w: half_w, h: frame_h - half_h },
        CropBox { x: half_w, y: half_h, w: frame_w - half_w, h: frame_h - half_h },
    ];
    Ok(match scheme {
        CropScheme::TwoViewVertical => vec![
            CropBox { x: 0, y: 0, w: frame_w, h: half_h },
            CropBox { x: 0, y: half_h, w: frame_w, h: frame_h - half_h },
        ],
        CropScheme::TwoViewHorizontal => vec![
            CropBox { x: 0, y: 0, w: half_w, h: frame_h },
            CropBox { x: half_w, y: 0, w: frame_w - half_w, h: frame_h },
        ],
        CropScheme::FourView => quadrants.to_vec(),
        CropScheme::FiveView => {
            let mut boxes = vec![full];
            boxes.extend_from_slice(&quadrants);
            boxes
        }
        CropScheme::FullOnly => vec![full],
    })
}

/// Predicted manipulation kinds for one query video.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EditLabel {
    StackVertical,
    StackHorizontal,
    StackGrid,
    Overlay,
    Other,
    None,
}

impl EditLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            EditLabel::StackVertical => "stack_vertical",
            EditLabel::StackHorizontal => "stack_horizontal",
            EditLabel::StackGrid => "stack_grid",
            EditLabel::Overlay => "overlay",
            EditLabel::Other => "other",
            EditLabel::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<EditLabel> {
        Some(match s {
            "stack_vertical" => EditLabel::StackVertical,
            "stack_horizontal" => EditLabel::StackHorizontal,
            "stack_grid" => EditLabel::StackGrid,
            "overlay" => EditLabel::Overlay,
            "other" => EditLabel::Other,
            "none" => EditLabel::None,
            _ => return None,
        })
    }
}

impl fmt::Display for EditLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EditLabels {
    pub video_id: String,
    pub labels: std::collections::BTreeSet<EditLabel>,
}

impl EditLabels {
    pub fn new(video_id: String, labels: impl IntoIterator<Item = EditLabel>) -> Self {
        EditLabels {
            video_id,
            labels: labels.into_iter().collect(),
        }
    }
}

/// Map predicted labels to a crop scheme. More specific stacking geometry
/// wins when several labels are present.
pub fn route_scheme(labels: &EditLabels) -> CropScheme {
    let has = |l: EditLabel| labels.labels.contains(&l);
    if labels.labels.is_empty() || has(EditLabel::None) {
        CropScheme::FullOnly
    } else if has(EditLabel::StackGrid) {
        CropScheme::FourView
    } else if has(EditLabel::StackVertical) {
        CropScheme::TwoViewVertical
    } else if has(EditLabel::StackHorizontal) {
        CropScheme::TwoViewHorizontal
    } else {
        CropScheme::FiveView
    }
}

/// Interleave per-view descriptor rows frame by frame. All views must share
/// the video id, frame count, dim, and the exact timestamp sequence. The
/// output repeats each timestamp once per view, views in input order.
pub fn merge_views(views: &[DescriptorSet]) -> Result<DescriptorSet, ViewsError> {
    let first = views.first().ok_or(ViewsError::NoViews)?;
    if views.len() == 1 {
        return Ok(first.clone());
    }
    for (index, v) in views.iter().enumerate().skip(1) {
        if v.video_id() != first.video_id() {
            return Err(ViewsError::ViewMismatch { index, field: "video_id" });
        }
        if v.n_frames() != first.n_frames() {
            return Err(ViewsError::ViewMismatch { index, field: "frame count" });
        }
        if v.dim() != first.dim() {
            return Err(ViewsError::ViewMismatch { index, field: "dim" });
        }
        if v.timestamps() != first.timestamps() {
            return Err(ViewsError::ViewMismatch { index, field: "timestamps" });
        }
    }
    let n = first.n_frames();
    let d = first.dim();
    let v_count = views.len();
    let mut timestamps = Vec::with_capacity(n * v_count);
    let mut matrix = Array2::zeros((n * v_count, d));
    for frame in 0..n {
        for (v, view) in views.iter().enumerate() {
            timestamps.push(first.timestamps()[frame]);
            matrix.row_mut(frame * v_count + v).assign(&view.matrix().row(frame));
        }
    }
    Ok(DescriptorSet::new(first.video_id().to_string(), timestamps, matrix)?)
}

/// Per-view descriptor sets keyed by base video id. On disk the views of a
/// query live in one corpus under `<id>@v<k>` names; loading strips the
/// suffix and orders views by index.
#[derive(Debug, Clone, Default)]
pub struct ViewStore {
    views: BTreeMap<String, Vec<DescriptorSet>>,
}

impl ViewStore {
    pub fn new() -> Self {
        ViewStore::default()
    }

    pub fn insert(&mut self, video_id: String, views: Vec<DescriptorSet>) {
        self.views.insert(video_id, views);
    }

    pub fn get(&self, video_id: &str) -> Option<&[DescriptorSet]> {
        self.views.get(video_id).map(|v| v.as_slice())
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Vec<DescriptorSet>)> {
        self.views.iter()
    }

    pub fn from_corpus(corpus: &Corpus) -> Result<ViewStore, ViewsError> {
        let mut grouped: BTreeMap<String, Vec<(usize, DescriptorSet)>> = BTreeMap::new();
        for set in corpus.iter() {
            let id = set.video_id();
            let (base, idx) = id
                .rsplit_once(VIEW_SUFFIX)
                .and_then(|(base, idx)| Some((base, idx.parse::<usize>().ok()?)))
                .ok_or_else(|| ViewsError::MissingViewSuffix { id: id.to_string() })?;
            grouped
                .entry(base.to_string())
                .or_default()
                .push((idx, set.with_video_id(base.to_string())));
        }
        let mut store = ViewStore::new();
        for (base, mut views) in grouped {
            views.sort_by_key(|(idx, _)| *idx);
            if views.iter().enumerate().any(|(want, (idx, _))| want != *idx) {
                return Err(ViewsError::NonContiguousViews { video_id: base });
            }
            store.insert(base, views.into_iter().map(|(_, s)| s).collect());
        }
        Ok(store)
    }

    /// Flatten back into a corpus with `<id>@v<k>` names, for VDSC storage.
    pub fn to_corpus(&self, role: crate::store::CorpusRole) -> Result<Corpus, StoreError> {
        let mut corpus = Corpus::new(role);
        for (base, views) in &self.views {
            for (idx, view) in views.iter().enumerate() {
                corpus.push(view.with_video_id(format!("{base}{VIEW_SUFFIX}{idx}")))?;
            }
        }
        Ok(corpus)
    }
}

/// Parse the edit-labels CSV: `video_id,label1|label2|...`, one row per
/// query, no header.
pub fn parse_labels_csv(text: &str) -> Result<Vec<EditLabels>, ViewsError> {
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let (video_id, labels_str) = raw
            .split_once(',')
            .ok_or(ViewsError::BadLabelRow { line })?;
        let video_id = video_id.trim();
        if video_id.is_empty() {
            return Err(ViewsError::BadLabelRow { line });
        }
        if !seen.insert(video_id.to_string()) {
            return Err(ViewsError::DuplicateLabelRow {
                line,
                video_id: video_id.to_string(),
            });
        }
        let mut labels = std::collections::BTreeSet::new();
        for part in labels_str.split('|') {
            let part = part.trim();
            let label = EditLabel::parse(part).ok_or_else(|| ViewsError::UnknownLabel {
                line,
                label: part.to_string(),
            })?;
            labels.insert(label);
        }
        if labels.contains(&EditLabel::None) && labels.len() > 1 {
            return Err(ViewsError::NoneNotAlone { line });
        }
        out.push(EditLabels {
            video_id: video_id.to_string(),
            labels,
        });
    }
    Ok(out)
}

pub fn labels_to_csv(labels: &[EditLabels]) -> String {
    let mut out = String::new();
    for entry in labels {
        let joined = entry
            .labels
            .iter()
            .map(|l| l.as_str())
            .collect::<Vec<_>>()
            .join("|");
        out.push_str(&format!("{},{}\n", entry.video_id, joined));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::CorpusRole;
    use proptest::prelude::*;

    #[test]
    fn two_view_vertical_splits_top_bottom() {
        let boxes = crop_boxes(CropScheme::TwoViewVertical, 100, 100).unwrap();
        assert_eq!(
            boxes,
            vec![
                CropBox { x: 0, y: 0, w: 100, h: 50 },
                CropBox { x: 0, y: 50, w: 100, h: 50 },
            ]
        );
    }

    #[test]
    fn four_view_odd_dims_floor_split() {
        let boxes = crop_boxes(CropScheme::FourView, 101, 101).unwrap();
        assert_eq!(
            boxes,
            vec![
                CropBox { x: 0, y: 0, w: 50, h: 50 },
                CropBox { x: 50, y: 0, w: 51, h: 50 },
                CropBox { x: 0, y: 50, w: 50, h: 51 },
                CropBox { x: 50, y: 50, w: 51, h: 51 },
            ]
        );
    }

    #[test]
    fn five_view_leads_with_full_frame() {
        let boxes = crop_boxes(CropScheme::FiveView, 64, 48).unwrap();
        assert_eq!(boxes.len(), 5);
        assert_eq!(boxes[0], CropBox { x: 0, y: 0, w: 64, h: 48 });
    }

    #[test]
    fn degenerate_frame_rejected() {
        assert!(matches!(
            crop_boxes(CropScheme::FullOnly, 1, 100),
            Err(ViewsError::DegenerateFrame { .. })
        ));
    }

    #[test]
    fn routing_table() {
        let route = |labels: &[EditLabel]| {
            route_scheme(&EditLabels::new("q".into(), labels.iter().copied()))
        };
        assert_eq!(route(&[EditLabel::None]), CropScheme::FullOnly);
        assert_eq!(route(&[EditLabel::StackVertical]), CropScheme::TwoViewVertical);
        assert_eq!(route(&[EditLabel::StackHorizontal]), CropScheme::TwoViewHorizontal);
        assert_eq!(route(&[EditLabel::StackGrid]), CropScheme::FourView);
        assert_eq!(route(&[EditLabel::Overlay, EditLabel::Other]), CropScheme::FiveView);
        // Specific geometry outranks the catch-all views.
        assert_eq!(
            route(&[EditLabel::StackGrid, EditLabel::StackVertical, EditLabel::Other]),
            CropScheme::FourView
        );
        assert_eq!(route(&[]), CropScheme::FullOnly);
    }

    fn view(id: &str, ts: &[f32], fill: f32, d: usize) -> DescriptorSet {
        DescriptorSet::new(
            id.to_string(),
            ts.to_vec(),
            Array2::from_elem((ts.len(), d), fill),
        )
        .unwrap()
    }

    #[test]
    fn single_view_merge_is_identity() {
        let v = view("q", &[0.0, 1.0], 0.5, 3);
        let merged = merge_views(std::slice::from_ref(&v)).unwrap();
        assert_eq!(merged, v);
    }

    #[test]
    fn two_views_repeat_timestamps() {
        let a = view("q", &[0.0, 1.0, 2.0], 0.1, 2);
        let b = view("q", &[0.0, 1.0, 2.0], 0.9, 2);
        let merged = merge_views(&[a, b]).unwrap();
        assert_eq!(merged.n_frames(), 6);
        assert_eq!(merged.timestamps(), &[0.0, 0.0, 1.0, 1.0, 2.0, 2.0]);
        assert_eq!(merged.matrix()[[0, 0]], 0.1);
        assert_eq!(merged.matrix()[[1, 0]], 0.9);
    }

    #[test]
    fn mismatched_views_rejected() {
        let a = view("q", &[0.0, 1.0], 0.1, 2);
        let b = view("q", &[0.0, 2.0], 0.9, 2);
        assert!(matches!(
            merge_views(&[a.clone(), b]),
            Err(ViewsError::ViewMismatch { index: 1, field: "timestamps" })
        ));
        let c = view("r", &[0.0, 1.0], 0.9, 2);
        assert!(matches!(
            merge_views(&[a.clone(), c]),
            Err(ViewsError::ViewMismatch { field: "video_id", .. })
        ));
        let d = view("q", &[0.0, 1.0], 0.9, 3);
        assert!(matches!(
            merge_views(&[a, d]),
            Err(ViewsError::ViewMismatch { field: "dim", .. })
        ));
    }

    #[test]
    fn view_store_round_trips_through_corpus() {
        let mut store = ViewStore::new();
        store.insert(
            "q1".to_string(),
            vec![view("q1", &[0.0], 0.1, 2), view("q1", &[0.0], 0.2, 2)],
        );
        let corpus = store.to_corpus(CorpusRole::Query).unwrap();
        let ids: Vec<_> = corpus.iter().map(|s| s.video_id().to_string()).collect();
        assert_eq!(ids, vec!["q1@v0", "q1@v1"]);
        let back = ViewStore::from_corpus(&corpus).unwrap();
        assert_eq!(back.get("q1").unwrap().len(), 2);
        assert_eq!(back.get("q1").unwrap()[1].matrix()[[0, 0]], 0.2);
    }

    #[test]
    fn view_store_rejects_gaps_and_bad_ids() {
        let mut corpus = Corpus::new(CorpusRole::Query);
        corpus.push(view("q1@v0", &[0.0], 0.1, 2)).unwrap();
        corpus.push(view("q1@v2", &[0.0], 0.2, 2)).unwrap();
        assert!(matches!(
            ViewStore::from_corpus(&corpus),
            Err(ViewsError::NonContiguousViews { .. })
        ));

        let mut corpus = Corpus::new(CorpusRole::Query);
        corpus.push(view("plain", &[0.0], 0.1, 2)).unwrap();
        assert!(matches!(
            ViewStore::from_corpus(&corpus),
            Err(ViewsError::MissingViewSuffix { .. })
        ));
    }

    #[test]
    fn labels_csv_round_trip_and_errors() {
        let text = "q1,stack_vertical\nq2,overlay|other\nq3,none\n";
        let labels = parse_labels_csv(text).unwrap();
        assert_eq!(labels.len(), 3);
        assert_eq!(labels_to_csv(&labels), text);

        match parse_labels_csv("q1,stack_vertical\nq2,wibble\n").unwrap_err() {
            ViewsError::UnknownLabel { line, label } => {
                assert_eq!(line, 2);
                assert_eq!(label, "wibble");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_labels_csv("q1,none|other\n").unwrap_err(),
            ViewsError::NoneNotAlone { line: 1 }
        ));
        assert!(matches!(
            parse_labels_csv("q1,other\nq1,none\n").unwrap_err(),
            ViewsError::DuplicateLabelRow { line: 2, .. }
        ));
    }

    proptest! {
        #[test]
        fn boxes_stay_inside_the_frame(
            w in 2u32..500,
            h in 2u32..500,
            scheme_idx in 0usize..5,
        ) {
            let scheme = [
                CropScheme::TwoViewVertical,
                CropScheme::TwoViewHorizontal,
                CropScheme::FourView,
                CropScheme::FiveView,
                CropScheme::FullOnly,
            ][scheme_idx];
            let boxes = crop_boxes(scheme, w, h).unwrap();
            prop_assert_eq!(boxes.len(), scheme.view_count());
            for b in &boxes {
                prop_assert!(b.w >= 1 && b.h >= 1);
                prop_assert!(b.x + b.w <= w);
                prop_assert!(b.y + b.h <= h);
            }
            // Quadrants tile the frame exactly.
            if scheme == CropScheme::FourView {
                let area: u64 = boxes.iter().map(|b| b.w as u64 * b.h as u64).sum();
                prop_assert_eq!(area, w as u64 * h as u64);
            }
        }

        #[test]
        fn merge_then_deinterleave_recovers_views(
            v_count in 1usize..5,
            n in 1usize..6,
            d in 1usize..4,
            seed in 0u64..1000,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let ts: Vec<f32> = (0..n).map(|i| i as f32 * 0.5).collect();
            let views: Vec<DescriptorSet> = (0..v_count)
                .map(|_| {
                    let m = Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0f32..1.0));
                    DescriptorSet::new("q".to_string(), ts.clone(), m).unwrap()
                })
                .collect();
            let merged = merge_views(&views).unwrap();
            prop_assert_eq!(merged.n_frames(), n * v_count);
            // De-interleave oracle: row (frame * V + v) belongs to view v.
            for (v, view) in views.iter().enumerate() {
                for frame in 0..n {
                    let merged_row = merged.matrix().row(frame * v_count + v);
                    let view_row = view.matrix().row(frame);
                    prop_assert_eq!(merged_row, view_row);
                    prop_assert_eq!(merged.timestamps()[frame * v_count + v], ts[frame]);
                }
            }
        }
    }
}
