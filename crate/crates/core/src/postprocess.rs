//! Score filtering, polygon NMS and the oriented proposal pipeline.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{normalize_angle, rotated_iou, HorizontalBox, RotatedBox};
use crate::targets::{decode_hdelta, decode_transform, HorizontalDelta, TransformParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(rename = "box")]
    pub rbox: RotatedBox,
    pub score: f64,
    pub class_id: usize,
}

impl Detection {
    pub fn new(rbox: RotatedBox, score: f64, class_id: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::InvalidBox(format!("score {score} outside [0, 1]")));
        }
        Ok(Detection { rbox, score, class_id })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmsConfig {
    /// Candidates overlapping a kept box by at least this much are dropped.
    pub iou_thresh: f64,
    /// Suppress across classes instead of within each class.
    pub class_agnostic: bool,
}

/// Indices sorted by descending score, input order on ties.
fn score_order(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .score
            .partial_cmp(&dets[a].score)
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

/// Greedy polygon NMS, class-wise. Returns kept indices in descending score order.
pub fn rotated_nms(dets: &[Detection], iou_thresh: f64) -> Vec<usize> {
    rotated_nms_with(
        dets,
        &NmsConfig {
            iou_thresh,
            class_agnostic: false,
        },
    )
}

pub fn rotated_nms_with(dets: &[Detection], cfg: &NmsConfig) -> Vec<usize> {
    let order = score_order(dets);
    let mut rank = vec![0usize; dets.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    let grid = Grid::new(dets);

    let mut suppressed = vec![false; dets.len()];
    let mut stamp = vec![usize::MAX; dets.len()];
    let mut keep = Vec::new();
    for &i in &order {
        if suppressed[i] {
            continue;
        }
        keep.push(i);
        // only boxes sharing a grid cell can overlap
        grid.for_each_near(i, |j| {
            if stamp[j] == i || rank[j] <= rank[i] || suppressed[j] {
                return;
            }
            stamp[j] = i;
            if !cfg.class_agnostic && dets[j].class_id != dets[i].class_id {
                return;
            }
            if grid.overlaps(i, j) && rotated_iou(&dets[i].rbox, &dets[j].rbox) >= cfg.iou_thresh {
                suppressed[j] = true;
            }
        });
    }
    keep
}

/// Uniform bucket grid over axis-aligned extents.
struct Grid {
    extents: Vec<(f64, f64, f64, f64)>,
    origin: (f64, f64),
    cell: f64,
    cols: usize,
    rows: usize,
    cells: Vec<Vec<usize>>,
}

impl Grid {
    const MAX_CELLS: usize = 1 << 16;

    fn new(dets: &[Detection]) -> Self {
        let extents: Vec<(f64, f64, f64, f64)> = dets.iter().map(|d| d.rbox.vertices().bounds()).collect();
        let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        let mut mean = 0.0;
        for e in &extents {
            x0 = x0.min(e.0);
            y0 = y0.min(e.1);
            x1 = x1.max(e.2);
            y1 = y1.max(e.3);
            mean += (e.2 - e.0).max(e.3 - e.1);
        }
        if extents.is_empty() {
            return Grid {
                extents,
                origin: (0.0, 0.0),
                cell: 1.0,
                cols: 0,
                rows: 0,
                cells: Vec::new(),
            };
        }
        mean /= extents.len() as f64;
        let span = (x1 - x0).max(y1 - y0).max(f64::MIN_POSITIVE);
        let floor = span / (Self::MAX_CELLS as f64).sqrt();
        let cell = mean.max(floor).max(f64::MIN_POSITIVE);
        let cols = (((x1 - x0) / cell) as usize + 1).min(Self::MAX_CELLS);
        let rows = (((y1 - y0) / cell) as usize + 1).min(Self::MAX_CELLS / cols);
        let mut grid = Grid {
            extents,
            origin: (x0, y0),
            cell,
            cols,
            rows,
            cells: vec![Vec::new(); cols * rows],
        };
        for i in 0..grid.extents.len() {
            let (c0, r0, c1, r1) = grid.span_of(i);
            for r in r0..=r1 {
                for c in c0..=c1 {
                    grid.cells[r * cols + c].push(i);
                }
            }
        }
        grid
    }

    fn span_of(&self, i: usize) -> (usize, usize, usize, usize) {
        let (x0, y0, x1, y1) = self.extents[i];
        let idx = |v: f64, o: f64, n: usize| (((v - o) / self.cell).max(0.0) as usize).min(n - 1);
        (
            idx(x0, self.origin.0, self.cols),
            idx(y0, self.origin.1, self.rows),
            idx(x1, self.origin.0, self.cols),
            idx(y1, self.origin.1, self.rows),
        )
    }

    fn for_each_near(&self, i: usize, mut f: impl FnMut(usize)) {
        let (c0, r0, c1, r1) = self.span_of(i);
        for r in r0..=r1 {
            for c in c0..=c1 {
                for &j in &self.cells[r * self.cols + c] {
                    f(j);
                }
            }
        }
    }

    fn overlaps(&self, a: usize, b: usize) -> bool {
        let (ax0, ay0, ax1, ay1) = self.extents[a];
        let (bx0, by0, bx1, by1) = self.extents[b];
        !(ax1 < bx0 || bx1 < ax0 || ay1 < by0 || by1 < ay0)
    }
}

/// Drops scores at or below `score_thresh`, sorts by descending score
/// (stable) and keeps the first `k`.
pub fn filter_and_topk(dets: &[Detection], score_thresh: f64, k: usize) -> Vec<Detection> {
    let mut kept: Vec<Detection> = dets.iter().filter(|d| d.score > score_thresh).copied().collect();
    kept.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap_or(Ordering::Equal));
    kept.truncate(k);
    kept
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProposalConfig {
    pub score_thresh: f64,
    pub pre_nms_top_k: usize,
    pub nms_iou: f64,
    pub post_nms_top_k: usize,
}

impl Default for ProposalConfig {
    fn default() -> Self {
        ProposalConfig {
            score_thresh: 0.0,
            pre_nms_top_k: 6000,
            nms_iou: 0.7,
            post_nms_top_k: 2000,
        }
    }
}

/// Oriented proposals from per-anchor scores, horizontal deltas and transform
/// parameters. Anchors whose decoded quadrilateral is degenerate are dropped.
/// Returned detections carry class 0.
pub fn proposal_pipeline(
    anchor_scores: &[f64],
    hdeltas: &[HorizontalDelta],
    tparams: &[TransformParams],
    anchors: &[HorizontalBox],
    cfg: &ProposalConfig,
) -> Result<Vec<Detection>> {
    let n = anchors.len();
    if anchor_scores.len() != n || hdeltas.len() != n || tparams.len() != n {
        return Err(Error::Shape(format!(
            "{} anchors, {} scores, {} deltas, {} transforms",
            n,
            anchor_scores.len(),
            hdeltas.len(),
            tparams.len()
        )));
    }

    let mut candidates = Vec::with_capacity(n);
    for i in 0..n {
        let Ok(hprop) = decode_hdelta(&anchors[i], &hdeltas[i]) else {
            continue;
        };
        let Ok(rbox) = decode_transform(&hprop, &tparams[i]) else {
            continue;
        };
        let score = anchor_scores[i].clamp(0.0, 1.0);
        candidates.push(Detection {
            rbox: normalize_angle(&rbox),
            score,
            class_id: 0,
        });
    }

    let pool = filter_and_topk(&candidates, cfg.score_thresh, cfg.pre_nms_top_k);
    let keep = rotated_nms(&pool, cfg.nms_iou);
    Ok(keep.into_iter().take(cfg.post_nms_top_k).map(|i| pool[i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::enclosing_hbox;
    use crate::targets::{encode_hdelta, encode_transform};

    fn det(cx: f64, cy: f64, w: f64, h: f64, t: f64, score: f64, class_id: usize) -> Detection {
        Detection::new(RotatedBox::new(cx, cy, w, h, t).unwrap(), score, class_id).unwrap()
    }

    #[test]
    fn score_validation() {
        let b = RotatedBox::new(0.0, 0.0, 1.0, 1.0, 0.0).unwrap();
        assert!(Detection::new(b, 1.5, 0).is_err());
        assert!(Detection::new(b, f64::NAN, 0).is_err());
    }

    #[test]
    fn nms_duplicates_and_disjoint() {
        let d = [
            det(0.0, 0.0, 4.0, 2.0, 0.3, 0.8, 0),
            det(0.0, 0.0, 4.0, 2.0, 0.3, 0.9, 0),
        ];
        assert_eq!(rotated_nms(&d, 0.1), vec![1]);

        let d = [
            det(0.0, 0.0, 4.0, 2.0, 0.3, 0.8, 0),
            det(50.0, 0.0, 4.0, 2.0, 0.3, 0.9, 0),
        ];
        assert_eq!(rotated_nms(&d, 0.1), vec![1, 0]);
        assert!(rotated_nms(&[], 0.5).is_empty());
    }

    #[test]
    fn nms_class_wise_and_agnostic() {
        let d = [
            det(0.0, 0.0, 4.0, 2.0, 0.0, 0.9, 0),
            det(0.0, 0.0, 4.0, 2.0, 0.0, 0.8, 1),
        ];
        assert_eq!(rotated_nms(&d, 0.5), vec![0, 1]);
        let cfg = NmsConfig {
            iou_thresh: 0.5,
            class_agnostic: true,
        };
        assert_eq!(rotated_nms_with(&d, &cfg), vec![0]);
    }

    #[test]
    fn nms_threshold_is_inclusive_for_suppression() {
        // IoU exactly 1/3
        let d = [
            det(0.0, 0.0, 2.0, 2.0, 0.0, 0.9, 0),
            det(1.0, 0.0, 2.0, 2.0, 0.0, 0.8, 0),
        ];
        let iou = rotated_iou(&d[0].rbox, &d[1].rbox);
        assert_eq!(rotated_nms(&d, iou), vec![0]);
        assert_eq!(rotated_nms(&d, iou + 1e-9), vec![0, 1]);
    }

    #[test]
    fn nms_ties_by_index() {
        let d = [
            det(0.0, 0.0, 2.0, 2.0, 0.0, 0.5, 0),
            det(0.0, 0.0, 2.0, 2.0, 0.0, 0.5, 0),
        ];
        assert_eq!(rotated_nms(&d, 0.5), vec![0]);
    }

    #[test]
    fn topk_examples() {
        let d: Vec<Detection> = [0.9, 0.04, 0.5]
            .iter()
            .enumerate()
            .map(|(i, s)| det(i as f64 * 10.0, 0.0, 1.0, 1.0, 0.0, *s, 0))
            .collect();
        let scores: Vec<f64> = filter_and_topk(&d, 0.05, 2).iter().map(|d| d.score).collect();
        assert_eq!(scores, vec![0.9, 0.5]);
        assert!(filter_and_topk(&d, 0.95, 10).is_empty());
        assert!(filter_and_topk(&d, 0.0, 0).is_empty());
        // scores equal to the threshold are dropped
        assert_eq!(filter_and_topk(&d, 0.5, 10).len(), 1);
    }

    #[test]
    fn pipeline_identity_chain() {
        let anchors = [
            HorizontalBox::new(10.0, 10.0, 8.0, 4.0).unwrap(),
            HorizontalBox::new(40.0, 10.0, 4.0, 8.0).unwrap(),
        ];
        let out = proposal_pipeline(
            &[0.9, 0.8],
            &[HorizontalDelta::ZERO; 2],
            &[TransformParams::IDENTITY; 2],
            &anchors,
            &ProposalConfig::default(),
        )
        .unwrap();
        assert_eq!(out.len(), 2);
        for (d, a) in out.iter().zip(&anchors) {
            let want = normalize_angle(&a.to_rotated());
            assert!((d.rbox.cx - want.cx).abs() < 1e-12 && (d.rbox.w - want.w).abs() < 1e-12);
            assert_eq!(d.rbox.theta, 0.0);
        }
    }

    #[test]
    fn pipeline_recovers_gt_from_exact_targets() {
        let gt = RotatedBox::new(52.0, 47.0, 30.0, 12.0, 0.5).unwrap();
        let anchor = HorizontalBox::new(50.0, 50.0, 32.0, 32.0).unwrap();
        let hgt = enclosing_hbox(&gt);
        let u = encode_hdelta(&anchor, &hgt);
        let v = encode_transform(&hgt, &gt).unwrap();
        let out = proposal_pipeline(&[0.7], &[u], &[v], &[anchor], &ProposalConfig::default()).unwrap();
        assert_eq!(out.len(), 1);
        let got = out[0].rbox.to_array();
        for (a, b) in got.iter().zip(normalize_angle(&gt).to_array()) {
            assert!((a - b).abs() < 1e-9, "{got:?}");
        }
    }

    #[test]
    fn pipeline_duplicates_and_shape_errors() {
        let a = HorizontalBox::new(10.0, 10.0, 8.0, 4.0).unwrap();
        let out = proposal_pipeline(
            &[0.6, 0.9],
            &[HorizontalDelta::ZERO; 2],
            &[TransformParams::IDENTITY; 2],
            &[a, a],
            &ProposalConfig::default(),
        )
        .unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].score, 0.9);

        let err = proposal_pipeline(&[0.5], &[], &[], &[a], &ProposalConfig::default());
        assert!(matches!(err, Err(Error::Shape(_))));
    }

    #[test]
    fn pipeline_drops_degenerate_transforms() {
        let a = HorizontalBox::new(10.0, 10.0, 8.0, 4.0).unwrap();
        let out = proposal_pipeline(
            &[0.9],
            &[HorizontalDelta::ZERO],
            &[TransformParams::from_array([1.0, 1.0, 1.0, 1.0])],
            &[a],
            &ProposalConfig::default(),
        )
        .unwrap();
        assert!(out.is_empty());
    }
}
