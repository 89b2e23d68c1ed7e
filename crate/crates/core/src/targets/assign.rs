use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{enclosing_hbox, hbox_iou, rotated_iou, HorizontalBox, RotatedBox};
use crate::rng::DetRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Positive,
    Negative,
    Ignore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignConfig {
    pub pos_iou: f64,
    pub neg_iou: f64,
    /// Samples drawn per image (the classification normalizer).
    pub batch: usize,
    pub pos_fraction: f64,
    /// Promote each ground truth's best-overlapping candidate to positive
    /// regardless of thresholds.
    pub force_gt_coverage: bool,
}

impl AssignConfig {
    /// First stage: 0.7 / 0.3 thresholds, 256 samples split evenly.
    pub fn rpn() -> Self {
        AssignConfig {
            pos_iou: 0.7,
            neg_iou: 0.3,
            batch: 256,
            pos_fraction: 0.5,
            force_gt_coverage: true,
        }
    }

    /// Second stage: single 0.5 threshold, 512 samples with up to 128 positives.
    pub fn rroi() -> Self {
        AssignConfig {
            pos_iou: 0.5,
            neg_iou: 0.5,
            batch: 512,
            pos_fraction: 0.25,
            force_gt_coverage: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.neg_iou)
            && (0.0..=1.0).contains(&self.pos_iou)
            && self.neg_iou <= self.pos_iou
            && self.pos_fraction > 0.0
            && self.pos_fraction <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid assignment config {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub labels: Vec<Label>,
    /// Ground-truth index for positives, `None` otherwise.
    pub matched: Vec<Option<usize>>,
    /// Best IoU against any ground truth (0 when there are none).
    pub max_iou: Vec<f64>,
}

impl Assignment {
    pub fn num_positive(&self) -> usize {
        self.labels.iter().filter(|l| **l == Label::Positive).count()
    }
}

/// Labels candidates from a row-major `n_cand x n_gt` IoU matrix.
/// `dist2(i, g)` breaks coverage ties when a ground truth overlaps nothing.
fn assign_from_matrix(
    ious: &[f64],
    n_cand: usize,
    n_gt: usize,
    cfg: &AssignConfig,
    dist2: impl Fn(usize, usize) -> f64,
) -> Assignment {
    let mut labels = vec![Label::Negative; n_cand];
    let mut matched = vec![None; n_cand];
    let mut max_iou = vec![0.0; n_cand];
    if n_gt == 0 {
        return Assignment {
            labels,
            matched,
            max_iou,
        };
    }

    for i in 0..n_cand {
        let row = &ious[i * n_gt..(i + 1) * n_gt];
        let (best_g, best) =
            row.iter().copied().enumerate().fold(
                (0, f64::NEG_INFINITY),
                |acc, (g, v)| if v > acc.1 { (g, v) } else { acc },
            );
        max_iou[i] = best;
        if best >= cfg.pos_iou {
            labels[i] = Label::Positive;
            matched[i] = Some(best_g);
        } else if best < cfg.neg_iou {
            labels[i] = Label::Negative;
        } else {
            labels[i] = Label::Ignore;
        }
    }

    if cfg.force_gt_coverage && n_cand > 0 {
        // best IoU that forced each candidate, for candidates forced by several GTs
        let mut forced_by: Vec<Option<(usize, f64)>> = vec![None; n_cand];
        for g in 0..n_gt {
            let col_max = (0..n_cand)
                .map(|i| ious[i * n_gt + g])
                .fold(f64::NEG_INFINITY, f64::max);
            let winners: Vec<usize> = if col_max > 0.0 {
                (0..n_cand).filter(|&i| ious[i * n_gt + g] == col_max).collect()
            } else {
                let nearest = (0..n_cand)
                    .min_by(|&a, &b| dist2(a, g).total_cmp(&dist2(b, g)))
                    .unwrap_or(0);
                vec![nearest]
            };
            for i in winners {
                if labels[i] == Label::Positive && forced_by[i].is_none() {
                    continue;
                }
                let v = ious[i * n_gt + g];
                if forced_by[i].is_none_or(|(_, prev)| v > prev) {
                    forced_by[i] = Some((g, v));
                    labels[i] = Label::Positive;
                    matched[i] = Some(g);
                }
            }
        }
    }

    Assignment {
        labels,
        matched,
        max_iou,
    }
}

/// First-stage assignment: horizontal anchors against the horizontal
/// enclosing boxes of the rotated ground truths.
pub fn assign_rpn(anchors: &[HorizontalBox], gts: &[RotatedBox], cfg: &AssignConfig) -> Result<Assignment> {
    cfg.validate()?;
    let hgts: Vec<HorizontalBox> = gts.iter().map(enclosing_hbox).collect();
    let n_gt = hgts.len();
    let mut ious = vec![0.0; anchors.len() * n_gt];
    for (i, a) in anchors.iter().enumerate() {
        for (g, h) in hgts.iter().enumerate() {
            ious[i * n_gt + g] = hbox_iou(a, h);
        }
    }
    Ok(assign_from_matrix(&ious, anchors.len(), n_gt, cfg, |i, g| {
        let (dx, dy) = (anchors[i].cx - hgts[g].cx, anchors[i].cy - hgts[g].cy);
        dx * dx + dy * dy
    }))
}

/// Second-stage assignment by rotated IoU.
pub fn assign_rroi(proposals: &[RotatedBox], gts: &[RotatedBox], cfg: &AssignConfig) -> Result<Assignment> {
    cfg.validate()?;
    let n_gt = gts.len();
    let mut ious = vec![0.0; proposals.len() * n_gt];
    for (i, p) in proposals.iter().enumerate() {
        for (g, t) in gts.iter().enumerate() {
            ious[i * n_gt + g] = rotated_iou(p, t);
        }
    }
    Ok(assign_from_matrix(&ious, proposals.len(), n_gt, cfg, |i, g| {
        let (dx, dy) = (proposals[i].cx - gts[g].cx, proposals[i].cy - gts[g].cy);
        dx * dx + dy * dy
    }))
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Minibatch {
    pub positives: Vec<usize>,
    pub negatives: Vec<usize>,
}

impl Minibatch {
    /// Positives first, then negatives.
    pub fn indices(&self) -> Vec<usize> {
        self.positives.iter().chain(&self.negatives).copied().collect()
    }

    pub fn len(&self) -> usize {
        self.positives.len() + self.negatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Draws up to `batch * pos_fraction` positives and fills the rest of the
/// batch with negatives. Ignored candidates are never drawn.
pub fn sample_minibatch(labels: &[Label], cfg: &AssignConfig, seed: u64) -> Result<Minibatch> {
    cfg.validate()?;
    let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == Label::Positive).collect();
    let neg: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == Label::Negative).collect();

    let quota = (cfg.batch as f64 * cfg.pos_fraction).floor() as usize;
    let mut rng = DetRng::new(seed);
    let positives = rng.choose(&pos, quota);
    let negatives = rng.choose(&neg, cfg.batch - positives.len());
    let mb = Minibatch { positives, negatives };
    if mb.is_empty() {
        log::warn!("minibatch sampling found no positive or negative candidates");
    }
    Ok(mb)
}
