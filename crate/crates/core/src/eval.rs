//! Rotated-box mean average precision.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataio::ClassMap;
use crate::error::{Error, Result};
use crate::geom::{rotated_iou, RotatedBox};
use crate::postprocess::Detection;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Interpolation {
    /// Area under the monotone precision envelope.
    #[default]
    AllPoint,
    /// Mean of the envelope at recalls 0, 0.1, ..., 1.
    ElevenPoint,
}

impl FromStr for Interpolation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "allpoint" | "all-point" => Ok(Interpolation::AllPoint),
            "11point" | "11-point" => Ok(Interpolation::ElevenPoint),
            _ => Err(Error::Config(format!("unknown interpolation {s:?}"))),
        }
    }
}

impl fmt::Display for Interpolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Interpolation::AllPoint => "allpoint",
            Interpolation::ElevenPoint => "11point",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub iou_thresh: f64,
    pub interpolation: Interpolation,
    pub ignore_difficult: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            iou_thresh: 0.5,
            interpolation: Interpolation::AllPoint,
            ignore_difficult: true,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iou_thresh > 0.0 && self.iou_thresh <= 1.0 {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "iou threshold {} outside (0, 1]",
                self.iou_thresh
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    #[serde(rename = "box")]
    pub rbox: RotatedBox,
    pub class_id: usize,
    pub difficult: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MatchFlag {
    Tp,
    Fp,
    /// Matched a difficult ground truth; excluded from the curve.
    Ignored,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub per_class_ap: BTreeMap<String, f64>,
    pub map: f64,
}

/// Greedy single-class matching. `dets` must already be in descending score
/// order. Each detection takes the unmatched ground truth it overlaps most
/// (lowest index on ties); it is a TP when that IoU reaches the threshold.
pub fn match_detections(dets: &[RotatedBox], gts: &[GroundTruth], cfg: &EvalConfig) -> Vec<MatchFlag> {
    let mut matched = vec![false; gts.len()];
    dets.iter()
        .map(|d| {
            let mut best: Option<(usize, f64)> = None;
            for (g, gt) in gts.iter().enumerate() {
                if matched[g] {
                    continue;
                }
                let iou = rotated_iou(d, &gt.rbox);
                if best.is_none_or(|(_, b)| iou > b) {
                    best = Some((g, iou));
                }
            }
            match best {
                Some((g, iou)) if iou >= cfg.iou_thresh => {
                    if gts[g].difficult && cfg.ignore_difficult {
                        MatchFlag::Ignored
                    } else {
                        matched[g] = true;
                        MatchFlag::Tp
                    }
                }
                _ => MatchFlag::Fp,
            }
        })
        .collect()
}

/// Average precision from score-ordered flags. `None` when `n_gt == 0`.
pub fn average_precision(flags: &[MatchFlag], n_gt: usize, interpolation: Interpolation) -> Option<f64> {
    if n_gt == 0 {
        return None;
    }
    let mut recall = Vec::with_capacity(flags.len());
    let mut precision = Vec::with_capacity(flags.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    for f in flags {
        match f {
            MatchFlag::Tp => tp += 1,
            MatchFlag::Fp => fp += 1,
            MatchFlag::Ignored => continue,
        }
        recall.push(tp as f64 / n_gt as f64);
        precision.push(tp as f64 / (tp + fp) as f64);
    }

    let ap = match interpolation {
        Interpolation::AllPoint => {
            let mut mrec = Vec::with_capacity(recall.len() + 2);
            mrec.push(0.0);
            mrec.extend_from_slice(&recall);
            mrec.push(1.0);
            let mut mpre = Vec::with_capacity(precision.len() + 2);
            mpre.push(0.0);
            mpre.extend_from_slice(&precision);
            mpre.push(0.0);
            for i in (0..mpre.len() - 1).rev() {
                mpre[i] = mpre[i].max(mpre[i + 1]);
            }
            (1..mrec.len())
                .filter(|&i| mrec[i] != mrec[i - 1])
                .map(|i| (mrec[i] - mrec[i - 1]) * mpre[i])
                .sum()
        }
        Interpolation::ElevenPoint => {
            (0..=10)
                .map(|k| {
                    let t = k as f64 / 10.0;
                    recall
                        .iter()
                        .zip(&precision)
                        .filter(|(r, _)| **r >= t)
                        .map(|(_, p)| *p)
                        .fold(0.0, f64::max)
                })
                .sum::<f64>()
                / 11.0
        }
    };
    Some(ap.clamp(0.0, 1.0))
}

/// Per-class AP and their mean over classes that have at least one counted
/// ground truth. Classes are named through `classes`; detections of classes
/// absent from the ground truth are reported and skipped.
pub fn map_evaluate(
    dets: &[Detection],
    gts: &[GroundTruth],
    classes: &ClassMap,
    cfg: &EvalConfig,
) -> Result<EvalResult> {
    cfg.validate()?;
    let mut gt_classes: Vec<usize> = gts.iter().map(|g| g.class_id).collect();
    gt_classes.sort_unstable();
    gt_classes.dedup();

    let mut stray: Vec<usize> = dets
        .iter()
        .map(|d| d.class_id)
        .filter(|c| gt_classes.binary_search(c).is_err())
        .collect();
    stray.sort_unstable();
    stray.dedup();
    for c in stray {
        log::warn!(
            "detections of class {} have no ground truth and are not scored",
            classes.name(c).map(str::to_string).unwrap_or_else(|| c.to_string())
        );
    }

    let mut per_class_ap = BTreeMap::new();
    for &class in &gt_classes {
        let class_gts: Vec<GroundTruth> = gts.iter().filter(|g| g.class_id == class).copied().collect();
        let mut class_dets: Vec<&Detection> = dets.iter().filter(|d| d.class_id == class).collect();
        // stable: equal scores keep input order
        class_dets.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap_or(std::cmp::Ordering::Equal));
        let boxes: Vec<RotatedBox> = class_dets.iter().map(|d| d.rbox).collect();
        let flags = match_detections(&boxes, &class_gts, cfg);
        let n_gt = class_gts
            .iter()
            .filter(|g| !(cfg.ignore_difficult && g.difficult))
            .count();
        if let Some(ap) = average_precision(&flags, n_gt, cfg.interpolation) {
            let name = classes
                .name(class)
                .map(str::to_string)
                .unwrap_or_else(|| class.to_string());
            per_class_ap.insert(name, ap);
        }
    }
    let map = if per_class_ap.is_empty() {
        0.0
    } else {
        per_class_ap.values().sum::<f64>() / per_class_ap.len() as f64
    };
    Ok(EvalResult { per_class_ap, map })
}

#[cfg(test)]
mod tests {
    use super::*;
    use MatchFlag::{Fp, Tp};

    fn rb(cx: f64, cy: f64) -> RotatedBox {
        RotatedBox::new(cx, cy, 10.0, 4.0, 0.2).unwrap()
    }

    fn gt(cx: f64, cy: f64, class_id: usize) -> GroundTruth {
        GroundTruth {
            rbox: rb(cx, cy),
            class_id,
            difficult: false,
        }
    }

    #[test]
    fn matching_examples() {
        let cfg = EvalConfig::default();
        assert_eq!(match_detections(&[rb(0.0, 0.0)], &[gt(0.0, 0.0, 0)], &cfg), vec![Tp]);
        assert_eq!(
            match_detections(&[rb(0.0, 0.0), rb(0.0, 0.0)], &[gt(0.0, 0.0, 0)], &cfg),
            vec![Tp, Fp]
        );
        assert_eq!(match_detections(&[rb(0.0, 0.0)], &[], &cfg), vec![Fp]);
    }

    #[test]
    fn second_detection_takes_next_unmatched_gt() {
        let cfg = EvalConfig::default();
        // both detections overlap gt 0 best; the second falls back to gt 1
        let gts = [gt(0.0, 0.0, 0), gt(1.0, 0.0, 0)];
        let flags = match_detections(&[rb(0.2, 0.0), rb(0.3, 0.0)], &gts, &cfg);
        assert_eq!(flags, vec![Tp, Tp]);
    }

    #[test]
    fn difficult_matches_are_ignored() {
        let mut g = gt(0.0, 0.0, 0);
        g.difficult = true;
        let cfg = EvalConfig::default();
        assert_eq!(match_detections(&[rb(0.0, 0.0)], &[g], &cfg), vec![MatchFlag::Ignored]);
        let cfg = EvalConfig {
            ignore_difficult: false,
            ..cfg
        };
        assert_eq!(match_detections(&[rb(0.0, 0.0)], &[g], &cfg), vec![Tp]);
    }

    #[test]
    fn ap_examples() {
        let all = Interpolation::AllPoint;
        assert_eq!(average_precision(&[Tp], 1, all), Some(1.0));
        assert_eq!(average_precision(&[Fp], 1, all), Some(0.0));
        assert_eq!(average_precision(&[], 3, all), Some(0.0));
        assert_eq!(average_precision(&[Tp], 0, all), None);
        let ap = average_precision(&[Tp, Fp, Tp], 2, all).unwrap();
        assert!((ap - (0.5 + 0.5 * 2.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn eleven_point_fixture() {
        let ap = average_precision(&[Tp, Fp, Tp], 2, Interpolation::ElevenPoint).unwrap();
        // recall >= 0..0.5 -> precision 1 (6 points), 0.6..1.0 -> 2/3 (5 points)
        assert!((ap - (6.0 + 5.0 * 2.0 / 3.0) / 11.0).abs() < 1e-12);
        let all = average_precision(&[Tp, Fp, Tp], 2, Interpolation::AllPoint).unwrap();
        assert!((ap - all).abs() < 0.05);
    }

    #[test]
    fn ignored_flags_are_skipped() {
        let ap = average_precision(&[Tp, MatchFlag::Ignored, Fp, Tp], 2, Interpolation::AllPoint).unwrap();
        assert!((ap - 0.8333333333333333).abs() < 1e-12);
    }

    #[test]
    fn map_examples() {
        let mut classes = ClassMap::new();
        let a = classes.intern("plane");
        let b = classes.intern("ship");
        let gts = [gt(0.0, 0.0, a), gt(100.0, 0.0, b)];
        let d = |x: f64, c: usize, s: f64| Detection::new(rb(x, 0.0), s, c).unwrap();

        let perfect = [d(0.0, a, 0.9), d(100.0, b, 0.8)];
        let r = map_evaluate(&perfect, &gts, &classes, &EvalConfig::default()).unwrap();
        assert_eq!(r.map, 1.0);

        let half = [d(0.0, a, 0.9), d(300.0, b, 0.8)];
        let r = map_evaluate(&half, &gts, &classes, &EvalConfig::default()).unwrap();
        assert_eq!(r.map, 0.5);
        assert_eq!(r.per_class_ap["ship"], 0.0);
    }

    #[test]
    fn map_single_class_fixture_and_stray_class() {
        let mut classes = ClassMap::new();
        let a = classes.intern("plane");
        let stray = classes.intern("helicopter");
        let gts = [gt(0.0, 0.0, a), gt(50.0, 0.0, a)];
        let dets = [
            Detection::new(rb(0.0, 0.0), 0.9, a).unwrap(),
            Detection::new(rb(200.0, 0.0), 0.8, a).unwrap(),
            Detection::new(rb(50.0, 0.0), 0.7, a).unwrap(),
            Detection::new(rb(0.0, 0.0), 0.95, stray).unwrap(),
        ];
        let r = map_evaluate(&dets, &gts, &classes, &EvalConfig::default()).unwrap();
        assert_eq!(r.per_class_ap.len(), 1);
        assert!((r.map - 0.833_333).abs() < 1e-4);
    }

    #[test]
    fn interpolation_parse() {
        assert_eq!("allpoint".parse::<Interpolation>().unwrap(), Interpolation::AllPoint);
        assert_eq!("11point".parse::<Interpolation>().unwrap(), Interpolation::ElevenPoint);
        assert!("voc".parse::<Interpolation>().is_err());
        assert!(EvalConfig {
            iou_thresh: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
