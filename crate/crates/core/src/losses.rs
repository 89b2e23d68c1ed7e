//! Reference loss values with analytic gradients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::targets::LocalTarget;

/// Probability clamp used before taking logarithms.
pub const PROB_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            lambda1: 1.0,
            lambda2: 1.0,
        }
    }
}

/// Returns `(value, d value / d x)`. The gradient at `|x| = 1` is `sign(x)`.
pub fn smooth_l1(x: f64) -> (f64, f64) {
    if x.abs() < 1.0 {
        (0.5 * x * x, x)
    } else {
        (x.abs() - 0.5, x.signum())
    }
}

/// Binary cross entropy and its derivative with respect to `p`.
pub fn bce(p: f64, positive: bool) -> (f64, f64) {
    let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
    if positive {
        (-p.ln(), -1.0 / p)
    } else {
        (-(1.0 - p).ln(), 1.0 / (1.0 - p))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AorpnLoss {
    pub total: f64,
    /// Mean cross entropy over all samples.
    pub cls: f64,
    /// `lambda1` times the summed smooth-L1 over positives, over the positive count.
    pub reg_u: f64,
    pub reg_v: f64,
    pub grad_scores: Vec<f64>,
    pub grad_u: Vec<[f64; 4]>,
    pub grad_v: Vec<[f64; 4]>,
}

/// Joint first-stage loss over the sampled anchors. Regression terms only
/// count positives; with no positives they are zero.
pub fn aorpn_loss(
    scores: &[f64],
    labels: &[bool],
    u: &[[f64; 4]],
    ustar: &[[f64; 4]],
    v: &[[f64; 4]],
    vstar: &[[f64; 4]],
    cfg: &LossConfig,
) -> Result<AorpnLoss> {
    let n = scores.len();
    if [labels.len(), u.len(), ustar.len(), v.len(), vstar.len()]
        .iter()
        .any(|&l| l != n)
    {
        return Err(Error::Shape("loss inputs must have equal lengths".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();

    let mut cls_sum = 0.0;
    let mut grad_scores = vec![0.0; n];
    for i in 0..n {
        let (val, g) = bce(scores[i], labels[i]);
        cls_sum += val;
        grad_scores[i] = g;
    }
    let (cls, cls_scale) = if n == 0 {
        (0.0, 0.0)
    } else {
        (cls_sum / n as f64, 1.0 / n as f64)
    };
    for g in &mut grad_scores {
        *g *= cls_scale;
    }

    let reg_scale = if n_pos == 0 { 0.0 } else { 1.0 / n_pos as f64 };
    let regress = |pred: &[[f64; 4]], target: &[[f64; 4]], weight: f64| {
        let mut sum = 0.0;
        let mut grads = vec![[0.0; 4]; n];
        for i in (0..n).filter(|&i| labels[i]) {
            for k in 0..4 {
                let (val, g) = smooth_l1(pred[i][k] - target[i][k]);
                sum += val;
                grads[i][k] = weight * reg_scale * g;
            }
        }
        (weight * reg_scale * sum, grads)
    };
    let (reg_u, grad_u) = regress(u, ustar, cfg.lambda1);
    let (reg_v, grad_v) = regress(v, vstar, cfg.lambda2);

    Ok(AorpnLoss {
        total: cls + reg_u + reg_v,
        cls,
        reg_u,
        reg_v,
        grad_scores,
        grad_u,
        grad_v,
    })
}

/// Per-head weights for the second-stage loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadWeights {
    pub cls: f64,
    pub location: f64,
    pub scale: f64,
    pub orientation: f64,
}

impl Default for HeadWeights {
    fn default() -> Self {
        HeadWeights {
            cls: 1.0,
            location: 1.0,
            scale: 1.0,
            orientation: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiHeadLoss {
    pub total: f64,
    pub cls: f64,
    pub location: f64,
    pub scale: f64,
    pub orientation: f64,
}

/// Second-stage loss: mean multi-class cross entropy plus smooth-L1 on the
/// location `(lx, ly)`, scale `(sh, sw)` and orientation heads, averaged over
/// foreground samples. Class 0 is background.
pub fn multihead_loss(
    class_probs: &[Vec<f64>],
    class_labels: &[usize],
    pred: &[LocalTarget],
    target: &[LocalTarget],
    weights: &HeadWeights,
) -> Result<MultiHeadLoss> {
    let n = class_probs.len();
    if class_labels.len() != n || pred.len() != n || target.len() != n {
        return Err(Error::Shape("loss inputs must have equal lengths".into()));
    }
    let mut cls = 0.0;
    for (probs, &label) in class_probs.iter().zip(class_labels) {
        let p = probs
            .get(label)
            .ok_or_else(|| Error::Shape(format!("label {label} outside {} classes", probs.len())))?;
        cls -= p.clamp(PROB_EPS, 1.0).ln();
    }
    if n > 0 {
        cls /= n as f64;
    }

    let fg: Vec<usize> = (0..n).filter(|&i| class_labels[i] != 0).collect();
    let sl1 = |x: f64| smooth_l1(x).0;
    let (mut loc, mut scale, mut orient) = (0.0, 0.0, 0.0);
    for &i in &fg {
        let (p, t) = (&pred[i], &target[i]);
        loc += sl1(p.lx - t.lx) + sl1(p.ly - t.ly);
        scale += sl1(p.sh - t.sh) + sl1(p.sw - t.sw);
        orient += sl1(p.otheta - t.otheta);
    }
    if !fg.is_empty() {
        let k = 1.0 / fg.len() as f64;
        loc *= k;
        scale *= k;
        orient *= k;
    }
    let cls = weights.cls * cls;
    let location = weights.location * loc;
    let scale = weights.scale * scale;
    let orientation = weights.orientation * orient;
    Ok(MultiHeadLoss {
        total: cls + location + scale + orientation,
        cls,
        location,
        scale,
        orientation,
    })
}
