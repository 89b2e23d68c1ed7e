//! Regression encodings.
//!
//! * [`HorizontalDelta`]: center offsets in anchor units and log size ratios.
//! * [`TransformParams`]: the 2x2 rotation-times-scale matrix taking a
//!   horizontal proposal's corners to an oriented box's corners.
//! * [`LocalTarget`]: a rotated box expressed in another rotated box's frame.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{from_quad, wrap_half_turn, HorizontalBox, Point, Quadrilateral, RotatedBox};

/// Bound applied to log size ratios before exponentiating.
pub const LOG_RATIO_CLAMP: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizontalDelta {
    pub ux: f64,
    pub uy: f64,
    pub uw: f64,
    pub uh: f64,
}

/// Row-major `[[v1, v2], [v3, v4]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformParams {
    pub v1: f64,
    pub v2: f64,
    pub v3: f64,
    pub v4: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalTarget {
    pub lx: f64,
    pub ly: f64,
    pub sh: f64,
    pub sw: f64,
    pub otheta: f64,
}

impl HorizontalDelta {
    pub const ZERO: Self = HorizontalDelta {
        ux: 0.0,
        uy: 0.0,
        uw: 0.0,
        uh: 0.0,
    };

    pub fn to_array(&self) -> [f64; 4] {
        [self.ux, self.uy, self.uw, self.uh]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        HorizontalDelta {
            ux: a[0],
            uy: a[1],
            uw: a[2],
            uh: a[3],
        }
    }
}

impl TransformParams {
    pub const IDENTITY: Self = TransformParams {
        v1: 1.0,
        v2: 0.0,
        v3: 0.0,
        v4: 1.0,
    };

    pub fn to_array(&self) -> [f64; 4] {
        [self.v1, self.v2, self.v3, self.v4]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        TransformParams {
            v1: a[0],
            v2: a[1],
            v3: a[2],
            v4: a[3],
        }
    }

    pub fn determinant(&self) -> f64 {
        self.v1 * self.v4 - self.v2 * self.v3
    }
}

impl LocalTarget {
    pub const ZERO: Self = LocalTarget {
        lx: 0.0,
        ly: 0.0,
        sh: 0.0,
        sw: 0.0,
        otheta: 0.0,
    };

    pub fn to_array(&self) -> [f64; 5] {
        [self.lx, self.ly, self.sh, self.sw, self.otheta]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        LocalTarget {
            lx: a[0],
            ly: a[1],
            sh: a[2],
            sw: a[3],
            otheta: a[4],
        }
    }
}

fn clamp_log(v: f64) -> f64 {
    v.clamp(-LOG_RATIO_CLAMP, LOG_RATIO_CLAMP)
}

pub fn encode_hdelta(anchor: &HorizontalBox, target: &HorizontalBox) -> HorizontalDelta {
    HorizontalDelta {
        ux: (target.cx - anchor.cx) / anchor.w,
        uy: (target.cy - anchor.cy) / anchor.h,
        uw: (target.w / anchor.w).ln(),
        uh: (target.h / anchor.h).ln(),
    }
}

pub fn decode_hdelta(anchor: &HorizontalBox, d: &HorizontalDelta) -> Result<HorizontalBox> {
    HorizontalBox::new(
        anchor.cx + d.ux * anchor.w,
        anchor.cy + d.uy * anchor.h,
        anchor.w * clamp_log(d.uw).exp(),
        anchor.h * clamp_log(d.uh).exp(),
    )
}

/// Matrix taking the proposal's corner offsets to the ground truth's:
/// rotation by the ground-truth angle times per-axis scaling `w_gt/w`, `h_gt/h`.
pub fn encode_transform(hprop: &HorizontalBox, gt: &RotatedBox) -> Result<TransformParams> {
    HorizontalBox::new(hprop.cx, hprop.cy, hprop.w, hprop.h)?;
    let (s, c) = gt.theta.sin_cos();
    let sx = gt.w / hprop.w;
    let sy = gt.h / hprop.h;
    Ok(TransformParams {
        v1: sx * c,
        v2: -sy * s,
        v3: sx * s,
        v4: sy * c,
    })
}

/// Maps the proposal's corners through `v` about its center. The result is a
/// general quadrilateral when `v` is not a rotation times a scaling.
pub fn transform_quad(hprop: &HorizontalBox, v: &TransformParams) -> Quadrilateral {
    let hw = 0.5 * hprop.w;
    let hh = 0.5 * hprop.h;
    let corners = [(-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)];
    Quadrilateral {
        v: corners.map(|(px, py)| Point::new(v.v1 * px + v.v2 * py + hprop.cx, v.v3 * px + v.v4 * py + hprop.cy)),
    }
}

/// Oriented proposal from a horizontal proposal and predicted parameters:
/// the transformed quadrilateral reduced to its adjoint rectangle.
pub fn decode_transform(hprop: &HorizontalBox, v: &TransformParams) -> Result<RotatedBox> {
    if !v.to_array().iter().all(|x| x.is_finite()) {
        return Err(Error::InvalidQuad("non-finite transform parameters".into()));
    }
    from_quad(&transform_quad(hprop, v))
}

pub fn encode_local(prop: &RotatedBox, gt: &RotatedBox) -> LocalTarget {
    let (s, c) = prop.theta.sin_cos();
    let dx = gt.cx - prop.cx;
    let dy = gt.cy - prop.cy;
    LocalTarget {
        lx: (dx * c + dy * s) / prop.w,
        ly: (-dx * s + dy * c) / prop.h,
        sh: (gt.h / prop.h).ln(),
        sw: (gt.w / prop.w).ln(),
        otheta: wrap_half_turn(gt.theta - prop.theta),
    }
}

pub fn decode_local(prop: &RotatedBox, t: &LocalTarget) -> Result<RotatedBox> {
    let (s, c) = prop.theta.sin_cos();
    let ox = t.lx * prop.w;
    let oy = t.ly * prop.h;
    RotatedBox::new(
        prop.cx + ox * c - oy * s,
        prop.cy + ox * s + oy * c,
        prop.w * clamp_log(t.sw).exp(),
        prop.h * clamp_log(t.sh).exp(),
        prop.theta + t.otheta,
    )
}
