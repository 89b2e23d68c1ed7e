//! Box representations and exact rotated-box geometry.
//!
//! Coordinates follow the image convention: x to the right, y downward.
//! A [`RotatedBox`] with angle `theta` maps its axis-aligned corner offsets
//! `(-w/2,-h/2), (w/2,-h/2), (w/2,h/2), (-w/2,h/2)` through the rotation
//! `[[cos, -sin], [sin, cos]]` and then translates them to the center.

pub mod polygon;

use std::cmp::Ordering;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest accepted side length, in pixels.
pub const MIN_SIZE: f64 = 1e-6;

/// Intersections smaller than this (squared pixels) count as empty.
pub const AREA_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotatedBox {
    pub cx: f64,
    pub cy: f64,
    /// Length of the side running from vertex 1 to vertex 2.
    pub w: f64,
    /// Length of the side running from vertex 2 to vertex 3.
    pub h: f64,
    /// Radians, in `(-pi/2, pi/2]`.
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizontalBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

/// Four ordered vertices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quadrilateral {
    pub v: [Point; 4],
}

/// Wraps an angle into `(-pi/2, pi/2]`. A rectangle is unchanged by a half
/// turn, so this never changes the described point set.
pub fn wrap_half_turn(theta: f64) -> f64 {
    if theta > -FRAC_PI_2 && theta <= FRAC_PI_2 {
        return theta;
    }
    let r = theta.rem_euclid(PI);
    if r > FRAC_PI_2 {
        r - PI
    } else {
        r
    }
}

fn check_size(w: f64, h: f64) -> Result<()> {
    if !(w >= MIN_SIZE && h >= MIN_SIZE) {
        return Err(Error::InvalidBox(format!(
            "sides must be at least {MIN_SIZE} pixels, got w={w}, h={h}"
        )));
    }
    Ok(())
}

impl RotatedBox {
    /// Validates finiteness and size, and wraps `theta` into `(-pi/2, pi/2]`.
    pub fn new(cx: f64, cy: f64, w: f64, h: f64, theta: f64) -> Result<Self> {
        if ![cx, cy, w, h, theta].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidBox(format!(
                "non-finite field in ({cx}, {cy}, {w}, {h}, {theta})"
            )));
        }
        check_size(w, h)?;
        Ok(RotatedBox {
            cx,
            cy,
            w,
            h,
            theta: wrap_half_turn(theta),
        })
    }

    pub fn from_array(a: [f64; 5]) -> Result<Self> {
        Self::new(a[0], a[1], a[2], a[3], a[4])
    }

    pub fn to_array(&self) -> [f64; 5] {
        [self.cx, self.cy, self.w, self.h, self.theta]
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.cx, self.cy, self.w, self.h, self.theta).map(|_| ())
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        RotatedBox {
            cx: self.cx + dx,
            cy: self.cy + dy,
            ..*self
        }
    }

    pub fn vertices(&self) -> Quadrilateral {
        to_vertices(self)
    }

    pub fn normalized(&self) -> Self {
        normalize_angle(self)
    }

    fn order_key(&self, other: &Self) -> Ordering {
        self.cx
            .total_cmp(&other.cx)
            .then(self.cy.total_cmp(&other.cy))
            .then(self.w.total_cmp(&other.w))
            .then(self.h.total_cmp(&other.h))
            .then(self.theta.total_cmp(&other.theta))
    }
}

impl HorizontalBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        if ![cx, cy, w, h].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidBox(format!("non-finite field in ({cx}, {cy}, {w}, {h})")));
        }
        check_size(w, h)?;
        Ok(HorizontalBox { cx, cy, w, h })
    }

    /// From corner coordinates `(x1, y1, x2, y2)`.
    pub fn from_corners(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        Self::new(0.5 * (x1 + x2), 0.5 * (y1 + y2), x2 - x1, y2 - y1)
    }

    pub fn corners(&self) -> (f64, f64, f64, f64) {
        (
            self.cx - 0.5 * self.w,
            self.cy - 0.5 * self.h,
            self.cx + 0.5 * self.w,
            self.cy + 0.5 * self.h,
        )
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn to_rotated(&self) -> RotatedBox {
        RotatedBox {
            cx: self.cx,
            cy: self.cy,
            w: self.w,
            h: self.h,
            theta: 0.0,
        }
    }
}

impl Quadrilateral {
    pub fn new(v: [Point; 4]) -> Result<Self> {
        if !v.iter().all(|p| p.x.is_finite() && p.y.is_finite()) {
            return Err(Error::InvalidQuad("non-finite vertex".into()));
        }
        Ok(Quadrilateral { v })
    }

    /// From `x1 y1 x2 y2 x3 y3 x4 y4`.
    pub fn from_coords(c: [f64; 8]) -> Result<Self> {
        Self::new([
            Point::new(c[0], c[1]),
            Point::new(c[2], c[3]),
            Point::new(c[4], c[5]),
            Point::new(c[6], c[7]),
        ])
    }

    pub fn coords(&self) -> [f64; 8] {
        let v = &self.v;
        [v[0].x, v[0].y, v[1].x, v[1].y, v[2].x, v[2].y, v[3].x, v[3].y]
    }

    pub fn signed_area(&self) -> f64 {
        polygon::signed_area(&self.v)
    }

    pub fn centroid(&self) -> Point {
        let sx: f64 = self.v.iter().map(|p| p.x).sum();
        let sy: f64 = self.v.iter().map(|p| p.y).sum();
        Point::new(0.25 * sx, 0.25 * sy)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        let mut v = self.v;
        for p in &mut v {
            p.x += dx;
            p.y += dy;
        }
        Quadrilateral { v }
    }

    /// `(min_x, min_y, max_x, max_y)`.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        self.v.iter().fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |(x0, y0, x1, y1), p| (x0.min(p.x), y0.min(p.y), x1.max(p.x), y1.max(p.y)),
        )
    }
}

/// Rewrites a box into the equivalent form with `|theta| <= pi/4`.
///
/// Every quarter turn moved from the angle into the vertex order swaps `w`
/// and `h`. An exact tie at `-pi/4` is resolved to `+pi/4`.
pub fn normalize_angle(b: &RotatedBox) -> RotatedBox {
    let k = (b.theta / FRAC_PI_2).round();
    let mut t = b.theta - k * FRAC_PI_2;
    let mut swap = (k as i64).rem_euclid(2) == 1;
    if t <= -FRAC_PI_4 {
        t += FRAC_PI_2;
        swap = !swap;
    }
    let t = t.clamp(-FRAC_PI_4, FRAC_PI_4);
    let (w, h) = if swap { (b.h, b.w) } else { (b.w, b.h) };
    RotatedBox {
        cx: b.cx,
        cy: b.cy,
        w,
        h,
        theta: t,
    }
}

/// Fallible form of [`normalize_angle`] for boxes whose fields were not
/// produced through [`RotatedBox::new`].
pub fn try_normalize_angle(b: &RotatedBox) -> Result<RotatedBox> {
    b.validate()?;
    Ok(normalize_angle(b))
}

pub fn to_vertices(b: &RotatedBox) -> Quadrilateral {
    let (s, c) = b.theta.sin_cos();
    let hw = 0.5 * b.w;
    let hh = 0.5 * b.h;
    let corners = [(-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)];
    let v = corners.map(|(px, py)| Point::new(c * px - s * py + b.cx, s * px + c * py + b.cy));
    Quadrilateral { v }
}

/// Adjoint rotated rectangle of a quadrilateral: shares the vertex centroid
/// and the angle of edge v1→v2; side lengths are the larger of the two
/// opposite-edge extents measured in the rectangle's local frame.
pub fn from_quad(q: &Quadrilateral) -> Result<RotatedBox> {
    if q.signed_area().abs() < AREA_EPS {
        return Err(Error::InvalidQuad("zero-area quadrilateral".into()));
    }
    let c = q.centroid();
    let [p1, p2, _, _] = q.v;
    let theta = wrap_half_turn((p2.y - p1.y).atan2(p2.x - p1.x));
    let (s, co) = theta.sin_cos();
    let local = q.v.map(|p| {
        let dx = p.x - c.x;
        let dy = p.y - c.y;
        (dx * co + dy * s, -dx * s + dy * co)
    });
    let w = (local[0].0 - local[1].0).abs().max((local[2].0 - local[3].0).abs());
    let h = (local[0].1 - local[3].1).abs().max((local[1].1 - local[2].1).abs());
    RotatedBox::new(c.x, c.y, w, h, theta).map_err(|e| Error::InvalidQuad(e.to_string()))
}

pub fn enclosing_hbox(b: &RotatedBox) -> HorizontalBox {
    let (s, c) = b.theta.sin_cos();
    let (s, c) = (s.abs(), c.abs());
    HorizontalBox {
        cx: b.cx,
        cy: b.cy,
        w: b.w * c + b.h * s,
        h: b.w * s + b.h * c,
    }
}

pub fn hbox_iou(a: &HorizontalBox, b: &HorizontalBox) -> f64 {
    let (ax1, ay1, ax2, ay2) = a.corners();
    let (bx1, by1, bx2, by2) = b.corners();
    let iw = (ax2.min(bx2) - ax1.max(bx1)).max(0.0);
    let ih = (ay2.min(by2) - ay1.max(by1)).max(0.0);
    let inter = iw * ih;
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Area of the intersection of two rotated boxes.
pub fn intersection_area(a: &RotatedBox, b: &RotatedBox) -> f64 {
    let (a, b) = if a.order_key(b) == Ordering::Greater {
        (b, a)
    } else {
        (a, b)
    };
    let qa = to_vertices(a);
    let qb = to_vertices(b);
    let (ax0, ay0, ax1, ay1) = qa.bounds();
    let (bx0, by0, bx1, by1) = qb.bounds();
    if ax1 < bx0 || bx1 < ax0 || ay1 < by0 || by1 < ay0 {
        return 0.0;
    }
    let inter = polygon::area(&polygon::clip_convex(&qa.v, &qb.v));
    if inter < AREA_EPS {
        0.0
    } else {
        inter
    }
}

/// Intersection over union of two rotated boxes, by convex clipping.
/// Bit-for-bit symmetric in its arguments.
pub fn rotated_iou(a: &RotatedBox, b: &RotatedBox) -> f64 {
    let inter = intersection_area(a, b);
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    fn rb(cx: f64, cy: f64, w: f64, h: f64, t: f64) -> RotatedBox {
        RotatedBox::new(cx, cy, w, h, t).unwrap()
    }

    fn assert_pt(p: Point, x: f64, y: f64) {
        assert!(
            (p.x - x).abs() < 1e-12 && (p.y - y).abs() < 1e-12,
            "{p:?} != ({x}, {y})"
        );
    }

    /// Enumerates the four cyclic vertex orders and keeps the one with the
    /// smallest |theta|, ties to the non-negative angle.
    fn normalize_by_enumeration(b: &RotatedBox) -> RotatedBox {
        let mut best: Option<RotatedBox> = None;
        for j in 0..4 {
            let raw = b.theta + j as f64 * FRAC_PI_2;
            let t = wrap_half_turn(raw);
            let (w, h) = if j % 2 == 1 { (b.h, b.w) } else { (b.w, b.h) };
            let cand = RotatedBox { theta: t, w, h, ..*b };
            best = match best {
                None => Some(cand),
                Some(cur) => {
                    let (ca, ta) = (cur.theta.abs(), cand.theta.abs());
                    if ta < ca - 1e-12 || ((ta - ca).abs() <= 1e-12 && cand.theta > cur.theta) {
                        Some(cand)
                    } else {
                        Some(cur)
                    }
                }
            }
        }
        best.unwrap()
    }

    #[test]
    fn rejects_bad_boxes() {
        assert!(RotatedBox::new(0.0, 0.0, 0.0, 1.0, 0.0).is_err());
        assert!(RotatedBox::new(0.0, 0.0, 1.0, 1e-7, 0.0).is_err());
        assert!(RotatedBox::new(f64::NAN, 0.0, 1.0, 1.0, 0.0).is_err());
        assert!(RotatedBox::new(0.0, 0.0, 1.0, 1.0, f64::INFINITY).is_err());
        assert!(HorizontalBox::new(0.0, 0.0, -1.0, 1.0).is_err());
        let raw = RotatedBox {
            cx: 0.0,
            cy: 0.0,
            w: 1.0,
            h: 1.0,
            theta: f64::NAN,
        };
        assert!(try_normalize_angle(&raw).is_err());
    }

    #[test]
    fn constructor_wraps_half_turns() {
        let b = rb(0.0, 0.0, 4.0, 2.0, PI + 0.3);
        assert!((b.theta - 0.3).abs() < 1e-12);
        assert_eq!(wrap_half_turn(FRAC_PI_2), FRAC_PI_2);
        assert_eq!(wrap_half_turn(-FRAC_PI_2), FRAC_PI_2);
        // in-range angles come back bit-identical
        for t in [-0.1, -1.5, 1e-300, -FRAC_PI_4, 1.2345] {
            assert_eq!(wrap_half_turn(t).to_bits(), t.to_bits());
        }
    }

    #[test]
    fn normalize_examples() {
        let b = rb(0.0, 0.0, 4.0, 2.0, 0.0);
        assert_eq!(normalize_angle(&b), b);

        let n = normalize_angle(&rb(0.0, 0.0, 4.0, 2.0, 60f64.to_radians()));
        assert_eq!((n.w, n.h), (2.0, 4.0));
        assert!((n.theta - (-30f64).to_radians()).abs() < 1e-12);

        let n = normalize_angle(&rb(0.0, 0.0, 3.0, 3.0, FRAC_PI_4));
        assert_eq!(n.theta, FRAC_PI_4);
        let n = normalize_angle(&rb(0.0, 0.0, 3.0, 1.0, -FRAC_PI_4));
        assert_eq!(n.theta, FRAC_PI_4);
        assert_eq!((n.w, n.h), (1.0, 3.0));
    }

    #[test]
    fn normalize_matches_enumeration() {
        for i in 0..=200 {
            let t = -FRAC_PI_2 + PI * i as f64 / 200.0;
            let b = rb(1.0, 2.0, 5.0, 3.0, t);
            let n = normalize_angle(&b);
            let e = normalize_by_enumeration(&b);
            assert!((n.theta - e.theta).abs() < 1e-12, "t={t}: {n:?} vs {e:?}");
            assert_eq!((n.w, n.h), (e.w, e.h), "t={t}");
        }
    }

    #[test]
    fn vertices_examples() {
        let q = to_vertices(&rb(0.0, 0.0, 2.0, 2.0, 0.0));
        assert_pt(q.v[0], -1.0, -1.0);
        assert_pt(q.v[1], 1.0, -1.0);
        assert_pt(q.v[2], 1.0, 1.0);
        assert_pt(q.v[3], -1.0, 1.0);

        let q = to_vertices(&rb(0.0, 0.0, 2.0, 2.0, FRAC_PI_4));
        assert_pt(q.v[0], 0.0, -SQRT_2);
        assert_pt(q.v[1], SQRT_2, 0.0);
        assert_pt(q.v[2], 0.0, SQRT_2);
        assert_pt(q.v[3], -SQRT_2, 0.0);

        let q = to_vertices(&rb(10.0, 20.0, 2.0, 2.0, 0.0));
        assert_pt(q.v[0], 9.0, 19.0);
        assert_pt(q.v[2], 11.0, 21.0);
    }

    #[test]
    fn from_quad_examples() {
        let b = rb(3.0, -4.0, 7.0, 2.5, 0.4);
        let r = from_quad(&to_vertices(&b)).unwrap();
        for (x, y) in r.to_array().iter().zip(b.to_array()) {
            assert!((x - y).abs() < 1e-9);
        }

        let q = Quadrilateral::from_coords([0.0, 0.0, 1.2, 0.0, 1.0, 1.0, 0.0, 1.0]).unwrap();
        let r = from_quad(&q).unwrap();
        assert!((r.w - 1.2).abs() < 1e-12);
        assert!((r.h - 1.0).abs() < 1e-12);
        assert_eq!(r.theta, 0.0);
        assert!((r.cx - 0.55).abs() < 1e-12 && (r.cy - 0.5).abs() < 1e-12);

        let r = from_quad(&to_vertices(&rb(0.0, 0.0, 4.0, 2.0, 30f64.to_radians()))).unwrap();
        assert!((r.theta - 30f64.to_radians()).abs() < 1e-12);
        assert!((r.w - 4.0).abs() < 1e-12 && (r.h - 2.0).abs() < 1e-12);
    }

    #[test]
    fn from_quad_rejects_degenerate() {
        let q = Quadrilateral::from_coords([0.0, 0.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0]).unwrap();
        assert!(matches!(from_quad(&q), Err(Error::InvalidQuad(_))));
        let q = Quadrilateral::from_coords([1.0; 8]).unwrap();
        assert!(from_quad(&q).is_err());
    }

    #[test]
    fn enclosing_examples() {
        let h = enclosing_hbox(&rb(0.0, 0.0, 2.0, 2.0, 0.0));
        assert_eq!((h.cx, h.cy, h.w, h.h), (0.0, 0.0, 2.0, 2.0));

        let h = enclosing_hbox(&rb(0.0, 0.0, 2.0, 2.0, FRAC_PI_4));
        assert!((h.w - 2.0 * SQRT_2).abs() < 1e-12 && (h.h - 2.0 * SQRT_2).abs() < 1e-12);

        let b = rb(5.0, 5.0, 4.0, 2.0, PI / 6.0);
        let h = enclosing_hbox(&b);
        assert!((h.w - 4.464_101_615_137_754).abs() < 1e-9);
        assert!((h.h - 3.732_050_807_568_877).abs() < 1e-9);
        let (x0, y0, x1, y1) = to_vertices(&b).bounds();
        assert!((h.w - (x1 - x0)).abs() < 1e-12 && (h.h - (y1 - y0)).abs() < 1e-12);
        assert_eq!((h.cx, h.cy), (5.0, 5.0));
    }

    #[test]
    fn rotated_iou_examples() {
        let a = rb(0.0, 0.0, 2.0, 2.0, 0.0);
        assert!((rotated_iou(&a, &a) - 1.0).abs() < 1e-12);
        assert_eq!(rotated_iou(&a, &rb(10.0, 10.0, 2.0, 2.0, 0.0)), 0.0);

        let b = rb(0.0, 0.0, 2.0, 2.0, FRAC_PI_4);
        let inter = 8.0 * (SQRT_2 - 1.0);
        let expect = inter / (8.0 - inter);
        assert!((rotated_iou(&a, &b) - expect).abs() < 1e-12);
        assert!((expect - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn touching_boxes_have_zero_iou() {
        let a = rb(0.0, 0.0, 2.0, 2.0, 0.0);
        let b = rb(2.0, 0.0, 2.0, 2.0, 0.0);
        assert_eq!(rotated_iou(&a, &b), 0.0);
    }

    #[test]
    fn hbox_iou_examples() {
        let a = HorizontalBox::new(0.0, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(hbox_iou(&a, &a), 1.0);
        let b = HorizontalBox::new(0.5, 0.0, 1.0, 1.0).unwrap();
        assert!((hbox_iou(&a, &b) - 1.0 / 3.0).abs() < 1e-15);
        let c = HorizontalBox::new(5.0, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(hbox_iou(&a, &c), 0.0);
        assert!((rotated_iou(&a.to_rotated(), &b.to_rotated()) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn hbox_corners_round_trip() {
        let h = HorizontalBox::from_corners(1.0, 2.0, 5.0, 8.0).unwrap();
        assert_eq!(h.corners(), (1.0, 2.0, 5.0, 8.0));
        assert!(HorizontalBox::from_corners(5.0, 2.0, 1.0, 8.0).is_err());
    }
}
