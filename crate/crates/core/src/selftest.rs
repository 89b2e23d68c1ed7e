//! Quick built-in oracle checks, exposed through the `selftest` subcommand.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};

use crate::dataio::{read_fmap, tile_plan, write_fmap};
use crate::eval::{average_precision, Interpolation, MatchFlag};
use crate::geom::{from_quad, normalize_angle, rotated_iou, to_vertices, HorizontalBox, RotatedBox};
use crate::kernels::{center_pool, rroi_align, FeatureMap, RRoiAlignConfig};
use crate::postprocess::{rotated_nms, Detection};
use crate::rng::DetRng;
use crate::targets::{decode_hdelta, decode_local, decode_transform, encode_hdelta, encode_local, encode_transform};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn random_box(rng: &mut DetRng) -> RotatedBox {
    RotatedBox::new(
        rng.uniform(-50.0, 50.0),
        rng.uniform(-50.0, 50.0),
        rng.uniform(1.0, 100.0),
        rng.uniform(1.0, 100.0),
        rng.uniform(-FRAC_PI_2, FRAC_PI_2),
    )
    .expect("sampled box is valid")
}

fn inside(b: &RotatedBox, x: f64, y: f64) -> bool {
    let (s, c) = b.theta.sin_cos();
    let (dx, dy) = (x - b.cx, y - b.cy);
    (dx * c + dy * s).abs() <= 0.5 * b.w && (-dx * s + dy * c).abs() <= 0.5 * b.h
}

fn monte_carlo_iou(a: &RotatedBox, b: &RotatedBox, samples: usize, rng: &mut DetRng) -> f64 {
    let (ax0, ay0, ax1, ay1) = to_vertices(a).bounds();
    let (bx0, by0, bx1, by1) = to_vertices(b).bounds();
    let (x0, y0, x1, y1) = (ax0.min(bx0), ay0.min(by0), ax1.max(bx1), ay1.max(by1));
    let (mut both, mut either) = (0usize, 0usize);
    for _ in 0..samples {
        let x = rng.uniform(x0, x1);
        let y = rng.uniform(y0, y1);
        let (ia, ib) = (inside(a, x, y), inside(b, x, y));
        both += usize::from(ia && ib);
        either += usize::from(ia || ib);
    }
    if either == 0 {
        0.0
    } else {
        both as f64 / either as f64
    }
}

fn check(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult { name, passed, detail }
}

pub fn run() -> Vec<CheckResult> {
    let mut out = Vec::new();
    let mut rng = DetRng::new(0x5eed);

    let sq = RotatedBox::new(0.0, 0.0, 2.0, 2.0, 0.0).unwrap();
    let diamond = RotatedBox::new(0.0, 0.0, 2.0, 2.0, FRAC_PI_4).unwrap();
    let inter = 8.0 * (SQRT_2 - 1.0);
    let want = inter / (8.0 - inter);
    let got = rotated_iou(&sq, &diamond);
    out.push(check(
        "rotated_iou closed form",
        (got - want).abs() < 1e-9 && (rotated_iou(&sq, &sq) - 1.0).abs() < 1e-12,
        format!("{got:.9} vs {want:.9}"),
    ));

    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let a = random_box(&mut rng);
        let mut b = random_box(&mut rng);
        b.cx = a.cx + rng.uniform(-0.3, 0.3) * a.w;
        b.cy = a.cy + rng.uniform(-0.3, 0.3) * a.h;
        let mc = monte_carlo_iou(&a, &b, 200_000, &mut rng);
        worst = worst.max((rotated_iou(&a, &b) - mc).abs());
    }
    out.push(check(
        "rotated_iou vs monte carlo",
        worst < 1e-2,
        format!("max error {worst:.2e}"),
    ));

    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let g = random_box(&mut rng);
        let r = random_box(&mut rng);
        let a = HorizontalBox::new(r.cx, r.cy, r.w, r.h).unwrap();
        let t = HorizontalBox::new(g.cx, g.cy, g.w, g.h).unwrap();
        let d = decode_hdelta(&a, &encode_hdelta(&a, &t)).unwrap();
        worst = worst.max((d.cx - t.cx).abs().max((d.w - t.w).abs()));

        let hp = HorizontalBox::new(g.cx, g.cy, r.w, r.h).unwrap();
        let back = decode_transform(&hp, &encode_transform(&hp, &g).unwrap()).unwrap();
        for (p, q) in to_vertices(&back).v.iter().zip(to_vertices(&g).v) {
            worst = worst.max((p.x - q.x).abs().max((p.y - q.y).abs()));
        }

        let back = decode_local(&r, &encode_local(&r, &g)).unwrap();
        for (p, q) in back.to_array().iter().zip(g.to_array()) {
            worst = worst.max((p - q).abs());
        }
    }
    out.push(check(
        "encode/decode round trips",
        worst <= 1e-6,
        format!("max error {worst:.2e}"),
    ));

    let mut ok = true;
    for _ in 0..1000 {
        let b = random_box(&mut rng);
        let n = normalize_angle(&b);
        ok &= n.theta.abs() <= FRAC_PI_4;
        let r = from_quad(&to_vertices(&b)).unwrap();
        ok &= (r.w - b.w).abs() < 1e-6 && (r.h - b.h).abs() < 1e-6;
    }
    out.push(check("angle normalization and quad round trip", ok, String::new()));

    let f = FeatureMap::new(16, 16, 1, vec![2.0; 256]).unwrap();
    let aligned = rroi_align(
        &f,
        &RotatedBox::new(8.0, 8.0, 6.0, 3.0, 0.7).unwrap(),
        &RRoiAlignConfig::default(),
    )
    .unwrap();
    out.push(check(
        "rroi_align constant map",
        aligned.data().iter().all(|v| (v - 2.0).abs() < 1e-12),
        String::new(),
    ));

    let f = FeatureMap::from_fn(3, 3, 1, |i, j, _| if (i, j) == (1, 1) { 7.0 } else { 0.0 });
    let p = center_pool(&f);
    out.push(check(
        "center_pool fixture",
        p.get(1, 1, 0) == 14.0 && p.get(1, 0, 0) == 7.0 && p.get(0, 0, 0) == 0.0,
        String::new(),
    ));

    let d = Detection::new(sq, 0.9, 0).unwrap();
    let dup = Detection { score: 0.8, ..d };
    out.push(check(
        "nms duplicate suppression",
        rotated_nms(&[dup, d], 0.1) == vec![1],
        String::new(),
    ));

    let ap = average_precision(
        &[MatchFlag::Tp, MatchFlag::Fp, MatchFlag::Tp],
        2,
        Interpolation::AllPoint,
    )
    .unwrap_or(-1.0);
    out.push(check(
        "average precision fixture",
        (ap - 0.8333).abs() < 1e-4,
        format!("{ap:.6}"),
    ));

    let n = tile_plan("selftest", 1848, 1848, 1024, 824)
        .map(|t| t.len())
        .unwrap_or(0);
    out.push(check("tile plan 1848/1024/824", n == 4, format!("{n} tiles")));

    let f = FeatureMap::from_fn(4, 5, 3, |i, j, c| (i * 100 + j * 10 + c) as f64 * 0.5);
    let mut buf = Vec::new();
    let same = write_fmap(&mut buf, &f).is_ok() && read_fmap(&buf[..]).map(|g| g == f).unwrap_or(false);
    out.push(check("feature map round trip", same, String::new()));

    out
}
