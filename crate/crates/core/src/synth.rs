//! Seeded synthetic scenes for end-to-end smoke tests.

use crate::dataio::{AnnotationRecord, ClassMap};
use crate::error::{Error, Result};
use crate::geom::{to_vertices, RotatedBox};
use crate::postprocess::Detection;
use crate::rng::DetRng;

pub const CATEGORIES: [&str; 5] = ["plane", "ship", "small-vehicle", "large-vehicle", "storage-tank"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneConfig {
    pub width: f64,
    pub height: f64,
    pub count: usize,
    pub min_side: f64,
    pub max_side: f64,
    /// Extra detections that match nothing.
    pub false_positives: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            width: 1848.0,
            height: 1848.0,
            count: 50,
            min_side: 10.0,
            max_side: 120.0,
            false_positives: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub classes: ClassMap,
    /// Ground truth, pairwise disjoint and fully inside the image.
    pub boxes: Vec<(RotatedBox, usize)>,
    /// Slightly perturbed copies of every ground truth, plus false positives.
    pub detections: Vec<Detection>,
}

impl Scene {
    pub fn annotations(&self) -> Vec<AnnotationRecord> {
        self.boxes
            .iter()
            .map(|(b, c)| AnnotationRecord {
                quad: to_vertices(b),
                category: self.classes.name(*c).unwrap_or_default().to_string(),
                difficult: false,
            })
            .collect()
    }
}

fn random_box(rng: &mut DetRng, cfg: &SceneConfig) -> Option<RotatedBox> {
    let w = rng.uniform(cfg.min_side, cfg.max_side);
    let h = rng.uniform(cfg.min_side, cfg.max_side);
    let r = 0.5 * w.hypot(h);
    if 2.0 * r >= cfg.width || 2.0 * r >= cfg.height {
        return None;
    }
    let cx = rng.uniform(r, cfg.width - r);
    let cy = rng.uniform(r, cfg.height - r);
    let theta = rng.uniform(-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2);
    RotatedBox::new(cx, cy, w, h, theta).ok()
}

/// Places `count` boxes whose circumscribed circles do not touch, so every
/// pair has zero overlap.
pub fn scene(seed: u64, cfg: &SceneConfig) -> Result<Scene> {
    if !(cfg.min_side > 0.0 && cfg.max_side >= cfg.min_side) {
        return Err(Error::Config("need 0 < min_side <= max_side".into()));
    }
    let mut rng = DetRng::new(seed);
    let mut classes = ClassMap::new();
    for c in CATEGORIES {
        classes.intern(c);
    }

    let mut boxes: Vec<(RotatedBox, usize)> = Vec::with_capacity(cfg.count);
    let mut attempts = 0usize;
    while boxes.len() < cfg.count {
        attempts += 1;
        if attempts > 1000 * cfg.count.max(1) {
            return Err(Error::Config(format!(
                "could not place {} disjoint boxes in {}x{}",
                cfg.count, cfg.width, cfg.height
            )));
        }
        let Some(b) = random_box(&mut rng, cfg) else {
            continue;
        };
        let r = 0.5 * b.w.hypot(b.h);
        let clear = boxes.iter().all(|(o, _)| {
            let ro = 0.5 * o.w.hypot(o.h);
            (b.cx - o.cx).hypot(b.cy - o.cy) > r + ro + 1.0
        });
        if clear {
            let class = rng.below(CATEGORIES.len() as u64) as usize;
            boxes.push((b, class));
        }
    }

    let mut detections = Vec::with_capacity(cfg.count + cfg.false_positives);
    for (b, class) in &boxes {
        let jittered = RotatedBox::new(
            b.cx + rng.uniform(-1.0, 1.0),
            b.cy + rng.uniform(-1.0, 1.0),
            b.w * rng.uniform(0.97, 1.03),
            b.h * rng.uniform(0.97, 1.03),
            b.theta + rng.uniform(-0.02, 0.02),
        )?;
        detections.push(Detection::new(jittered, rng.uniform(0.5, 1.0), *class)?);
    }
    let mut placed = 0;
    let mut attempts = 0usize;
    while placed < cfg.false_positives {
        attempts += 1;
        if attempts > 1000 * cfg.false_positives {
            return Err(Error::Config("image too small for the configured box sizes".into()));
        }
        let Some(b) = random_box(&mut rng, cfg) else {
            continue;
        };
        let class = rng.below(CATEGORIES.len() as u64) as usize;
        detections.push(Detection::new(b, rng.uniform(0.05, 0.5), class)?);
        placed += 1;
    }
    Ok(Scene {
        classes,
        boxes,
        detections,
    })
}
