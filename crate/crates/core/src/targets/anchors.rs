use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::HorizontalBox;

/// Per-level anchor scales and strides plus the shared aspect ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorConfig {
    pub scales: Vec<f64>,
    /// Height over width.
    pub aspect_ratios: Vec<f64>,
    pub stride_per_level: Vec<f64>,
}

impl AnchorConfig {
    /// Five pyramid levels (strides 4..64) with scales 32..512 and ratios 0.5, 1, 2.
    pub fn dota() -> Self {
        AnchorConfig {
            scales: vec![32.0, 64.0, 128.0, 256.0, 512.0],
            aspect_ratios: vec![0.5, 1.0, 2.0],
            stride_per_level: vec![4.0, 8.0, 16.0, 32.0, 64.0],
        }
    }

    /// As [`AnchorConfig::dota`] with the extra elongated ratios 1/3 and 3.
    pub fn hrsc() -> Self {
        AnchorConfig {
            aspect_ratios: vec![0.5, 1.0, 2.0, 1.0 / 3.0, 3.0],
            ..Self::dota()
        }
    }

    pub fn anchors_per_location(&self) -> usize {
        self.aspect_ratios.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.scales.is_empty() || self.aspect_ratios.is_empty() {
            return Err(Error::Config("anchor scales and ratios must be nonempty".into()));
        }
        if self.scales.len() != self.stride_per_level.len() {
            return Err(Error::Config(format!(
                "{} scales but {} strides",
                self.scales.len(),
                self.stride_per_level.len()
            )));
        }
        let positive = |v: &[f64]| v.iter().all(|x| x.is_finite() && *x > 0.0);
        if !positive(&self.scales) || !positive(&self.aspect_ratios) || !positive(&self.stride_per_level) {
            return Err(Error::Config("scales, ratios and strides must be positive".into()));
        }
        Ok(())
    }
}

/// Anchors for every level, ordered by (level, row, col, ratio).
///
/// Each anchor keeps area `scale^2`: `w = scale / sqrt(r)`, `h = scale * sqrt(r)`.
pub fn generate_anchors(level_shapes: &[(usize, usize)], cfg: &AnchorConfig) -> Result<Vec<HorizontalBox>> {
    cfg.validate()?;
    if level_shapes.len() != cfg.scales.len() {
        return Err(Error::Config(format!(
            "{} level shapes for {} configured levels",
            level_shapes.len(),
            cfg.scales.len()
        )));
    }
    if level_shapes.iter().any(|&(h, w)| h == 0 || w == 0) {
        return Err(Error::Config("level shapes must be positive".into()));
    }

    let total: usize = level_shapes.iter().map(|(h, w)| h * w).sum::<usize>() * cfg.aspect_ratios.len();
    let mut out = Vec::with_capacity(total);
    for (level, &(rows, cols)) in level_shapes.iter().enumerate() {
        let scale = cfg.scales[level];
        let stride = cfg.stride_per_level[level];
        let sizes: Vec<(f64, f64)> = cfg
            .aspect_ratios
            .iter()
            .map(|r| {
                let sr = r.sqrt();
                (scale / sr, scale * sr)
            })
            .collect();
        for i in 0..rows {
            let cy = stride * (i as f64 + 0.5);
            for j in 0..cols {
                let cx = stride * (j as f64 + 0.5);
                for &(w, h) in &sizes {
                    out.push(HorizontalBox::new(cx, cy, w, h)?);
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(scale: f64, ratios: Vec<f64>, stride: f64) -> AnchorConfig {
        AnchorConfig {
            scales: vec![scale],
            aspect_ratios: ratios,
            stride_per_level: vec![stride],
        }
    }

    #[test]
    fn single_cell_anchor() {
        let a = generate_anchors(&[(1, 1)], &single(32.0, vec![1.0], 32.0)).unwrap();
        assert_eq!(a, vec![HorizontalBox::new(16.0, 16.0, 32.0, 32.0).unwrap()]);
    }

    #[test]
    fn ratio_preserves_area() {
        let a = generate_anchors(&[(1, 1)], &single(32.0, vec![2.0], 32.0)).unwrap();
        assert!((a[0].w - 22.627_416_997_969_52).abs() < 1e-9);
        assert!((a[0].h - 45.254_833_995_939_04).abs() < 1e-9);
        assert!((a[0].area() - 1024.0).abs() < 1e-9);
    }

    #[test]
    fn counts_and_order() {
        let a = generate_anchors(&[(2, 2)], &single(32.0, vec![0.5, 1.0, 2.0], 16.0)).unwrap();
        assert_eq!(a.len(), 12);
        // (row 0, col 1) comes before (row 1, col 0)
        assert_eq!((a[3].cx, a[3].cy), (24.0, 8.0));
        assert_eq!((a[6].cx, a[6].cy), (8.0, 24.0));
        assert!(a[0].w > a[0].h && a[2].h > a[2].w);
    }

    #[test]
    fn multi_level() {
        let cfg = AnchorConfig::dota();
        let shapes = [(4, 4), (2, 2), (1, 1), (1, 1), (1, 1)];
        let a = generate_anchors(&shapes, &cfg).unwrap();
        assert_eq!(a.len(), (16 + 4 + 3) * 3);
        assert!((a.last().unwrap().area() - 512.0 * 512.0).abs() < 1e-6);
    }

    #[test]
    fn config_errors() {
        let empty = AnchorConfig {
            scales: vec![],
            aspect_ratios: vec![],
            stride_per_level: vec![],
        };
        assert!(matches!(generate_anchors(&[], &empty), Err(Error::Config(_))));
        assert!(generate_anchors(&[(1, 1), (1, 1)], &single(32.0, vec![1.0], 8.0)).is_err());
        assert!(generate_anchors(&[(0, 1)], &single(32.0, vec![1.0], 8.0)).is_err());
        assert!(generate_anchors(&[(1, 1)], &single(32.0, vec![-1.0], 8.0)).is_err());
        assert_eq!(AnchorConfig::hrsc().anchors_per_location(), 5);
    }
}
