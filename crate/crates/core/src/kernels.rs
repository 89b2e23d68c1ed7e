//! Dense feature-map kernels: rotated RoI Align and center pooling.
//!
//! Feature value `(row i, col j)` sits at continuous coordinate `(x = j, y = i)`.
//! Reads outside the grid return zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::RotatedBox;

/// `H x W x C`, row-major, channel-last.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        let expected = height
            .checked_mul(width)
            .and_then(|v| v.checked_mul(channels))
            .ok_or_else(|| Error::Shape("feature map size overflows".into()))?;
        if data.len() != expected {
            return Err(Error::Shape(format!(
                "{height}x{width}x{channels} map needs {expected} values, got {}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Shape(format!("non-finite value at flat index {i}")));
        }
        Ok(FeatureMap {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        FeatureMap {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(height * width * channels);
        for i in 0..height {
            for j in 0..width {
                for c in 0..channels {
                    data.push(f(i, j, c));
                }
            }
        }
        FeatureMap {
            height,
            width,
            channels,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize, c: usize) -> f64 {
        self.data[(i * self.width + j) * self.channels + c]
    }

    pub fn pixel(&self, i: usize, j: usize) -> &[f64] {
        let start = (i * self.width + j) * self.channels;
        &self.data[start..start + self.channels]
    }

    fn pixel_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let start = (i * self.width + j) * self.channels;
        &mut self.data[start..start + self.channels]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RRoiAlignConfig {
    /// Output grid side.
    pub k: usize,
    /// Sampling points per bin side.
    pub ks: usize,
}

impl Default for RRoiAlignConfig {
    fn default() -> Self {
        RRoiAlignConfig { k: 7, ks: 2 }
    }
}

impl RRoiAlignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.ks == 0 {
            return Err(Error::Config(format!("k and ks must be at least 1, got {self:?}")));
        }
        Ok(())
    }
}

/// Adds `weight * f(x, y)` to `acc` for every channel.
fn accumulate_bilinear(f: &FeatureMap, x: f64, y: f64, weight: f64, acc: &mut [f64]) {
    let w = f.width as f64;
    let h = f.height as f64;
    if !(x > -1.0 && x < w && y > -1.0 && y < h) {
        return;
    }
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let (x0, y0) = (x0 as i64, y0 as i64);
    let taps = [
        (y0, x0, (1.0 - fy) * (1.0 - fx)),
        (y0, x0 + 1, (1.0 - fy) * fx),
        (y0 + 1, x0, fy * (1.0 - fx)),
        (y0 + 1, x0 + 1, fy * fx),
    ];
    for (i, j, tw) in taps {
        if tw == 0.0 || i < 0 || j < 0 || i >= f.height as i64 || j >= f.width as i64 {
            continue;
        }
        let px = f.pixel(i as usize, j as usize);
        let s = weight * tw;
        for (a, v) in acc.iter_mut().zip(px) {
            *a += s * v;
        }
    }
}

/// Bilinear read of every channel at `(x, y)`, zero outside the grid.
pub fn bilinear_sample(f: &FeatureMap, x: f64, y: f64) -> Vec<f64> {
    let mut out = vec![0.0; f.channels];
    accumulate_bilinear(f, x, y, 1.0, &mut out);
    out
}

/// Box-local coordinates (origin at the box's first corner, x along `w`,
/// y along `h`) to feature-map coordinates.
pub fn local_to_global(b: &RotatedBox, xl: f64, yl: f64) -> (f64, f64) {
    let (s, c) = b.theta.sin_cos();
    let dx = xl - 0.5 * b.w;
    let dy = yl - 0.5 * b.h;
    (c * dx - s * dy + b.cx, s * dx + c * dy + b.cy)
}

/// Pools a `k x k x C` feature from the rotated box. Bin `(i, j)` averages
/// `ks x ks` bilinear samples; row `i` runs along the box height, column `j`
/// along its width. The box must already be in feature-map coordinates.
pub fn rroi_align(f: &FeatureMap, b: &RotatedBox, cfg: &RRoiAlignConfig) -> Result<FeatureMap> {
    cfg.validate()?;
    b.validate()?;
    let RRoiAlignConfig { k, ks } = *cfg;
    let mut out = FeatureMap::zeros(k, k, f.channels);
    let bin_h = b.h / k as f64;
    let bin_w = b.w / k as f64;
    let step_h = bin_h / ks as f64;
    let step_w = bin_w / ks as f64;
    let weight = 1.0 / (ks * ks) as f64;
    let (s, c) = b.theta.sin_cos();

    for i in 0..k {
        for j in 0..k {
            let acc = out.pixel_mut(i, j);
            for ih in 0..ks {
                let yl = i as f64 * bin_h + (ih as f64 + 0.5) * step_h;
                let dy = yl - 0.5 * b.h;
                for jw in 0..ks {
                    let xl = j as f64 * bin_w + (jw as f64 + 0.5) * step_w;
                    let dx = xl - 0.5 * b.w;
                    let xg = c * dx - s * dy + b.cx;
                    let yg = s * dx + c * dy + b.cy;
                    accumulate_bilinear(f, xg, yg, weight, acc);
                }
            }
        }
    }
    Ok(out)
}

/// `out[r][c][ch] = max(row r of ch) + max(column c of ch)`.
pub fn center_pool(f: &FeatureMap) -> FeatureMap {
    let (h, w, ch) = (f.height, f.width, f.channels);
    let mut row_max = vec![f64::NEG_INFINITY; h * ch];
    let mut col_max = vec![f64::NEG_INFINITY; w * ch];
    for i in 0..h {
        for j in 0..w {
            for (c, &v) in f.pixel(i, j).iter().enumerate() {
                let r = &mut row_max[i * ch + c];
                *r = r.max(v);
                let m = &mut col_max[j * ch + c];
                *m = m.max(v);
            }
        }
    }
    FeatureMap::from_fn(h, w, ch, |i, j, c| row_max[i * ch + c] + col_max[j * ch + c])
}
