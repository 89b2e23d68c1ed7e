use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::dota::AnnotationRecord;
use crate::error::{Error, Result};
use crate::postprocess::{rotated_nms, Detection};

/// Default patch side and stride for splitting large aerial images.
pub const DEFAULT_PATCH: usize = 1024;
pub const DEFAULT_STRIDE: usize = 824;

/// Final class-wise NMS threshold when merging per-tile results.
pub const DEFAULT_MERGE_NMS: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileSpec {
    pub tile_id: String,
    pub x_off: usize,
    pub y_off: usize,
    pub width: usize,
    pub height: usize,
    pub source_image: String,
}

impl TileSpec {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (x0, y0) = (self.x_off as f64, self.y_off as f64);
        x >= x0 && y >= y0 && x <= x0 + self.width as f64 && y <= y0 + self.height as f64
    }
}

/// `0, stride, 2*stride, ...` with the last offset pulled back so the patch
/// ends at the image edge.
fn axis_offsets(size: usize, patch: usize, stride: usize) -> Vec<usize> {
    if size <= patch {
        return vec![0];
    }
    let mut offs = Vec::new();
    let mut o = 0;
    loop {
        if o + patch >= size {
            offs.push(size - patch);
            return offs;
        }
        offs.push(o);
        o += stride;
    }
}

/// Tiles covering a `width x height` image, row-major by offset.
pub fn tile_plan(source: &str, width: usize, height: usize, patch: usize, stride: usize) -> Result<Vec<TileSpec>> {
    if stride == 0 || patch < stride {
        return Err(Error::Config(format!(
            "need patch >= stride > 0, got patch={patch}, stride={stride}"
        )));
    }
    if width == 0 || height == 0 {
        return Err(Error::Config("image dimensions must be positive".into()));
    }
    let xs = axis_offsets(width, patch, stride);
    let ys = axis_offsets(height, patch, stride);
    let mut tiles = Vec::with_capacity(xs.len() * ys.len());
    for &y in &ys {
        for &x in &xs {
            tiles.push(TileSpec {
                tile_id: format!("{source}__{x}__{y}"),
                x_off: x,
                y_off: y,
                width: patch.min(width),
                height: patch.min(height),
                source_image: source.to_string(),
            });
        }
    }
    Ok(tiles)
}

/// Annotations lying entirely inside the tile, moved to tile coordinates.
/// Instances cut by the tile border are dropped.
pub fn clip_annotations(anns: &[AnnotationRecord], tile: &TileSpec) -> Vec<AnnotationRecord> {
    anns.iter()
        .filter(|a| a.quad.v.iter().all(|p| tile.contains(p.x, p.y)))
        .map(|a| AnnotationRecord {
            quad: a.quad.translated(-(tile.x_off as f64), -(tile.y_off as f64)),
            ..a.clone()
        })
        .collect()
}

/// Shifts per-tile detections back to image coordinates, concatenates them
/// in input order and applies class-wise NMS. Output is in NMS keep order.
pub fn merge_detections(
    per_tile: &[(String, Vec<Detection>)],
    specs: &[TileSpec],
    final_nms_iou: f64,
) -> Result<Vec<Detection>> {
    let by_id: HashMap<&str, &TileSpec> = specs.iter().map(|s| (s.tile_id.as_str(), s)).collect();
    let mut all = Vec::new();
    for (tile_id, dets) in per_tile {
        let spec = by_id
            .get(tile_id.as_str())
            .ok_or_else(|| Error::Reference(format!("unknown tile id {tile_id:?}")))?;
        let (dx, dy) = (spec.x_off as f64, spec.y_off as f64);
        all.extend(dets.iter().map(|d| Detection {
            rbox: d.rbox.translated(dx, dy),
            ..*d
        }));
    }
    Ok(rotated_nms(&all, final_nms_iou).into_iter().map(|i| all[i]).collect())
}

pub fn write_manifest<W: Write>(mut w: W, tiles: &[TileSpec]) -> Result<()> {
    for t in tiles {
        let line = serde_json::to_string(t).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn read_manifest<R: BufRead>(r: R) -> Result<Vec<TileSpec>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let spec: TileSpec = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?;
        out.push(spec);
    }
    Ok(out)
}
