//! Annotation parsing, tiling and the on-disk formats.

mod boxcsv;
mod dota;
mod fmap;
mod tiling;

pub use boxcsv::{read_box_csv, read_box_csv_path, write_box_csv, write_box_csv_path, ClassMap, HEADER};
pub use dota::{format_dota, parse_dota, AnnotationRecord};
pub use fmap::{read_fmap, read_fmap_path, write_fmap, write_fmap_path, MAGIC, VERSION};
pub use tiling::{
    clip_annotations, merge_detections, read_manifest, tile_plan, write_manifest, TileSpec, DEFAULT_MERGE_NMS,
    DEFAULT_PATCH, DEFAULT_STRIDE,
};
