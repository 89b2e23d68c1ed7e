//! Geometry engine for rotated-object detection.
//!
//! Oriented boxes and their exact IoU ([`geom`]), anchors, label assignment
//! and regression encodings ([`targets`]), rotated RoI Align and center
//! pooling ([`kernels`]), polygon NMS and the oriented-proposal pipeline
//! ([`postprocess`]), reference losses ([`losses`]), annotation and
//! feature-map I/O with large-image tiling ([`dataio`]) and rotated mAP
//! ([`eval`]).

pub mod cli;
pub mod dataio;
pub mod error;
pub mod eval;
pub mod geom;
pub mod kernels;
pub mod losses;
pub mod postprocess;
pub mod rng;
pub mod selftest;
pub mod synth;
pub mod targets;

pub use error::{Error, Result};
pub use geom::{HorizontalBox, Point, Quadrilateral, RotatedBox};
pub use kernels::FeatureMap;
pub use postprocess::Detection;
