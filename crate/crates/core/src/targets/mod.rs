//! Anchors, label assignment, minibatch sampling and regression encodings.

mod anchors;
mod assign;
mod encode;

pub use anchors::{generate_anchors, AnchorConfig};
pub use assign::{assign_rpn, assign_rroi, sample_minibatch, AssignConfig, Assignment, Label, Minibatch};
pub use encode::{
    decode_hdelta, decode_local, decode_transform, encode_hdelta, encode_local, encode_transform, transform_quad,
    HorizontalDelta, LocalTarget, TransformParams, LOG_RATIO_CLAMP,
};
