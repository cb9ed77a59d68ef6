//! Multi-object tracking for fixed-camera frame sequences.
//!
//! Frames are segmented into foreground by a background model, cleaned with
//! morphological opening/closing, split into connected regions, and matched
//! to existing tracks by centroid gating with colour-histogram tie-breaking
//! during occlusions. An optional mean-shift pass refines positions.

pub mod association;
pub mod background;
pub mod frame_io;
pub mod meanshift;
pub mod morphology;
pub mod pipeline;
pub mod regions;
pub mod synthgen;

pub use background::ForegroundMask;
pub use frame_io::Frame;
