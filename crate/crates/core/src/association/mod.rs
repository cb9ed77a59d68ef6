//! Frame-to-frame correspondence between tracked objects and new detections.
//!
//! Previous objects and current detections form the two sides of a
//! bipartite graph; an edge joins them when their centroids are closer than
//! the gate `lambda`. [`TrackSet::resolve`] turns the graph into track
//! updates, handling merges (several objects entering one blob) and splits
//! (an occluded blob separating again, identities restored by comparing
//! colour histograms captured before the occlusion).

mod graph;
mod motion;
mod tracks;

pub use graph::{build_graph, gate_distance, MatchGraph};
pub use motion::{speed_and_direction, Motion};
pub use tracks::{
    AssociationParams, AssociationReport, MergeEvent, OcclusionGroup, SplitEvent, Track,
    TrackSet, TrackState, TrajectoryPoint,
};

use thiserror::Error;

use crate::regions::RegionError;

#[derive(Debug, Error, PartialEq)]
pub enum AssociationError {
    #[error("graph is {graph_m}x{graph_n} but inputs are {tracks} tracks x {detections} detections")]
    GraphMismatch {
        graph_m: usize,
        graph_n: usize,
        tracks: usize,
        detections: usize,
    },
    #[error("trajectory has fewer than two points")]
    InsufficientHistory,
    #[error(transparent)]
    Histogram(#[from] RegionError),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
