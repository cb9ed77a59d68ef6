use serde::Serialize;

use super::{AssociationError, Track};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Motion {
    /// Pixels per frame.
    pub speed: f64,
    /// Degrees in [0, 360): 0 = +x (right), 90 = up on screen.
    pub direction: f64,
}

/// Average velocity between the trajectory point `window` entries back (or
/// the oldest one) and the latest point, divided by their frame gap.
pub fn speed_and_direction(track: &Track, window: usize) -> Result<Motion, AssociationError> {
    let traj = &track.trajectory;
    if traj.len() < 2 {
        return Err(AssociationError::InsufficientHistory);
    }
    let last = traj[traj.len() - 1];
    let back = window.clamp(1, traj.len() - 1);
    let first = traj[traj.len() - 1 - back];
    let frames = (last.frame - first.frame) as f64;
    let dx = last.position.x - first.position.x;
    let dy = last.position.y - first.position.y;
    let speed = (dx * dx + dy * dy).sqrt() / frames;
    // image y grows downward
    let mut direction = (-dy).atan2(dx).to_degrees().rem_euclid(360.0);
    if direction == 0.0 || direction >= 360.0 {
        direction = 0.0;
    }
    Ok(Motion { speed, direction })
}
