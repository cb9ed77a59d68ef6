//! Kernel-histogram mean-shift localisation.
//!
//! A target is described by a colour histogram `q` collected under an
//! Epanechnikov kernel over an elliptical window of half-axes `(hx, hy)`.
//! Each iteration builds the candidate histogram `p` at the current centre,
//! weights every window pixel by `sqrt(q[b] / p[b])` for its bin `b`, and
//! moves the centre to the weighted mean of pixel positions, until the move
//! is shorter than `epsilon`.

use serde::Serialize;
use thiserror::Error;

use crate::regions::{bin_index, histogram_len, ColorHistogram, Point};
use crate::Frame;

#[derive(Debug, Error, PartialEq)]
pub enum MeanShiftError {
    #[error("window has no pixels inside the frame")]
    EmptyWindow,
    #[error("every pixel weight is zero")]
    ZeroWeightField,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanShiftParams {
    pub epsilon: f64,
    pub max_iter: usize,
    /// Blend factor for window size updates.
    pub gamma: f64,
}

impl Default for MeanShiftParams {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            max_iter: 20,
            gamma: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetModel {
    /// Unit-sum kernel-weighted histogram.
    pub q: ColorHistogram,
    /// Unit-sum unweighted histogram of the same window.
    pub q_flat: ColorHistogram,
    pub hx: f64,
    pub hy: f64,
    pub bins_per_channel: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackOutcome {
    pub position: Point,
    pub iterations: usize,
    pub converged: bool,
    /// Length of the final move.
    pub last_step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Geometry {
    /// Extent along the principal axis nearest the image x axis.
    pub width: f64,
    pub height: f64,
    /// Major-axis angle in degrees, [0, 180), counter-clockwise on screen.
    pub orientation: f64,
}

/// Epanechnikov profile.
#[inline]
fn profile(r: f64) -> f64 {
    if r < 1.0 {
        1.0 - r
    } else {
        0.0
    }
}

/// Pixels under the kernel support centred at `c`, with their kernel values.
fn support(frame: &Frame, c: Point, hx: f64, hy: f64) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
    let x_lo = (c.x - hx).ceil().max(0.0) as usize;
    let y_lo = (c.y - hy).ceil().max(0.0) as usize;
    let x_hi = (c.x + hx).floor().min(frame.width() as f64 - 1.0);
    let y_hi = (c.y + hy).floor().min(frame.height() as f64 - 1.0);
    let (x_hi, y_hi) = if x_hi < 0.0 || y_hi < 0.0 {
        (0, 0)
    } else {
        (x_hi as usize + 1, y_hi as usize + 1)
    };
    (y_lo..y_hi).flat_map(move |y| {
        (x_lo..x_hi).filter_map(move |x| {
            let dx = (x as f64 - c.x) / hx;
            let dy = (y as f64 - c.y) / hy;
            let k = profile(dx * dx + dy * dy);
            (k > 0.0).then_some((x, y, k))
        })
    })
}

fn check_window(hx: f64, hy: f64) -> Result<(), MeanShiftError> {
    if hx >= 1.0 && hy >= 1.0 && hx.is_finite() && hy.is_finite() {
        Ok(())
    } else {
        Err(MeanShiftError::InvalidParameter(format!(
            "window half-sizes must be >= 1, got ({hx}, {hy})"
        )))
    }
}

/// Kernel-weighted (or, with `flat`, plain) histogram over the support.
fn window_histogram(
    frame: &Frame,
    c: Point,
    hx: f64,
    hy: f64,
    bins_per_channel: usize,
    flat: bool,
) -> Result<ColorHistogram, MeanShiftError> {
    let mut h = ColorHistogram::zeros(histogram_len(bins_per_channel, frame.channels()));
    for (x, y, k) in support(frame, c, hx, hy) {
        h.bins[bin_index(frame.pixel(x, y), bins_per_channel)] += if flat { 1.0 } else { k };
    }
    if h.sum() <= 0.0 {
        return Err(MeanShiftError::EmptyWindow);
    }
    h.normalize();
    Ok(h)
}

pub fn build_target_model(
    frame: &Frame,
    center: Point,
    hx: f64,
    hy: f64,
    bins_per_channel: usize,
) -> Result<TargetModel, MeanShiftError> {
    check_window(hx, hy)?;
    if !(1..=256).contains(&bins_per_channel) {
        return Err(MeanShiftError::InvalidParameter(format!(
            "bins per channel must be in 1..=256, got {bins_per_channel}"
        )));
    }
    let q = window_histogram(frame, center, hx, hy, bins_per_channel, false)?;
    let q_flat = window_histogram(frame, center, hx, hy, bins_per_channel, true)?;
    Ok(TargetModel {
        q,
        q_flat,
        hx,
        hy,
        bins_per_channel,
    })
}

/// Candidate histogram `p` at `center` using the model's window.
pub fn candidate_histogram(
    frame: &Frame,
    model: &TargetModel,
    center: Point,
) -> Result<ColorHistogram, MeanShiftError> {
    window_histogram(frame, center, model.hx, model.hy, model.bins_per_channel, false)
}

/// One mean-shift move from `y0`.
pub fn track_step(frame: &Frame, model: &TargetModel, y0: Point) -> Result<Point, MeanShiftError> {
    let p = candidate_histogram(frame, model, y0)?;
    let (mut sw, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for (x, y, _) in support(frame, y0, model.hx, model.hy) {
        let b = bin_index(frame.pixel(x, y), model.bins_per_channel);
        if p.bins[b] > 0.0 {
            let w = (model.q.bins[b] / p.bins[b]).sqrt();
            sw += w;
            sx += w * x as f64;
            sy += w * y as f64;
        }
    }
    if sw <= 0.0 {
        return Err(MeanShiftError::ZeroWeightField);
    }
    Ok(Point::new(sx / sw, sy / sw))
}

/// Iterate [`track_step`] until a move shorter than `epsilon` or `max_iter` moves.
pub fn track(
    frame: &Frame,
    model: &TargetModel,
    y_init: Point,
    epsilon: f64,
    max_iter: usize,
) -> Result<TrackOutcome, MeanShiftError> {
    if !(epsilon > 0.0) || max_iter == 0 {
        return Err(MeanShiftError::InvalidParameter(format!(
            "need epsilon > 0 and max_iter >= 1, got {epsilon} / {max_iter}"
        )));
    }
    let mut y0 = y_init;
    let mut last_step = f64::INFINITY;
    for k in 1..=max_iter {
        let y1 = track_step(frame, model, y0)?;
        last_step = ((y1.x - y0.x).powi(2) + (y1.y - y0.y).powi(2)).sqrt();
        y0 = y1;
        if last_step < epsilon {
            return Ok(TrackOutcome {
                position: y0,
                iterations: k,
                converged: true,
                last_step,
            });
        }
    }
    Ok(TrackOutcome {
        position: y0,
        iterations: max_iter,
        converged: false,
        last_step,
    })
}

/// Width, height and orientation from second-order moments of a weight
/// image over the window at `y`.
///
/// The weight of a pixel in bin `b` is `max(0, q[b] - q_flat[b])`: colours
/// concentrated toward the centre of the model window count, colours of the
/// surround do not. A target whose window was a single colour has no such
/// contrast and yields [`MeanShiftError::ZeroWeightField`].
pub fn estimate_geometry(
    frame: &Frame,
    model: &TargetModel,
    y: Point,
) -> Result<Geometry, MeanShiftError> {
    let excess: Vec<f64> = model
        .q
        .bins
        .iter()
        .zip(&model.q_flat.bins)
        .map(|(q, f)| (q - f).max(0.0))
        .collect();
    let (mut m00, mut m10, mut m01) = (0.0, 0.0, 0.0);
    let mut pts = Vec::new();
    for (x, py, _) in support(frame, y, model.hx, model.hy) {
        let w = excess[bin_index(frame.pixel(x, py), model.bins_per_channel)];
        if w > 0.0 {
            m00 += w;
            m10 += w * x as f64;
            m01 += w * py as f64;
            pts.push((x as f64, py as f64, w));
        }
    }
    if m00 <= 0.0 {
        return Err(MeanShiftError::ZeroWeightField);
    }
    let (cx, cy) = (m10 / m00, m01 / m00);
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, py, w) in pts {
        let (dx, dy) = (x - cx, py - cy);
        sxx += w * dx * dx;
        syy += w * dy * dy;
        sxy += w * dx * dy;
    }
    sxx /= m00;
    syy /= m00;
    sxy /= m00;
    let mid = (sxx + syy) / 2.0;
    let spread = (((sxx - syy) / 2.0).powi(2) + sxy * sxy).sqrt();
    let major = 4.0 * (mid + spread).max(0.0).sqrt();
    let minor = 4.0 * (mid - spread).max(0.0).sqrt();
    // image y points down; report the angle with y up
    let angle_down = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let mut orientation = (-angle_down).to_degrees().rem_euclid(180.0);
    if orientation >= 180.0 {
        orientation = 0.0;
    }
    let near_horizontal = orientation <= 45.0 || orientation >= 135.0;
    let (width, height) = if near_horizontal {
        (major, minor)
    } else {
        (minor, major)
    };
    Ok(Geometry {
        width,
        height,
        orientation,
    })
}

/// Window for the next frame: `h ← (1 - gamma) h + gamma * extent / 2`,
/// never below 1 pixel. The search restarts at `y_final`.
pub fn reseed(model: &TargetModel, y_final: Point, geometry: &Geometry, gamma: f64) -> (TargetModel, Point) {
    let blend = |h: f64, extent: f64| ((1.0 - gamma) * h + gamma * extent / 2.0).max(1.0);
    let next = TargetModel {
        q: model.q.clone(),
        q_flat: model.q_flat.clone(),
        hx: blend(model.hx, geometry.width),
        hy: blend(model.hy, geometry.height),
        bins_per_channel: model.bins_per_channel,
    };
    (next, y_final)
}
