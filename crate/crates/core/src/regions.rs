//! Connected-component grouping of foreground pixels and per-region
//! features: bounding box, area, centre of mass, and colour histograms of
//! the upper and lower halves of the box.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{ForegroundMask, Frame};

#[derive(Debug, Error, PartialEq)]
pub enum RegionError {
    #[error("component has no pixels")]
    EmptyComponent,
    #[error("histogram lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("cannot downsample {from} bins to {to}")]
    IndivisibleBins { from: usize, to: usize },
    #[error("pixel ({0}, {1}) lies outside the frame")]
    PixelOutOfFrame(usize, usize),
    #[error("bins per channel must be in 1..=256, got {0}")]
    InvalidBinCount(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Inclusive pixel bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x_min: usize,
    pub y_min: usize,
    pub x_max: usize,
    pub y_max: usize,
}

impl BoundingBox {
    pub fn width(&self) -> usize {
        self.x_max - self.x_min + 1
    }

    pub fn height(&self) -> usize {
        self.y_max - self.y_min + 1
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x_min as f64
            && p.x <= self.x_max as f64
            && p.y >= self.y_min as f64
            && p.y <= self.y_max as f64
    }

    /// True when the boxes intersect after growing `self` by `margin` pixels.
    pub fn overlaps(&self, other: &BoundingBox, margin: usize) -> bool {
        // margin counts empty pixels allowed between the boxes
        self.x_min <= other.x_max + margin + 1
            && other.x_min <= self.x_max + margin + 1
            && self.y_min <= other.y_max + margin + 1
            && other.y_min <= self.y_max + margin + 1
    }

    pub fn union(&self, other: &BoundingBox) -> BoundingBox {
        BoundingBox {
            x_min: self.x_min.min(other.x_min),
            y_min: self.y_min.min(other.y_min),
            x_max: self.x_max.max(other.x_max),
            y_max: self.y_max.max(other.y_max),
        }
    }
}

/// How [`ColorHistogram::downsample`] reduces N bins to C.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DownsampleMode {
    /// Keep every (N/C)-th bin, 1-based: `out[i] = h[i * N / C]`.
    #[default]
    Sample,
    /// Sum each run of N/C consecutive bins.
    Pool,
}

/// Flattened colour histogram. RGB layout: `r_bin * c² + g_bin * c + b_bin`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorHistogram {
    pub bins: Vec<f64>,
}

impl ColorHistogram {
    pub fn zeros(len: usize) -> Self {
        Self {
            bins: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.bins.iter().sum()
    }

    /// Scale to unit sum; an all-zero histogram stays all-zero.
    pub fn normalize(&mut self) {
        let total = self.sum();
        if total > 0.0 {
            for b in &mut self.bins {
                *b /= total;
            }
        }
    }

    pub fn l1_distance(&self, other: &ColorHistogram) -> Result<f64, RegionError> {
        l1_distance(self, other)
    }

    pub fn downsample(&self, target: usize, mode: DownsampleMode) -> Result<ColorHistogram, RegionError> {
        downsample_histogram(self, target, mode)
    }
}

/// Bin count for `bins_per_channel` quantization levels per channel.
pub fn histogram_len(bins_per_channel: usize, channels: usize) -> usize {
    bins_per_channel.pow(channels as u32)
}

#[inline]
pub fn bin_index(pixel: &[u8], bins_per_channel: usize) -> usize {
    pixel
        .iter()
        .fold(0, |acc, &v| acc * bins_per_channel + v as usize * bins_per_channel / 256)
}

pub fn l1_distance(a: &ColorHistogram, b: &ColorHistogram) -> Result<f64, RegionError> {
    if a.len() != b.len() {
        return Err(RegionError::LengthMismatch(a.len(), b.len()));
    }
    Ok(a.bins.iter().zip(&b.bins).map(|(x, y)| (x - y).abs()).sum())
}

/// Reduce `h` from N to `target` bins and renormalize to unit area.
pub fn downsample_histogram(
    h: &ColorHistogram,
    target: usize,
    mode: DownsampleMode,
) -> Result<ColorHistogram, RegionError> {
    let n = h.len();
    if target == 0 || n == 0 || n % target != 0 {
        return Err(RegionError::IndivisibleBins { from: n, to: target });
    }
    let stride = n / target;
    let bins = match mode {
        // 1-based i*N/C is 0-based (i+1)*stride - 1
        DownsampleMode::Sample => (0..target).map(|i| h.bins[(i + 1) * stride - 1]).collect(),
        DownsampleMode::Pool => h.bins.chunks_exact(stride).map(|c| c.iter().sum()).collect(),
    };
    let mut out = ColorHistogram { bins };
    out.normalize();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionFeatures {
    pub label: usize,
    pub bbox: BoundingBox,
    pub area: usize,
    pub centroid: Point,
    pub hist_upper: ColorHistogram,
    pub hist_lower: ColorHistogram,
}

/// Appearance distance: upper-half L1 plus lower-half L1, in [0, 4].
pub fn d_total(a: &RegionFeatures, b: &RegionFeatures) -> Result<f64, RegionError> {
    Ok(l1_distance(&a.hist_upper, &b.hist_upper)? + l1_distance(&a.hist_lower, &b.hist_lower)?)
}

/// A connected component as `(x, y)` coordinates in raster order.
pub type PixelSet = Vec<(usize, usize)>;

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi] = lo;
    }
}

/// 8-connected components, two-pass with union-find. Components are ordered
/// by the raster position of their first pixel.
pub fn label_components(mask: &ForegroundMask) -> Vec<PixelSet> {
    let (w, h) = (mask.width(), mask.height());
    let mut parent: Vec<usize> = (0..w * h).collect();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let idx = y * w + x;
            // already-visited neighbours: W, NW, N, NE
            if x > 0 && mask.get(x - 1, y) {
                union(&mut parent, idx, idx - 1);
            }
            if y > 0 {
                if x > 0 && mask.get(x - 1, y - 1) {
                    union(&mut parent, idx, idx - w - 1);
                }
                if mask.get(x, y - 1) {
                    union(&mut parent, idx, idx - w);
                }
                if x + 1 < w && mask.get(x + 1, y - 1) {
                    union(&mut parent, idx, idx - w + 1);
                }
            }
        }
    }
    let mut slot = vec![usize::MAX; w * h];
    let mut components: Vec<PixelSet> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let root = find(&mut parent, y * w + x);
            if slot[root] == usize::MAX {
                slot[root] = components.len();
                components.push(Vec::new());
            }
            components[slot[root]].push((x, y));
        }
    }
    components
}

/// Area, centroid, bbox and split histograms of one component. Pixels with
/// `y < y_min + height / 2` feed the upper histogram, the rest the lower.
pub fn extract_features(
    component: &[(usize, usize)],
    label: usize,
    frame: &Frame,
    bins_per_channel: usize,
) -> Result<RegionFeatures, RegionError> {
    if !(1..=256).contains(&bins_per_channel) {
        return Err(RegionError::InvalidBinCount(bins_per_channel));
    }
    let &(x0, y0) = component.first().ok_or(RegionError::EmptyComponent)?;
    let mut bbox = BoundingBox {
        x_min: x0,
        y_min: y0,
        x_max: x0,
        y_max: y0,
    };
    let (mut sx, mut sy) = (0u64, 0u64);
    for &(x, y) in component {
        if x >= frame.width() || y >= frame.height() {
            return Err(RegionError::PixelOutOfFrame(x, y));
        }
        bbox.x_min = bbox.x_min.min(x);
        bbox.x_max = bbox.x_max.max(x);
        bbox.y_min = bbox.y_min.min(y);
        bbox.y_max = bbox.y_max.max(y);
        sx += x as u64;
        sy += y as u64;
    }
    let area = component.len();
    let centroid = Point::new(sx as f64 / area as f64, sy as f64 / area as f64);

    let len = histogram_len(bins_per_channel, frame.channels());
    let mut hist_upper = ColorHistogram::zeros(len);
    let mut hist_lower = ColorHistogram::zeros(len);
    let cut = bbox.y_min as f64 + bbox.height() as f64 / 2.0;
    for &(x, y) in component {
        let bin = bin_index(frame.pixel(x, y), bins_per_channel);
        if (y as f64) < cut {
            hist_upper.bins[bin] += 1.0;
        } else {
            hist_lower.bins[bin] += 1.0;
        }
    }
    hist_upper.normalize();
    hist_lower.normalize();
    Ok(RegionFeatures {
        label,
        bbox,
        area,
        centroid,
        hist_upper,
        hist_lower,
    })
}

/// Label `mask`, drop components smaller than `min_area`, and extract
/// features for the rest. Labels are the surviving components' indices.
pub fn detect_regions(
    mask: &ForegroundMask,
    frame: &Frame,
    min_area: usize,
    bins_per_channel: usize,
) -> Result<Vec<RegionFeatures>, RegionError> {
    label_components(mask)
        .iter()
        .filter(|c| c.len() >= min_area.max(1))
        .enumerate()
        .map(|(label, c)| extract_features(c, label, frame, bins_per_channel))
        .collect()
}
