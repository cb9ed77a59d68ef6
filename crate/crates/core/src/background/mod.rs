//! Per-pixel background models producing binary foreground maps.
//!
//! Two models are provided. [`AdaptiveModel`] keeps a running background
//! intensity and an adaptive threshold per pixel and flags
//! `|I(x) - B(x)| > T(x)`. [`MixtureModel`] keeps a small weighted set of
//! Gaussians per pixel; components that carry most of the weight with low
//! variance explain the background.

mod adaptive;
mod gmm;

pub use adaptive::{AdaptiveModel, AdaptiveParams};
pub use gmm::{Component, GmmParams, MixtureModel, MixturePixel, VARIANCE_FLOOR};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BackgroundError {
    #[error("dimension mismatch: model is {expected}, input is {actual}")]
    DimensionMismatch { expected: String, actual: String },
    #[error("model requires a single-channel frame")]
    RequiresGray,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Binary W×H map, `true` = foreground.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForegroundMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl ForegroundMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    /// Panics if `bits.len() != width * height`.
    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), width * height, "mask size mismatch");
        Self {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Pointwise `self ⊆ other`.
    pub fn is_subset_of(&self, other: &ForegroundMask) -> bool {
        self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }
}

fn check_dims(
    (w, h, c): (usize, usize, usize),
    frame: &crate::Frame,
) -> Result<(), BackgroundError> {
    if frame.width() != w || frame.height() != h || frame.channels() != c {
        return Err(BackgroundError::DimensionMismatch {
            expected: format!("{w}x{h}x{c}"),
            actual: format!("{}x{}x{}", frame.width(), frame.height(), frame.channels()),
        });
    }
    Ok(())
}
