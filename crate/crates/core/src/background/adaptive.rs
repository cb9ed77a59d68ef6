use super::{check_dims, BackgroundError, ForegroundMask};
use crate::Frame;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveParams {
    /// Learning rate of the running background and threshold, in (0, 1).
    pub alpha_bg: f64,
    pub t_floor: f64,
    pub t_gain: f64,
}

impl Default for AdaptiveParams {
    fn default() -> Self {
        Self {
            alpha_bg: 0.05,
            t_floor: 10.0,
            t_gain: 5.0,
        }
    }
}

impl AdaptiveParams {
    pub fn validate(&self) -> Result<(), BackgroundError> {
        if !(self.alpha_bg > 0.0 && self.alpha_bg < 1.0) {
            return Err(BackgroundError::InvalidParameter(format!(
                "alpha_bg must be in (0,1), got {}",
                self.alpha_bg
            )));
        }
        if !(self.t_floor > 0.0 && self.t_floor <= 255.0) {
            return Err(BackgroundError::InvalidParameter(format!(
                "t_floor must be in (0,255], got {}",
                self.t_floor
            )));
        }
        if !(self.t_gain > 0.0) {
            return Err(BackgroundError::InvalidParameter(format!(
                "t_gain must be positive, got {}",
                self.t_gain
            )));
        }
        Ok(())
    }
}

/// Running-mean background `B(x)` with per-pixel adaptive threshold `T(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveModel {
    width: usize,
    height: usize,
    background: Vec<f64>,
    threshold: Vec<f64>,
    params: AdaptiveParams,
}

impl AdaptiveModel {
    /// Background seeded from `frame`, every threshold at `t_floor`.
    pub fn from_frame(frame: &Frame, params: AdaptiveParams) -> Result<Self, BackgroundError> {
        params.validate()?;
        if frame.channels() != 1 {
            return Err(BackgroundError::RequiresGray);
        }
        Ok(Self {
            width: frame.width(),
            height: frame.height(),
            background: frame.data().iter().map(|&v| v as f64).collect(),
            threshold: vec![params.t_floor; frame.width() * frame.height()],
            params,
        })
    }

    pub fn from_parts(
        width: usize,
        height: usize,
        background: Vec<f64>,
        threshold: Vec<f64>,
        params: AdaptiveParams,
    ) -> Result<Self, BackgroundError> {
        params.validate()?;
        let n = width * height;
        if background.len() != n || threshold.len() != n {
            return Err(BackgroundError::DimensionMismatch {
                expected: format!("{n} entries"),
                actual: format!("{}/{}", background.len(), threshold.len()),
            });
        }
        Ok(Self {
            width,
            height,
            background,
            threshold,
            params,
        })
    }

    pub fn background(&self) -> &[f64] {
        &self.background
    }

    pub fn threshold(&self) -> &[f64] {
        &self.threshold
    }

    pub fn classify(&self, frame: &Frame) -> Result<ForegroundMask, BackgroundError> {
        check_dims((self.width, self.height, 1), frame)?;
        let bits = frame
            .data()
            .iter()
            .zip(self.background.iter().zip(&self.threshold))
            .map(|(&i, (&b, &t))| (i as f64 - b).abs() > t)
            .collect();
        Ok(ForegroundMask::from_bits(self.width, self.height, bits))
    }

    /// Blend background pixels (mask == 0) into `B` and `T`; foreground
    /// pixels keep their state.
    pub fn update(&mut self, frame: &Frame, mask: &ForegroundMask) -> Result<(), BackgroundError> {
        check_dims((self.width, self.height, 1), frame)?;
        if mask.width() != self.width || mask.height() != self.height {
            return Err(BackgroundError::DimensionMismatch {
                expected: format!("{}x{}", self.width, self.height),
                actual: format!("{}x{}", mask.width(), mask.height()),
            });
        }
        let AdaptiveParams {
            alpha_bg,
            t_floor,
            t_gain,
        } = self.params;
        for (idx, &i) in frame.data().iter().enumerate() {
            if mask.bits()[idx] {
                continue;
            }
            let i = i as f64;
            let b_old = self.background[idx];
            self.background[idx] = ((1.0 - alpha_bg) * b_old + alpha_bg * i).clamp(0.0, 255.0);
            let t = (1.0 - alpha_bg) * self.threshold[idx] + alpha_bg * t_gain * (i - b_old).abs();
            self.threshold[idx] = t.clamp(t_floor, 255.0);
        }
        Ok(())
    }
}
