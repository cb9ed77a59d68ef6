use std::cmp::Ordering;

use super::{check_dims, BackgroundError, ForegroundMask};
use crate::Frame;

/// Lower bound on every component variance.
pub const VARIANCE_FLOOR: f64 = 0.75;

/// Mixture-model constants. Defaults follow the standard initial threshold
/// values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmmParams {
    /// Weight learning rate.
    pub alpha: f64,
    /// Mean/variance learning rate.
    pub rho: f64,
    /// Match iff squared deviation <= this * variance.
    pub deviation_sq_threshold: f64,
    pub init_variance: f64,
    pub init_mixprop: f64,
    /// Cumulative weight that the background prefix must exceed.
    pub background_threshold: f64,
    /// Maximum components per pixel.
    pub component_threshold: usize,
}

impl Default for GmmParams {
    fn default() -> Self {
        Self {
            alpha: 0.02,
            rho: 0.01,
            deviation_sq_threshold: 49.0,
            init_variance: 3.0,
            init_mixprop: 1e-5,
            background_threshold: 0.9,
            component_threshold: 10,
        }
    }
}

impl GmmParams {
    pub fn validate(&self) -> Result<(), BackgroundError> {
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(BackgroundError::InvalidParameter(format!(
                    "{name} must be in (0,1], got {v}"
                )))
            }
        };
        unit("alpha", self.alpha)?;
        unit("rho", self.rho)?;
        unit("init_mixprop", self.init_mixprop)?;
        if !(self.background_threshold > 0.0 && self.background_threshold < 1.0) {
            return Err(BackgroundError::InvalidParameter(format!(
                "background_threshold must be in (0,1), got {}",
                self.background_threshold
            )));
        }
        if !(self.deviation_sq_threshold > 0.0) || !(self.init_variance > 0.0) {
            return Err(BackgroundError::InvalidParameter(
                "deviation_sq_threshold and init_variance must be positive".into(),
            ));
        }
        if self.component_threshold == 0 {
            return Err(BackgroundError::InvalidParameter(
                "component_threshold must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// One Gaussian with a scalar variance shared across channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Component {
    pub weight: f64,
    pub mean: [f64; 3],
    pub variance: f64,
}

impl Component {
    fn rank(&self) -> f64 {
        self.weight / self.variance.sqrt()
    }

    fn sq_deviation(&self, sample: &[f64]) -> f64 {
        sample
            .iter()
            .zip(&self.mean)
            .map(|(s, m)| (s - m) * (s - m))
            .sum()
    }
}

/// Components of one pixel, kept sorted by `weight / sigma`, highest first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MixturePixel {
    components: Vec<Component>,
}

impl MixturePixel {
    pub fn components(&self) -> &[Component] {
        &self.components
    }

    fn find_match(&self, sample: &[f64], p: &GmmParams) -> Option<usize> {
        self.components
            .iter()
            .position(|c| c.sq_deviation(sample) <= p.deviation_sq_threshold * c.variance)
    }

    fn seed(&mut self, sample: &[f64], p: &GmmParams) {
        let mut mean = [0.0; 3];
        mean[..sample.len()].copy_from_slice(sample);
        let fresh = Component {
            weight: p.init_mixprop,
            mean,
            variance: p.init_variance.max(VARIANCE_FLOOR),
        };
        if self.components.len() < p.component_threshold {
            self.components.push(fresh);
        } else if let Some(last) = self.components.last_mut() {
            *last = fresh;
        }
    }

    fn apply_match(&mut self, matched: usize, sample: &[f64], weight_rate: f64, rho: f64) {
        for (k, c) in self.components.iter_mut().enumerate() {
            let hit = if k == matched { 1.0 } else { 0.0 };
            c.weight = (1.0 - weight_rate) * c.weight + weight_rate * hit;
        }
        let c = &mut self.components[matched];
        for (m, s) in c.mean.iter_mut().zip(sample) {
            *m = (1.0 - rho) * *m + rho * s;
        }
        let dev = c.sq_deviation(sample);
        c.variance = ((1.0 - rho) * c.variance + rho * dev).max(VARIANCE_FLOOR);
    }

    /// Renormalize and re-sort; returns the new position of `tracked`.
    fn normalize_and_sort(&mut self, tracked: Option<usize>) -> Option<usize> {
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        if total > 0.0 {
            for c in &mut self.components {
                c.weight /= total;
            }
        }
        let mut order: Vec<usize> = (0..self.components.len()).collect();
        order.sort_by(|&a, &b| {
            self.components[b]
                .rank()
                .partial_cmp(&self.components[a].rank())
                .unwrap_or(Ordering::Equal)
        });
        let sorted = order.iter().map(|&i| self.components[i]).collect();
        self.components = sorted;
        tracked.and_then(|t| order.iter().position(|&i| i == t))
    }

    /// Number of leading components forming the background set.
    fn background_len(&self, threshold: f64) -> usize {
        let mut cumulative = 0.0;
        for (k, c) in self.components.iter().enumerate() {
            cumulative += c.weight;
            if cumulative > threshold {
                return k + 1;
            }
        }
        self.components.len()
    }

    /// Absorb one sample; returns `true` when the pixel is foreground.
    ///
    /// `foreground_rate` is the weight learning rate applied when the
    /// matched component ends up outside the background set. Passing
    /// `p.alpha` gives the plain update.
    fn observe(&mut self, sample: &[f64], p: &GmmParams, foreground_rate: f64) -> bool {
        let Some(k) = self.find_match(sample, p) else {
            self.seed(sample, p);
            self.normalize_and_sort(None);
            return true;
        };
        let snapshot = (foreground_rate != p.alpha).then(|| self.components.clone());
        self.apply_match(k, sample, p.alpha, p.rho);
        let pos = self.normalize_and_sort(Some(k)).expect("matched component present");
        let fg = pos >= self.background_len(p.background_threshold);
        match snapshot {
            Some(previous) if fg => {
                self.components = previous;
                self.apply_match(k, sample, foreground_rate, p.rho);
                let pos = self.normalize_and_sort(Some(k)).expect("matched component present");
                pos >= self.background_len(p.background_threshold)
            }
            _ => fg,
        }
    }
}

/// Per-pixel Gaussian mixture over a W×H grid of 1- or 3-channel samples.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<MixturePixel>,
}

impl MixtureModel {
    /// Empty model; the first frame seeds every pixel.
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self {
            width,
            height,
            channels,
            pixels: vec![MixturePixel::default(); width * height],
        }
    }

    pub fn pixel(&self, x: usize, y: usize) -> &MixturePixel {
        &self.pixels[y * self.width + x]
    }

    pub fn pixels(&self) -> &[MixturePixel] {
        &self.pixels
    }

    /// Classify every pixel of `frame` and fold it into the model.
    pub fn classify_and_update(
        &mut self,
        frame: &Frame,
        params: &GmmParams,
    ) -> Result<ForegroundMask, BackgroundError> {
        self.classify_and_update_with_rate(frame, params, params.alpha)
    }

    /// As [`classify_and_update`](Self::classify_and_update), but pixels whose
    /// matched component lies outside the background set learn their weights
    /// at `foreground_rate` instead of `alpha`. A slow rate keeps slow or
    /// briefly stationary objects from being absorbed into the background.
    pub fn classify_and_update_with_rate(
        &mut self,
        frame: &Frame,
        params: &GmmParams,
        foreground_rate: f64,
    ) -> Result<ForegroundMask, BackgroundError> {
        check_dims((self.width, self.height, self.channels), frame)?;
        let mut sample = [0.0f64; 3];
        let c = self.channels;
        let bits = frame
            .data()
            .chunks_exact(c)
            .zip(self.pixels.iter_mut())
            .map(|(px, mix)| {
                for (s, &v) in sample.iter_mut().zip(px) {
                    *s = v as f64;
                }
                mix.observe(&sample[..c], params, foreground_rate)
            })
            .collect();
        Ok(ForegroundMask::from_bits(self.width, self.height, bits))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn rgb1(v: u8) -> Frame {
        Frame::new(1, 1, 3, vec![v, v, v]).unwrap()
    }

    fn assert_simplex_and_order(px: &MixturePixel) {
        let sum: f64 = px.components().iter().map(|c| c.weight).sum();
        assert!((sum - 1.0).abs() <= 1e-9, "weights sum {sum}");
        for c in px.components() {
            assert!(c.weight >= 0.0);
            assert!(c.variance >= VARIANCE_FLOOR);
        }
        for pair in px.components().windows(2) {
            assert!(pair[0].rank() >= pair[1].rank());
        }
    }

    #[test]
    fn default_values() {
        let p = GmmParams::default();
        assert_eq!(p.alpha, 0.02);
        assert_eq!(p.rho, 0.01);
        assert_eq!(p.deviation_sq_threshold, 49.0);
        assert_eq!(p.init_variance, 3.0);
        assert_eq!(p.init_mixprop, 1e-5);
        assert_eq!(p.background_threshold, 0.9);
        assert_eq!(p.component_threshold, 10);
    }

    #[test]
    fn first_frame_seeds_and_flags_foreground() {
        let mut m = MixtureModel::new(1, 1, 3);
        let mask = m.classify_and_update(&rgb1(100), &GmmParams::default()).unwrap();
        assert!(mask.get(0, 0));
        let comps = m.pixel(0, 0).components();
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].mean, [100.0; 3]);
        assert_eq!(comps[0].variance, 3.0);
        assert_eq!(comps[0].weight, 1.0);
    }

    /// Scalar re-statement of the update recurrences for a pixel that always
    /// matches its single component.
    fn scalar_oracle(value: f64, frames: usize, p: &GmmParams) -> (f64, f64, f64) {
        let (mut w, mut mu, mut var) = (1.0, value, p.init_variance);
        for _ in 1..frames {
            w = (1.0 - p.alpha) * w + p.alpha;
            mu = (1.0 - p.rho) * mu + p.rho * value;
            var = ((1.0 - p.rho) * var + p.rho * 3.0 * (value - mu).powi(2)).max(VARIANCE_FLOOR);
        }
        (w, mu, var)
    }

    #[test]
    fn static_pixel_becomes_background() {
        let p = GmmParams::default();
        let mut m = MixtureModel::new(1, 1, 3);
        let mut last = true;
        for _ in 0..300 {
            last = m.classify_and_update(&rgb1(100), &p).unwrap().get(0, 0);
        }
        assert!(!last);
        let (w, mu, var) = scalar_oracle(100.0, 300, &p);
        let dominant = m.pixel(0, 0).components()[0];
        assert!((dominant.mean[0] - 100.0).abs() <= 1.0);
        assert!(dominant.weight > 0.9);
        assert!((dominant.weight - w).abs() < 1e-12);
        assert!((dominant.mean[0] - mu).abs() < 1e-12);
        assert!((dominant.variance - var).abs() < 1e-12);
    }

    #[test]
    fn simplex_and_ordering_under_random_input() {
        let p = GmmParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut m = MixtureModel::new(4, 4, 3);
        for _ in 0..200 {
            let data: Vec<u8> = (0..48).map(|_| rand::Rng::random(&mut rng)).collect();
            let f = Frame::new(4, 4, 3, data).unwrap();
            m.classify_and_update(&f, &p).unwrap();
            for px in m.pixels() {
                assert!(px.components().len() <= p.component_threshold);
                assert_simplex_and_order(px);
            }
        }
    }

    #[test]
    fn slow_object_is_absorbed_by_plain_update() {
        // a pixel covered for longer than ln(0.9)/ln(0.98) ≈ 5.2 frames
        // joins the background under the plain update
        let p = GmmParams::default();
        let mut m = MixtureModel::new(1, 1, 3);
        for _ in 0..50 {
            m.classify_and_update(&rgb1(40), &p).unwrap();
        }
        let flags: Vec<bool> = (0..8)
            .map(|_| m.classify_and_update(&rgb1(200), &p).unwrap().get(0, 0))
            .collect();
        assert_eq!(flags, [true, true, true, true, true, true, false, false]);
    }

    #[test]
    fn slow_foreground_rate_delays_absorption() {
        let p = GmmParams::default();
        let mut m = MixtureModel::new(1, 1, 3);
        for _ in 0..50 {
            m.classify_and_update(&rgb1(40), &p).unwrap();
        }
        for _ in 0..40 {
            let fg = m
                .classify_and_update_with_rate(&rgb1(200), &p, 0.002)
                .unwrap()
                .get(0, 0);
            assert!(fg);
        }
        // the background component is still dominant once the object leaves
        assert!(!m
            .classify_and_update_with_rate(&rgb1(40), &p, 0.002)
            .unwrap()
            .get(0, 0));
    }

    #[test]
    fn component_count_is_bounded() {
        let p = GmmParams {
            component_threshold: 3,
            ..Default::default()
        };
        let mut m = MixtureModel::new(1, 1, 1);
        for v in [0u8, 60, 120, 180, 240] {
            let f = Frame::new(1, 1, 1, vec![v]).unwrap();
            assert!(m.classify_and_update(&f, &p).unwrap().get(0, 0));
            assert!(m.pixel(0, 0).components().len() <= 3);
            assert_simplex_and_order(m.pixel(0, 0));
        }
    }

    #[test]
    fn noisy_static_scene_settles() {
        let p = GmmParams::default();
        let noise = Normal::new(0.0, 2.0).unwrap();
        for seed in 0..2u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut m = MixtureModel::new(16, 16, 3);
            let mut late = 0usize;
            for n in 0..300 {
                let data = (0..16 * 16 * 3)
                    .map(|_| (90.0 + noise.sample(&mut rng) as f64).round().clamp(0.0, 255.0) as u8)
                    .collect();
                let mask = m
                    .classify_and_update(&Frame::new(16, 16, 3, data).unwrap(), &p)
                    .unwrap();
                if n >= 150 {
                    late += mask.count_ones();
                }
            }
            assert!((late as f64) / (150.0 * 256.0) < 0.01);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let mut m = MixtureModel::new(2, 2, 3);
        assert!(matches!(
            m.classify_and_update(&rgb1(0), &GmmParams::default()),
            Err(BackgroundError::DimensionMismatch { .. })
        ));
        let gray = Frame::new(2, 2, 1, vec![0; 4]).unwrap();
        assert!(m.classify_and_update(&gray, &GmmParams::default()).is_err());
    }
}
