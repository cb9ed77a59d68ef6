use std::fmt::Display;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::association::AssociationParams;
use crate::background::{AdaptiveParams, GmmParams};
use crate::meanshift::MeanShiftParams;
use crate::regions::DownsampleMode;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("bad value {value:?} for {key}: {reason}")]
    BadValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BgModel {
    Gmm,
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Refine {
    None,
    MeanShift,
}

/// Every tunable of a run. `Default` gives the documented defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub bg_model: BgModel,
    pub input: Option<PathBuf>,
    pub pattern: String,
    pub first_index: u64,
    /// Frames to read; 0 probes the longest contiguous run.
    pub count: usize,
    pub channels: usize,
    pub out: Option<PathBuf>,
    pub annotate: bool,
    /// Frames used only to train the background model.
    pub warmup: usize,

    pub gmm: GmmParams,
    /// Weight learning rate for pixels matching a non-background component
    /// after warm-up.
    pub gmm_fg_alpha: f64,
    pub adaptive: AdaptiveParams,

    pub morph_radius: usize,
    pub min_area: usize,
    pub bins_per_channel: usize,
    pub hist_downsample: DownsampleMode,
    /// Histogram bins used for identity matching; 0 keeps full resolution.
    pub match_bins: usize,

    pub lambda_px: f64,
    pub max_missed: usize,
    pub overlap_margin: usize,
    pub speed_window: usize,

    pub refine: Refine,
    pub meanshift: MeanShiftParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            bg_model: BgModel::Gmm,
            input: None,
            pattern: "frame_%06d.ppm".into(),
            first_index: 0,
            count: 0,
            channels: 3,
            out: None,
            annotate: false,
            warmup: 30,
            gmm: GmmParams::default(),
            gmm_fg_alpha: 0.002,
            adaptive: AdaptiveParams::default(),
            morph_radius: 1,
            min_area: 15,
            bins_per_channel: 8,
            hist_downsample: DownsampleMode::Sample,
            match_bins: 0,
            lambda_px: 50.0,
            max_missed: 5,
            overlap_margin: 2,
            speed_window: 4,
            refine: Refine::None,
            meanshift: MeanShiftParams::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::BadValue {
        key: key.into(),
        value: value.into(),
        reason: e.to_string(),
    })
}

fn bad(key: &str, value: &str, reason: &str) -> ConfigError {
    ConfigError::BadValue {
        key: key.into(),
        value: value.into(),
        reason: reason.into(),
    }
}

/// Shortest round-trip text, with scientific notation for small magnitudes.
fn float(v: f64) -> String {
    if v != 0.0 && v.abs() < 1e-3 {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn path_text(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl PipelineConfig {
    /// Parse `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                text: raw.into(),
            })?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let path = |v: &str| (!v.is_empty()).then(|| PathBuf::from(v));
        match key {
            "bg_model" => {
                self.bg_model = match value {
                    "gmm" => BgModel::Gmm,
                    "adaptive" => BgModel::Adaptive,
                    _ => return Err(bad(key, value, "expected gmm or adaptive")),
                }
            }
            "input" => self.input = path(value),
            "pattern" => self.pattern = value.into(),
            "first_index" => self.first_index = parse(key, value)?,
            "count" => self.count = parse(key, value)?,
            "channels" => self.channels = parse(key, value)?,
            "out" => self.out = path(value),
            "annotate" => self.annotate = parse(key, value)?,
            "warmup" => self.warmup = parse(key, value)?,
            "alpha" => self.gmm.alpha = parse(key, value)?,
            "rho" => self.gmm.rho = parse(key, value)?,
            "deviation_sq_threshold" => self.gmm.deviation_sq_threshold = parse(key, value)?,
            "init_variance" => self.gmm.init_variance = parse(key, value)?,
            "init_mixprop" => self.gmm.init_mixprop = parse(key, value)?,
            "background_threshold" => self.gmm.background_threshold = parse(key, value)?,
            "component_threshold" => self.gmm.component_threshold = parse(key, value)?,
            "gmm_fg_alpha" => self.gmm_fg_alpha = parse(key, value)?,
            "alpha_bg" => self.adaptive.alpha_bg = parse(key, value)?,
            "t_floor" => self.adaptive.t_floor = parse(key, value)?,
            "t_gain" => self.adaptive.t_gain = parse(key, value)?,
            "morph_radius" => self.morph_radius = parse(key, value)?,
            "min_area" => self.min_area = parse(key, value)?,
            "bins_per_channel" => self.bins_per_channel = parse(key, value)?,
            "hist_downsample" => {
                self.hist_downsample = match value {
                    "sample" => DownsampleMode::Sample,
                    "pool" => DownsampleMode::Pool,
                    _ => return Err(bad(key, value, "expected sample or pool")),
                }
            }
            "match_bins" => self.match_bins = parse(key, value)?,
            "lambda_px" => self.lambda_px = parse(key, value)?,
            "max_missed" => self.max_missed = parse(key, value)?,
            "overlap_margin" => self.overlap_margin = parse(key, value)?,
            "speed_window" => self.speed_window = parse(key, value)?,
            "refine" => {
                self.refine = match value {
                    "none" => Refine::None,
                    "meanshift" => Refine::MeanShift,
                    _ => return Err(bad(key, value, "expected none or meanshift")),
                }
            }
            "ms_epsilon" => self.meanshift.epsilon = parse(key, value)?,
            "ms_max_iter" => self.meanshift.max_iter = parse(key, value)?,
            "ms_gamma" => self.meanshift.gamma = parse(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        self.gmm
            .validate()
            .and_then(|_| self.adaptive.validate())
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(self.gmm_fg_alpha > 0.0 && self.gmm_fg_alpha <= 1.0) {
            return invalid(format!("gmm_fg_alpha must be in (0,1], got {}", self.gmm_fg_alpha));
        }
        if self.channels != 1 && self.channels != 3 {
            return invalid(format!("channels must be 1 or 3, got {}", self.channels));
        }
        if !(1..=256).contains(&self.bins_per_channel) {
            return invalid(format!(
                "bins_per_channel must be in 1..=256, got {}",
                self.bins_per_channel
            ));
        }
        if self.match_bins > 0 {
            let n = self.bins_per_channel.pow(self.channels as u32);
            if self.match_bins > n || n % self.match_bins != 0 {
                return invalid(format!("match_bins {} must divide {n}", self.match_bins));
            }
        }
        if !(self.lambda_px > 0.0) {
            return invalid(format!("lambda_px must be positive, got {}", self.lambda_px));
        }
        if self.speed_window == 0 {
            return invalid("speed_window must be at least 1".into());
        }
        let ms = &self.meanshift;
        if !(ms.epsilon > 0.0) || ms.max_iter == 0 || !(0.0..=1.0).contains(&ms.gamma) {
            return invalid("need ms_epsilon > 0, ms_max_iter >= 1, ms_gamma in [0,1]".into());
        }
        if self.pattern.is_empty() {
            return invalid("pattern must not be empty".into());
        }
        Ok(())
    }

    /// Fully resolved configuration in the same `key = value` form `parse`
    /// accepts.
    pub fn dump(&self) -> String {
        let g = &self.gmm;
        let a = &self.adaptive;
        let ms = &self.meanshift;
        let lines: Vec<(&str, String)> = vec![
            (
                "bg_model",
                match self.bg_model {
                    BgModel::Gmm => "gmm",
                    BgModel::Adaptive => "adaptive",
                }
                .into(),
            ),
            ("input", path_text(&self.input)),
            ("pattern", self.pattern.clone()),
            ("first_index", self.first_index.to_string()),
            ("count", self.count.to_string()),
            ("channels", self.channels.to_string()),
            ("out", path_text(&self.out)),
            ("annotate", self.annotate.to_string()),
            ("warmup", self.warmup.to_string()),
            ("alpha", float(g.alpha)),
            ("rho", float(g.rho)),
            ("deviation_sq_threshold", float(g.deviation_sq_threshold)),
            ("init_variance", float(g.init_variance)),
            ("init_mixprop", float(g.init_mixprop)),
            ("background_threshold", float(g.background_threshold)),
            ("component_threshold", g.component_threshold.to_string()),
            ("gmm_fg_alpha", float(self.gmm_fg_alpha)),
            ("alpha_bg", float(a.alpha_bg)),
            ("t_floor", float(a.t_floor)),
            ("t_gain", float(a.t_gain)),
            ("morph_radius", self.morph_radius.to_string()),
            ("min_area", self.min_area.to_string()),
            ("bins_per_channel", self.bins_per_channel.to_string()),
            (
                "hist_downsample",
                match self.hist_downsample {
                    DownsampleMode::Sample => "sample",
                    DownsampleMode::Pool => "pool",
                }
                .into(),
            ),
            ("match_bins", self.match_bins.to_string()),
            ("lambda_px", float(self.lambda_px)),
            ("max_missed", self.max_missed.to_string()),
            ("overlap_margin", self.overlap_margin.to_string()),
            ("speed_window", self.speed_window.to_string()),
            (
                "refine",
                match self.refine {
                    Refine::None => "none",
                    Refine::MeanShift => "meanshift",
                }
                .into(),
            ),
            ("ms_epsilon", float(ms.epsilon)),
            ("ms_max_iter", ms.max_iter.to_string()),
            ("ms_gamma", float(ms.gamma)),
        ];
        lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn association_params(&self) -> AssociationParams {
        AssociationParams {
            lambda: self.lambda_px,
            max_missed: self.max_missed,
            overlap_margin: self.overlap_margin,
            match_bins: (self.match_bins > 0).then_some(self.match_bins),
            downsample: self.hist_downsample,
        }
    }
}
