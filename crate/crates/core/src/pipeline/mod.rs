//! End-to-end driver: background model, morphology, region features,
//! association, optional mean-shift refinement, then per-frame results.

mod config;
mod output;

pub use config::{BgModel, ConfigError, PipelineConfig, Refine};
pub use output::{annotate_frame, emit_results, ResultWriter, PALETTE, YELLOW};

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

use crate::association::{
    speed_and_direction, AssociationError, MergeEvent, SplitEvent, TrackSet, TrackState,
};
use crate::background::{AdaptiveModel, BackgroundError, MixtureModel};
use crate::frame_io::{to_grayscale, FrameError, SequenceManifest};
use crate::meanshift::{build_target_model, estimate_geometry, reseed, track, TargetModel};
use crate::morphology::open_close;
use crate::regions::{detect_regions, BoundingBox, Point, RegionError};
use crate::{ForegroundMask, Frame};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("input: {0}")]
    Input(#[from] FrameError),
    #[error("frame {frame}: {message}")]
    Runtime { frame: u64, message: String },
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    fn at(frame: u64) -> impl Fn(&dyn std::fmt::Display) -> PipelineError {
        move |e| PipelineError::Runtime {
            frame,
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackRecord {
    pub id: u64,
    pub state: TrackState,
    pub bbox: BoundingBox,
    pub centroid: Point,
    /// Whether the track took a detection of its own this frame.
    pub observed: bool,
    pub speed: Option<f64>,
    pub direction: Option<f64>,
    pub group: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FrameEvents {
    pub births: Vec<u64>,
    pub deaths: Vec<u64>,
    pub merges: Vec<MergeEvent>,
    pub splits: Vec<SplitEvent>,
}

impl FrameEvents {
    pub fn is_empty(&self) -> bool {
        self.births.is_empty() && self.deaths.is_empty() && self.merges.is_empty() && self.splits.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameResult {
    pub frame: u64,
    pub warmup: bool,
    /// Live tracks in ascending id order.
    pub tracks: Vec<TrackRecord>,
    pub events: FrameEvents,
}

enum Background {
    Mixture(MixtureModel),
    Adaptive(Option<AdaptiveModel>),
}

/// Frame-at-a-time pipeline state.
pub struct Pipeline {
    config: PipelineConfig,
    background: Option<Background>,
    dims: Option<(usize, usize, usize)>,
    tracks: TrackSet,
    targets: BTreeMap<u64, TargetModel>,
    frames_seen: usize,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        let tracks = TrackSet::new(config.association_params())
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(Self {
            config,
            background: None,
            dims: None,
            tracks,
            targets: BTreeMap::new(),
            frames_seen: 0,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn tracks(&self) -> &TrackSet {
        &self.tracks
    }

    fn segment(&mut self, frame: &Frame, warm: bool) -> Result<ForegroundMask, BackgroundError> {
        let cfg = &self.config;
        let bg = self.background.get_or_insert_with(|| match cfg.bg_model {
            config::BgModel::Gmm => {
                Background::Mixture(MixtureModel::new(frame.width(), frame.height(), frame.channels()))
            }
            config::BgModel::Adaptive => Background::Adaptive(None),
        });
        match bg {
            Background::Mixture(m) => {
                let rate = if warm { cfg.gmm.alpha } else { cfg.gmm_fg_alpha };
                m.classify_and_update_with_rate(frame, &cfg.gmm, rate)
            }
            Background::Adaptive(slot) => {
                let gray = if frame.channels() == 1 {
                    frame.clone()
                } else {
                    to_grayscale(frame).expect("rgb frame converts")
                };
                match slot {
                    None => {
                        *slot = Some(AdaptiveModel::from_frame(&gray, cfg.adaptive)?);
                        Ok(ForegroundMask::new(frame.width(), frame.height()))
                    }
                    Some(model) => {
                        let mask = model.classify(&gray)?;
                        model.update(&gray, &mask)?;
                        Ok(mask)
                    }
                }
            }
        }
    }

    /// Run one frame through every stage.
    pub fn process(&mut self, frame: &Frame) -> Result<FrameResult, PipelineError> {
        let t = frame.index;
        let err = PipelineError::at(t);
        let dims = (frame.width(), frame.height(), frame.channels());
        match self.dims {
            None => self.dims = Some(dims),
            Some(d) if d != dims => {
                return Err(err(&format!("frame is {dims:?}, sequence is {d:?}")));
            }
            _ => {}
        }
        let warm = self.frames_seen < self.config.warmup;
        self.frames_seen += 1;
        let mask = self.segment(frame, warm).map_err(|e| err(&e))?;
        if warm {
            return Ok(FrameResult {
                frame: t,
                warmup: true,
                tracks: Vec::new(),
                events: FrameEvents::default(),
            });
        }
        let clean = open_close(&mask, self.config.morph_radius);
        let detections = detect_regions(&clean, frame, self.config.min_area, self.config.bins_per_channel)
            .map_err(|e: RegionError| err(&e))?;
        let report = self
            .tracks
            .step(&detections, t)
            .map_err(|e: AssociationError| err(&e))?;

        if self.config.refine == config::Refine::MeanShift {
            self.refine(frame, t);
        }
        for id in &report.deaths {
            self.targets.remove(id);
        }

        let window = self.config.speed_window;
        let tracks = self
            .tracks
            .tracks()
            .iter()
            .map(|tr| {
                let observed = tr.seen_at(t);
                let motion = observed
                    .then(|| speed_and_direction(tr, window).ok())
                    .flatten();
                let centroid = if observed {
                    tr.trajectory.last().map_or(tr.centroid(), |p| p.position)
                } else {
                    tr.centroid()
                };
                TrackRecord {
                    id: tr.id,
                    state: tr.state,
                    bbox: tr.features.bbox,
                    centroid,
                    observed,
                    speed: motion.map(|m| m.speed),
                    direction: motion.map(|m| m.direction),
                    group: tr.group,
                }
            })
            .collect();
        Ok(FrameResult {
            frame: t,
            warmup: false,
            tracks,
            events: FrameEvents {
                births: report.births,
                deaths: report.deaths,
                merges: report.merges,
                splits: report.splits,
            },
        })
    }

    /// Mean-shift refinement of every active track seen this frame. The
    /// target model is captured at a track's first sighting; failures leave
    /// the detection centroid in place.
    fn refine(&mut self, frame: &Frame, t: u64) {
        let ms = self.config.meanshift;
        let bins = self.config.bins_per_channel;
        let mut moves = Vec::new();
        for tr in self.tracks.tracks() {
            if tr.state != TrackState::Active || !tr.seen_at(t) {
                continue;
            }
            let start = tr.centroid();
            let model = match self.targets.get(&tr.id) {
                Some(m) => m.clone(),
                None => {
                    let b = tr.features.bbox;
                    let (hx, hy) = ((b.width() as f64 / 2.0).max(1.0), (b.height() as f64 / 2.0).max(1.0));
                    match build_target_model(frame, start, hx, hy, bins) {
                        Ok(m) => {
                            self.targets.insert(tr.id, m);
                            continue;
                        }
                        Err(_) => continue,
                    }
                }
            };
            let Ok(out) = track(frame, &model, start, ms.epsilon, ms.max_iter) else {
                continue;
            };
            if let Ok(g) = estimate_geometry(frame, &model, out.position) {
                let (next, _) = reseed(&model, out.position, &g, ms.gamma);
                self.targets.insert(tr.id, next);
            }
            moves.push((tr.id, out.position));
        }
        for (id, p) in moves {
            self.tracks.refine_latest(id, p);
        }
    }
}

/// Read the configured input sequence and process every frame, handing each
/// result and its frame to `sink` in order.
pub fn run_pipeline(
    config: &PipelineConfig,
    mut sink: impl FnMut(&FrameResult, &Frame) -> Result<(), PipelineError>,
) -> Result<usize, PipelineError> {
    let input = config
        .input
        .clone()
        .ok_or_else(|| ConfigError::Invalid("no input directory given".into()))?;
    let manifest = SequenceManifest::open(
        input,
        &config.pattern,
        config.first_index,
        config.count,
        config.channels,
    )?;
    let mut pipeline = Pipeline::new(config.clone())?;
    let mut dims = None;
    for n in 0..manifest.count {
        let frame = manifest.read(n, dims)?;
        dims = Some((frame.width(), frame.height()));
        let result = pipeline.process(&frame)?;
        sink(&result, &frame)?;
    }
    Ok(manifest.count)
}

/// Process in-memory frames, collecting every result.
pub fn run_frames<'a>(
    config: &PipelineConfig,
    frames: impl IntoIterator<Item = &'a Frame>,
) -> Result<Vec<FrameResult>, PipelineError> {
    let mut pipeline = Pipeline::new(config.clone())?;
    frames.into_iter().map(|f| pipeline.process(f)).collect()
}
