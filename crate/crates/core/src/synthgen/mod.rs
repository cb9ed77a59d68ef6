//! Deterministic synthetic sequences with analytic ground truth.
//!
//! Objects are flat-coloured rectangles or ellipses moving along
//! piecewise-linear keyframe paths over a static background. Later objects
//! are drawn over earlier ones. Gaussian noise is added after compositing,
//! drawn from a ChaCha8 stream seeded with `seed ^ frame_index`, one
//! `Normal(0, sigma)` sample per byte in raster order, rounded and clamped.

mod script;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use thiserror::Error;

use crate::frame_io::{format_index, write_frame, FrameError};
use crate::regions::{BoundingBox, Point};
use crate::Frame;

pub use script::{parse_script, script_to_text};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("object {id} leaves the frame at frame {frame}")]
    ObjectOutOfBounds { id: u64, frame: u64 },
    #[error("script line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid script: {0}")]
    InvalidScript(String),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Rectangle,
    Ellipse,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Background {
    Color([u8; 3]),
    Image(Frame),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Keyframe {
    pub frame: u64,
    pub center: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSpec {
    pub id: u64,
    pub shape: Shape,
    /// Full width and height in pixels.
    pub size: (f64, f64),
    pub color: [u8; 3],
    /// Centre keyframes with strictly increasing frame numbers. The first and
    /// last positions are held outside the keyed range.
    pub path: Vec<Keyframe>,
    /// Inclusive frame range in which the object is drawn; always if `None`.
    pub visible: Option<(u64, u64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneScript {
    pub width: usize,
    pub height: usize,
    pub frame_count: u64,
    pub background: Background,
    pub noise_sigma: f64,
    pub seed: u64,
    pub objects: Vec<ObjectSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObjectTruth {
    pub id: u64,
    pub centroid: Point,
    /// `None` when the object is not drawn.
    pub bbox: Option<BoundingBox>,
    pub visible: bool,
    /// Ids of all visible objects whose boxes chain-overlap this one's,
    /// including itself; absent unless at least two objects are involved.
    pub occluding_group: Option<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameTruth {
    pub frame: u64,
    pub objects: Vec<ObjectTruth>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub frames: Vec<FrameTruth>,
}

impl GroundTruth {
    pub fn get(&self, frame: u64, id: u64) -> Option<&ObjectTruth> {
        self.frames
            .get(frame as usize)
            .and_then(|f| f.objects.iter().find(|o| o.id == id))
    }

    /// Maximal runs of frames in which some occluding group exists.
    pub fn occlusion_intervals(&self) -> Vec<(u64, u64)> {
        let mut out: Vec<(u64, u64)> = Vec::new();
        for f in &self.frames {
            if f.objects.iter().any(|o| o.occluding_group.is_some()) {
                match out.last_mut() {
                    Some(last) if last.1 + 1 == f.frame => last.1 = f.frame,
                    _ => out.push((f.frame, f.frame)),
                }
            }
        }
        out
    }

    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for f in &self.frames {
            s.push_str(&serde_json::to_string(f).expect("truth serializes"));
            s.push('\n');
        }
        s
    }
}

impl ObjectSpec {
    pub fn center_at(&self, frame: u64) -> Point {
        let path = &self.path;
        let first = &path[0];
        if frame <= first.frame {
            return first.center;
        }
        for pair in path.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if frame <= b.frame {
                let num = (frame - a.frame) as f64;
                let den = (b.frame - a.frame) as f64;
                return Point::new(
                    a.center.x + (b.center.x - a.center.x) * num / den,
                    a.center.y + (b.center.y - a.center.y) * num / den,
                );
            }
        }
        path[path.len() - 1].center
    }

    pub fn is_visible(&self, frame: u64) -> bool {
        self.visible.is_none_or(|(a, b)| (a..=b).contains(&frame))
    }

    /// Pixels covered when centred at `c`. A rectangle takes pixels whose
    /// centres fall in `[c - w/2, c + w/2)` on each axis; an ellipse takes
    /// pixels with normalised radius at most 1. Coordinates may be negative.
    fn footprint(&self, c: Point) -> Vec<(i64, i64)> {
        let (w, h) = self.size;
        let mut px = Vec::new();
        match self.shape {
            Shape::Rectangle => {
                let (x0, x1) = ((c.x - w / 2.0).ceil() as i64, (c.x + w / 2.0).ceil() as i64);
                let (y0, y1) = ((c.y - h / 2.0).ceil() as i64, (c.y + h / 2.0).ceil() as i64);
                for y in y0..y1 {
                    for x in x0..x1 {
                        px.push((x, y));
                    }
                }
            }
            Shape::Ellipse => {
                let (a, b) = (w / 2.0, h / 2.0);
                for y in (c.y - b).floor() as i64..=(c.y + b).ceil() as i64 {
                    for x in (c.x - a).floor() as i64..=(c.x + a).ceil() as i64 {
                        let (dx, dy) = ((x as f64 - c.x) / a, (y as f64 - c.y) / b);
                        if dx * dx + dy * dy <= 1.0 {
                            px.push((x, y));
                        }
                    }
                }
            }
        }
        px
    }
}

impl SceneScript {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.width == 0 || self.height == 0 {
            return Err(SynthError::InvalidScript("frame size must be positive".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(SynthError::InvalidScript(format!(
                "noise sigma must be finite and >= 0, got {}",
                self.noise_sigma
            )));
        }
        if let Background::Image(img) = &self.background {
            if img.width() != self.width || img.height() != self.height || img.channels() != 3 {
                return Err(SynthError::InvalidScript(
                    "background image must be RGB and match the frame size".into(),
                ));
            }
        }
        let mut ids: Vec<u64> = self.objects.iter().map(|o| o.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(SynthError::InvalidScript("object ids must be unique".into()));
        }
        for o in &self.objects {
            if o.path.is_empty() {
                return Err(SynthError::InvalidScript(format!("object {} has no path", o.id)));
            }
            if o.path.windows(2).any(|w| w[0].frame >= w[1].frame) {
                return Err(SynthError::InvalidScript(format!(
                    "object {} keyframes must be strictly increasing",
                    o.id
                )));
            }
            if !(o.size.0 > 0.0 && o.size.1 > 0.0) {
                return Err(SynthError::InvalidScript(format!(
                    "object {} must have positive size",
                    o.id
                )));
            }
        }
        Ok(())
    }
}

fn boxes_intersect(a: &BoundingBox, b: &BoundingBox) -> bool {
    a.x_min <= b.x_max && b.x_min <= a.x_max && a.y_min <= b.y_max && b.y_min <= a.y_max
}

/// Chain-overlap groups among the visible objects of one frame.
fn occluding_groups(objs: &mut [ObjectTruth]) {
    let n = objs.len();
    let mut comp: Vec<usize> = (0..n).collect();
    fn root(comp: &mut [usize], mut i: usize) -> usize {
        while comp[i] != i {
            comp[i] = comp[comp[i]];
            i = comp[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if let (Some(a), Some(b)) = (&objs[i].bbox, &objs[j].bbox) {
                if boxes_intersect(a, b) {
                    let (ri, rj) = (root(&mut comp, i), root(&mut comp, j));
                    comp[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    for i in 0..n {
        if objs[i].bbox.is_none() {
            continue;
        }
        let ri = root(&mut comp, i);
        let mut ids: Vec<u64> = (0..n)
            .filter(|&j| objs[j].bbox.is_some() && root(&mut comp, j) == ri)
            .map(|j| objs[j].id)
            .collect();
        if ids.len() >= 2 {
            ids.sort_unstable();
            objs[i].occluding_group = Some(ids);
        }
    }
}

/// Draw every frame of `script` and compute its ground truth.
pub fn render(script: &SceneScript) -> Result<(Vec<Frame>, GroundTruth), SynthError> {
    script.validate()?;
    let (w, h) = (script.width, script.height);
    let base = match &script.background {
        Background::Color(c) => Frame::filled(w, h, c)?,
        Background::Image(img) => img.clone(),
    };
    let noise = (script.noise_sigma > 0.0)
        .then(|| Normal::new(0.0, script.noise_sigma).expect("sigma validated"));
    let mut frames = Vec::with_capacity(script.frame_count as usize);
    let mut truth = GroundTruth::default();
    for t in 0..script.frame_count {
        let mut frame = base.clone().with_index(t);
        let mut objects = Vec::with_capacity(script.objects.len());
        for o in &script.objects {
            let c = o.center_at(t);
            let visible = o.is_visible(t);
            let mut bbox = None;
            if visible {
                let px = o.footprint(c);
                let inside = |&(x, y): &(i64, i64)| x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h;
                if px.is_empty() || !px.iter().all(inside) {
                    return Err(SynthError::ObjectOutOfBounds { id: o.id, frame: t });
                }
                let mut b = BoundingBox {
                    x_min: usize::MAX,
                    y_min: usize::MAX,
                    x_max: 0,
                    y_max: 0,
                };
                for &(x, y) in &px {
                    let (x, y) = (x as usize, y as usize);
                    frame.pixel_mut(x, y).copy_from_slice(&o.color);
                    b.x_min = b.x_min.min(x);
                    b.y_min = b.y_min.min(y);
                    b.x_max = b.x_max.max(x);
                    b.y_max = b.y_max.max(y);
                }
                bbox = Some(b);
            }
            objects.push(ObjectTruth {
                id: o.id,
                centroid: c,
                bbox,
                visible,
                occluding_group: None,
            });
        }
        occluding_groups(&mut objects);
        if let Some(dist) = &noise {
            let mut rng = ChaCha8Rng::seed_from_u64(script.seed ^ t);
            for v in frame.data_mut() {
                let n: f64 = dist.sample(&mut rng);
                *v = (*v as f64 + n).round().clamp(0.0, 255.0) as u8;
            }
        }
        frames.push(frame);
        truth.frames.push(FrameTruth { frame: t, objects });
    }
    Ok((frames, truth))
}

/// Parameters for the two-object crossing scene.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossingParams {
    pub width: usize,
    pub height: usize,
    pub frame_count: u64,
    /// Side of both squares.
    pub size: f64,
    /// Pixels per frame for each object.
    pub speed: f64,
    pub background: [u8; 3],
    pub noise_sigma: f64,
    pub seed: u64,
    /// First frame in which the objects are drawn.
    pub enter_frame: u64,
}

impl Default for CrossingParams {
    fn default() -> Self {
        Self {
            width: 128,
            height: 48,
            frame_count: 100,
            size: 12.0,
            speed: 1.0,
            background: [40, 40, 40],
            noise_sigma: 0.0,
            seed: 0,
            enter_frame: 0,
        }
    }
}

/// Two squares moving horizontally in opposite directions along the middle
/// row, fully overlapping at the middle of the sequence. Object 1 starts on
/// the left, object 2 on the right and is drawn on top.
pub fn crossing_script(
    color_a: [u8; 3],
    color_b: [u8; 3],
    params: &CrossingParams,
) -> Result<SceneScript, SynthError> {
    if color_a == color_b {
        return Err(SynthError::InvalidScript("crossing colours must differ".into()));
    }
    if params.frame_count < 2 {
        return Err(SynthError::InvalidScript("crossing needs at least two frames".into()));
    }
    let last = params.frame_count - 1;
    let mid = last as f64 / 2.0;
    let (cx, cy) = (params.width as f64 / 2.0, params.height as f64 / 2.0);
    let reach = params.speed * mid;
    let object = |id: u64, color: [u8; 3], sign: f64| ObjectSpec {
        id,
        shape: Shape::Rectangle,
        size: (params.size, params.size),
        color,
        path: vec![
            Keyframe {
                frame: 0,
                center: Point::new(cx - sign * reach, cy),
            },
            Keyframe {
                frame: last,
                center: Point::new(cx + sign * reach, cy),
            },
        ],
        visible: (params.enter_frame > 0).then_some((params.enter_frame, last)),
    };
    Ok(SceneScript {
        width: params.width,
        height: params.height,
        frame_count: params.frame_count,
        background: Background::Color(params.background),
        noise_sigma: params.noise_sigma,
        seed: params.seed,
        objects: vec![object(1, color_a, 1.0), object(2, color_b, -1.0)],
    })
}

/// Write `frame_%06d.ppm` files and `truth.jsonl` into `dir`.
pub fn write_sequence(frames: &[Frame], truth: &GroundTruth, dir: &Path) -> Result<(), SynthError> {
    let io = |path: &Path, source| SynthError::Io {
        path: path.to_path_buf(),
        source,
    };
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    for f in frames {
        write_frame(f, dir.join(format_index("frame_%06d.ppm", f.index)?))?;
    }
    let path = dir.join("truth.jsonl");
    let mut file = fs::File::create(&path).map_err(|e| io(&path, e))?;
    file.write_all(truth.to_jsonl().as_bytes()).map_err(|e| io(&path, e))?;
    Ok(())
}
