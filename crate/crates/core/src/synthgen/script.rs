//! Plain-text scene scripts.
//!
//! ```text
//! width = 128
//! height = 48
//! frames = 100
//! background = 40,40,40        # or background_image = bg.ppm
//! noise_sigma = 2
//! seed = 7
//!
//! [object]
//! id = 1
//! shape = rectangle            # or ellipse
//! size = 12x12
//! color = 220,30,30
//! path = 0:14.5,24; 99:113.5,24
//! visible = 30-99              # optional
//! ```

use std::path::Path;

use super::{Background, Keyframe, ObjectSpec, SceneScript, Shape, SynthError};
use crate::frame_io::read_frame;
use crate::regions::Point;

fn err(line: usize, message: impl Into<String>) -> SynthError {
    SynthError::Parse {
        line,
        message: message.into(),
    }
}

fn num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T, SynthError> {
    v.trim()
        .parse()
        .map_err(|_| err(line, format!("bad value for {key}: {v:?}")))
}

fn rgb(line: usize, v: &str) -> Result<[u8; 3], SynthError> {
    let parts: Vec<&str> = v.split(',').collect();
    if parts.len() != 3 {
        return Err(err(line, format!("expected r,g,b, got {v:?}")));
    }
    let mut out = [0u8; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = num(line, "color", p)?;
    }
    Ok(out)
}

fn path(line: usize, v: &str) -> Result<Vec<Keyframe>, SynthError> {
    v.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|kf| {
            let (t, xy) = kf
                .split_once(':')
                .ok_or_else(|| err(line, format!("keyframe {kf:?} is not t:x,y")))?;
            let (x, y) = xy
                .split_once(',')
                .ok_or_else(|| err(line, format!("keyframe {kf:?} is not t:x,y")))?;
            Ok(Keyframe {
                frame: num(line, "path", t)?,
                center: Point::new(num(line, "path", x)?, num(line, "path", y)?),
            })
        })
        .collect()
}

#[derive(Default)]
struct PartialObject {
    line: usize,
    id: Option<u64>,
    shape: Option<Shape>,
    size: Option<(f64, f64)>,
    color: Option<[u8; 3]>,
    path: Option<Vec<Keyframe>>,
    visible: Option<(u64, u64)>,
}

impl PartialObject {
    fn finish(self) -> Result<ObjectSpec, SynthError> {
        let missing = |k: &str| err(self.line, format!("object section is missing {k}"));
        Ok(ObjectSpec {
            id: self.id.ok_or_else(|| missing("id"))?,
            shape: self.shape.ok_or_else(|| missing("shape"))?,
            size: self.size.ok_or_else(|| missing("size"))?,
            color: self.color.ok_or_else(|| missing("color"))?,
            path: self.path.ok_or_else(|| missing("path"))?,
            visible: self.visible,
        })
    }
}

/// Parse a scene script. Relative `background_image` paths resolve against
/// `base_dir`.
pub fn parse_script(text: &str, base_dir: Option<&Path>) -> Result<SceneScript, SynthError> {
    let (mut width, mut height, mut frames) = (None, None, None);
    let mut background = Background::Color([0, 0, 0]);
    let (mut noise_sigma, mut seed) = (0.0, 0u64);
    let mut objects = Vec::new();
    let mut current: Option<PartialObject> = None;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if content == "[object]" {
            if let Some(o) = current.take() {
                objects.push(o.finish()?);
            }
            current = Some(PartialObject {
                line,
                ..Default::default()
            });
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| err(line, format!("expected key = value, got {content:?}")))?;
        match current.as_mut() {
            None => match key {
                "width" => width = Some(num(line, key, value)?),
                "height" => height = Some(num(line, key, value)?),
                "frames" => frames = Some(num(line, key, value)?),
                "background" => background = Background::Color(rgb(line, value)?),
                "background_image" => {
                    let p = base_dir.map_or_else(|| Path::new(value).to_path_buf(), |d| d.join(value));
                    background = Background::Image(read_frame(&p)?.to_rgb());
                }
                "noise_sigma" => noise_sigma = num(line, key, value)?,
                "seed" => seed = num(line, key, value)?,
                _ => return Err(err(line, format!("unknown key {key:?}"))),
            },
            Some(o) => match key {
                "id" => o.id = Some(num(line, key, value)?),
                "shape" => {
                    o.shape = Some(match value {
                        "rectangle" => Shape::Rectangle,
                        "ellipse" => Shape::Ellipse,
                        _ => return Err(err(line, format!("unknown shape {value:?}"))),
                    })
                }
                "size" => {
                    let (w, h) = value.split_once('x').unwrap_or((value, value));
                    o.size = Some((num(line, key, w)?, num(line, key, h)?));
                }
                "color" => o.color = Some(rgb(line, value)?),
                "path" => o.path = Some(path(line, value)?),
                "visible" => {
                    let (a, b) = value
                        .split_once('-')
                        .ok_or_else(|| err(line, format!("visible must be first-last, got {value:?}")))?;
                    o.visible = Some((num(line, key, a)?, num(line, key, b)?));
                }
                _ => return Err(err(line, format!("unknown object key {key:?}"))),
            },
        }
    }
    if let Some(o) = current.take() {
        objects.push(o.finish()?);
    }
    let need = |v: Option<usize>, k: &str| v.ok_or_else(|| SynthError::InvalidScript(format!("missing {k}")));
    let script = SceneScript {
        width: need(width, "width")?,
        height: need(height, "height")?,
        frame_count: frames.ok_or_else(|| SynthError::InvalidScript("missing frames".into()))?,
        background,
        noise_sigma,
        seed,
        objects,
    };
    script.validate()?;
    Ok(script)
}

/// Serialize a script with a solid background back to text.
pub fn script_to_text(script: &SceneScript) -> Result<String, SynthError> {
    let Background::Color([r, g, b]) = script.background else {
        return Err(SynthError::InvalidScript(
            "only solid backgrounds can be written as text".into(),
        ));
    };
    let mut s = format!(
        "width = {}\nheight = {}\nframes = {}\nbackground = {r},{g},{b}\nnoise_sigma = {}\nseed = {}\n",
        script.width, script.height, script.frame_count, script.noise_sigma, script.seed
    );
    for o in &script.objects {
        let shape = match o.shape {
            Shape::Rectangle => "rectangle",
            Shape::Ellipse => "ellipse",
        };
        let path: Vec<String> = o
            .path
            .iter()
            .map(|k| format!("{}:{},{}", k.frame, k.center.x, k.center.y))
            .collect();
        let [r, g, b] = o.color;
        s.push_str(&format!(
            "\n[object]\nid = {}\nshape = {shape}\nsize = {}x{}\ncolor = {r},{g},{b}\npath = {}\n",
            o.id,
            o.size.0,
            o.size.1,
            path.join("; ")
        ));
        if let Some((a, b)) = o.visible {
            s.push_str(&format!("visible = {a}-{b}\n"));
        }
    }
    Ok(s)
}
