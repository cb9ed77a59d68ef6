use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{FrameResult, PipelineError};
use crate::association::TrackState;
use crate::frame_io::{format_index, write_frame};
use crate::regions::BoundingBox;
use crate::Frame;

pub const YELLOW: [u8; 3] = [255, 255, 0];

/// Box colours for simultaneous tracks in ascending id order. Past the end
/// the cycle repeats with a dashed stroke.
pub const PALETTE: [[u8; 3]; 5] = [
    [0, 255, 0],
    [255, 0, 0],
    [0, 0, 255],
    [255, 0, 255],
    [0, 255, 255],
];

fn stroke(frame: &mut Frame, b: &BoundingBox, color: [u8; 3], dashed: bool) {
    let mut put = |x: usize, y: usize| {
        if !dashed || (x + y) % 2 == 0 {
            frame.pixel_mut(x, y).copy_from_slice(&color);
        }
    };
    for x in b.x_min..=b.x_max {
        put(x, b.y_min);
        put(x, b.y_max);
    }
    for y in b.y_min..=b.y_max {
        put(b.x_min, y);
        put(b.x_max, y);
    }
}

/// Copy of `frame` (as RGB) with 1-pixel boxes: a lone active track in
/// yellow; several active tracks in palette order by id; one yellow box per
/// occlusion group around its shared blob.
pub fn annotate_frame(frame: &Frame, result: &FrameResult) -> Frame {
    let mut out = frame.to_rgb();
    let active: Vec<_> = result
        .tracks
        .iter()
        .filter(|t| t.state == TrackState::Active && t.observed)
        .collect();
    let mut groups: Vec<(u64, BoundingBox)> = result
        .tracks
        .iter()
        .filter(|t| t.state == TrackState::Occluded)
        .filter_map(|t| t.group.map(|g| (g, t.bbox)))
        .collect();
    groups.sort_by_key(|g| g.0);
    groups.dedup_by_key(|g| g.0);

    if groups.is_empty() && active.len() == 1 {
        stroke(&mut out, &active[0].bbox, YELLOW, false);
    } else {
        for (i, t) in active.iter().enumerate() {
            stroke(&mut out, &t.bbox, PALETTE[i % PALETTE.len()], i >= PALETTE.len());
        }
    }
    for (_, b) in &groups {
        stroke(&mut out, b, YELLOW, false);
    }
    out
}

/// Streams `tracks.jsonl`, `trajectories.csv` and optional `ann_%06d.ppm`
/// frames into a directory.
pub struct ResultWriter {
    dir: PathBuf,
    annotate: bool,
    jsonl: BufWriter<File>,
    csv: BufWriter<File>,
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl ResultWriter {
    pub fn create(dir: &Path, annotate: bool) -> Result<Self, PipelineError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let open = |name: &str| -> Result<BufWriter<File>, PipelineError> {
            let path = dir.join(name);
            Ok(BufWriter::new(File::create(&path).map_err(io_err(&path))?))
        };
        let jsonl = open("tracks.jsonl")?;
        let mut csv = open("trajectories.csv")?;
        let csv_path = dir.join("trajectories.csv");
        writeln!(csv, "track_id,frame,x,y,speed,direction").map_err(io_err(&csv_path))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            annotate,
            jsonl,
            csv,
        })
    }

    pub fn write(&mut self, result: &FrameResult, frame: Option<&Frame>) -> Result<(), PipelineError> {
        let jsonl_path = self.dir.join("tracks.jsonl");
        let line = serde_json::to_string(result).expect("results serialize");
        writeln!(self.jsonl, "{line}").map_err(io_err(&jsonl_path))?;
        let csv_path = self.dir.join("trajectories.csv");
        for t in result.tracks.iter().filter(|t| t.observed) {
            writeln!(
                self.csv,
                "{},{},{},{},{},{}",
                t.id,
                result.frame,
                t.centroid.x,
                t.centroid.y,
                opt(t.speed),
                opt(t.direction)
            )
            .map_err(io_err(&csv_path))?;
        }
        if self.annotate {
            if let Some(f) = frame {
                let path = self.dir.join(format_index("ann_%06d.ppm", result.frame)?);
                write_frame(&annotate_frame(f, result), path)?;
            }
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), PipelineError> {
        let p = self.dir.join("tracks.jsonl");
        self.jsonl.flush().map_err(io_err(&p))?;
        let p = self.dir.join("trajectories.csv");
        self.csv.flush().map_err(io_err(&p))
    }
}

/// Write a finished run. `frames`, when given, must align with `results`.
pub fn emit_results(
    results: &[FrameResult],
    frames: Option<&[Frame]>,
    out_dir: &Path,
    annotate: bool,
) -> Result<(), PipelineError> {
    let mut w = ResultWriter::create(out_dir, annotate)?;
    for (i, r) in results.iter().enumerate() {
        w.write(r, frames.and_then(|f| f.get(i)))?;
    }
    w.finish()
}
