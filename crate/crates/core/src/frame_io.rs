//! Raster frames and binary netpbm (P5/P6, maxval 255) codec.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated payload: expected {expected} bytes, found {actual}")]
    TruncatedPayload { expected: usize, actual: usize },
    #[error("unsupported maxval {0} (only 255 is accepted)")]
    UnsupportedMaxval(u32),
    #[error("frame is already single-channel")]
    AlreadyGray,
    #[error("invalid frame: {0}")]
    Invalid(String),
    #[error("sequence error: {0}")]
    Sequence(String),
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// A W×H raster with 1 (gray) or 3 (RGB) interleaved channels, row-major,
/// top-left origin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
    pub index: u64,
}

impl Frame {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<u8>,
    ) -> Result<Self, FrameError> {
        if width == 0 || height == 0 {
            return Err(FrameError::Invalid(format!(
                "zero dimension {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(FrameError::Invalid(format!(
                "unsupported channel count {channels}"
            )));
        }
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(FrameError::Invalid(format!(
                "data length {} != {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
            index: 0,
        })
    }

    /// A frame filled with a single colour; `color` length selects the channel count.
    pub fn filled(width: usize, height: usize, color: &[u8]) -> Result<Self, FrameError> {
        let data = color
            .iter()
            .copied()
            .cycle()
            .take(width * height * color.len())
            .collect();
        Self::new(width, height, color.len(), data)
    }

    pub fn with_index(mut self, index: u64) -> Self {
        self.index = index;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let start = (y * self.width + x) * self.channels;
        &self.data[start..start + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [u8] {
        let start = (y * self.width + x) * self.channels;
        &mut self.data[start..start + self.channels]
    }

    /// Expand a gray frame to RGB by channel replication; RGB frames are cloned.
    pub fn to_rgb(&self) -> Frame {
        if self.channels == 3 {
            return self.clone();
        }
        let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
        Frame {
            width: self.width,
            height: self.height,
            channels: 3,
            data,
            index: self.index,
        }
    }
}

/// Luma conversion with weights 0.299/0.587/0.114, rounded to nearest.
pub fn to_grayscale(frame: &Frame) -> Result<Frame, FrameError> {
    if frame.channels == 1 {
        return Err(FrameError::AlreadyGray);
    }
    let data = frame
        .data
        .chunks_exact(3)
        .map(|px| {
            let y = 0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64;
            y.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    Ok(Frame {
        width: frame.width,
        height: frame.height,
        channels: 1,
        data,
        index: frame.index,
    })
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32, FrameError> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(FrameError::MalformedHeader(format!("missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| FrameError::MalformedHeader(format!("{what} out of range")))
    }
}

/// Decode a binary PGM (P5) or PPM (P6) image held in memory.
pub fn decode_pnm(bytes: &[u8]) -> Result<Frame, FrameError> {
    if bytes.len() < 2 {
        return Err(FrameError::MalformedHeader("missing magic".into()));
    }
    let channels = match &bytes[..2] {
        b"P5" => 1,
        b"P6" => 3,
        other => {
            return Err(FrameError::MalformedHeader(format!(
                "bad magic {:?}",
                String::from_utf8_lossy(other)
            )))
        }
    };
    let mut cursor = HeaderCursor { bytes, pos: 2 };
    let width = cursor.number("width")? as usize;
    let height = cursor.number("height")? as usize;
    let maxval = cursor.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(FrameError::MalformedHeader(format!(
            "zero dimension {width}x{height}"
        )));
    }
    if maxval != 255 {
        return Err(FrameError::UnsupportedMaxval(maxval));
    }
    // exactly one whitespace byte separates maxval from the raster
    match bytes.get(cursor.pos) {
        Some(b) if b.is_ascii_whitespace() => cursor.pos += 1,
        _ => {
            return Err(FrameError::MalformedHeader(
                "no whitespace after maxval".into(),
            ))
        }
    }
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| FrameError::MalformedHeader("dimensions overflow".into()))?;
    let payload = &bytes[cursor.pos..];
    if payload.len() < expected {
        return Err(FrameError::TruncatedPayload {
            expected,
            actual: payload.len(),
        });
    }
    Frame::new(width, height, channels, payload[..expected].to_vec())
}

pub fn encode_pnm(frame: &Frame) -> Vec<u8> {
    let magic = if frame.channels == 1 { "P5" } else { "P6" };
    let header = format!("{magic}\n{} {}\n255\n", frame.width, frame.height);
    let mut out = Vec::with_capacity(header.len() + frame.data.len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&frame.data);
    out
}

pub fn read_frame(path: impl AsRef<Path>) -> Result<Frame, FrameError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| FrameError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_pnm(&bytes)
}

pub fn write_frame(frame: &Frame, path: impl AsRef<Path>) -> Result<(), FrameError> {
    let path = path.as_ref();
    let io_err = |source| FrameError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = fs::File::create(path).map_err(io_err)?;
    file.write_all(&encode_pnm(frame)).map_err(io_err)
}

/// Expand a printf-style pattern holding a single `%d` / `%0Nd` directive.
pub fn format_index(pattern: &str, index: u64) -> Result<String, FrameError> {
    let start = pattern
        .find('%')
        .ok_or_else(|| FrameError::Sequence(format!("pattern {pattern:?} has no index directive")))?;
    let rest = &pattern[start + 1..];
    let end = rest
        .find('d')
        .ok_or_else(|| FrameError::Sequence(format!("pattern {pattern:?} has no %d")))?;
    let spec = &rest[..end];
    let width = if spec.is_empty() {
        0
    } else if spec.starts_with('0') && spec[1..].chars().all(|c| c.is_ascii_digit()) && spec.len() > 1 {
        spec[1..].parse::<usize>().unwrap_or(0)
    } else {
        return Err(FrameError::Sequence(format!(
            "unsupported directive %{spec}d in {pattern:?}"
        )));
    };
    Ok(format!(
        "{}{:0width$}{}",
        &pattern[..start],
        index,
        &rest[end + 1..],
        width = width
    ))
}

/// A numbered frame sequence on disk, e.g. `dir/frame_000000.ppm ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceManifest {
    pub directory: PathBuf,
    pub pattern: String,
    pub first_index: u64,
    pub count: usize,
    pub channels: usize,
}

impl SequenceManifest {
    /// Validate the manifest against the filesystem. `count == 0` probes the
    /// longest contiguous run starting at `first_index`.
    pub fn open(
        directory: impl Into<PathBuf>,
        pattern: &str,
        first_index: u64,
        count: usize,
        channels: usize,
    ) -> Result<Self, FrameError> {
        let directory = directory.into();
        if channels != 1 && channels != 3 {
            return Err(FrameError::Sequence(format!(
                "declared channels must be 1 or 3, got {channels}"
            )));
        }
        let mut manifest = Self {
            directory,
            pattern: pattern.to_string(),
            first_index,
            count,
            channels,
        };
        if count == 0 {
            let mut n = 0;
            while manifest.path_at(n)?.is_file() {
                n += 1;
            }
            manifest.count = n;
        }
        if manifest.count == 0 {
            return Err(FrameError::Sequence(format!(
                "no frames matching {} in {}",
                manifest.pattern,
                manifest.directory.display()
            )));
        }
        for n in 0..manifest.count {
            let path = manifest.path_at(n)?;
            if !path.is_file() {
                return Err(FrameError::Sequence(format!(
                    "missing frame {}",
                    path.display()
                )));
            }
        }
        Ok(manifest)
    }

    pub fn path_at(&self, offset: usize) -> Result<PathBuf, FrameError> {
        let name = format_index(&self.pattern, self.first_index + offset as u64)?;
        Ok(self.directory.join(name))
    }

    /// Read the frame at `offset`, checking it against the declared channel
    /// count and, when given, the sequence's established dimensions.
    pub fn read(&self, offset: usize, dims: Option<(usize, usize)>) -> Result<Frame, FrameError> {
        let path = self.path_at(offset)?;
        let frame = read_frame(&path)?.with_index(self.first_index + offset as u64);
        if frame.channels() != self.channels {
            return Err(FrameError::Sequence(format!(
                "{} has {} channels, manifest declares {}",
                path.display(),
                frame.channels(),
                self.channels
            )));
        }
        if let Some((w, h)) = dims {
            if (frame.width(), frame.height()) != (w, h) {
                return Err(FrameError::Sequence(format!(
                    "{} is {}x{}, sequence is {w}x{h}",
                    path.display(),
                    frame.width(),
                    frame.height()
                )));
            }
        }
        Ok(frame)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pnm(magic: &str, w: usize, h: usize, payload: &[u8]) -> Vec<u8> {
        let mut v = format!("{magic}\n{w} {h}\n255\n").into_bytes();
        v.extend_from_slice(payload);
        v
    }

    #[test]
    fn decodes_gray_2x2() {
        let f = decode_pnm(&pnm("P5", 2, 2, &[0, 64, 128, 255])).unwrap();
        assert_eq!((f.width(), f.height(), f.channels()), (2, 2, 1));
        assert_eq!(f.data(), &[0, 64, 128, 255]);
    }

    #[test]
    fn decodes_single_red_pixel() {
        let f = decode_pnm(&pnm("P6", 1, 1, &[255, 0, 0])).unwrap();
        assert_eq!((f.width(), f.height(), f.channels()), (1, 1, 3));
        assert_eq!(f.data(), &[255, 0, 0]);
    }

    #[test]
    fn truncated_payload() {
        let err = decode_pnm(&pnm("P5", 4, 4, &[0; 10])).unwrap_err();
        assert!(matches!(
            err,
            FrameError::TruncatedPayload {
                expected: 16,
                actual: 10
            }
        ));
    }

    #[test]
    fn header_errors() {
        assert!(matches!(
            decode_pnm(b"P3\n1 1\n255\n\0\0\0"),
            Err(FrameError::MalformedHeader(_))
        ));
        assert!(matches!(
            decode_pnm(b"P5\n0 1\n255\n"),
            Err(FrameError::MalformedHeader(_))
        ));
        assert!(matches!(
            decode_pnm(b"P5\n1 1\n65535\n\0\0"),
            Err(FrameError::UnsupportedMaxval(65535))
        ));
        assert!(matches!(
            decode_pnm(b"P5\nx 1\n255\n\0"),
            Err(FrameError::MalformedHeader(_))
        ));
    }

    #[test]
    fn header_comments_are_skipped() {
        let bytes = b"P5 # a comment\n# another\n2 # w\n1\n255\n\x07\x09";
        let f = decode_pnm(bytes).unwrap();
        assert_eq!(f.data(), &[7, 9]);
    }

    #[test]
    fn payload_byte_order() {
        let f = Frame::new(2, 1, 1, vec![7, 9]).unwrap();
        let bytes = encode_pnm(&f);
        assert_eq!(&bytes[bytes.len() - 2..], &[7, 9]);
        assert!(bytes.starts_with(b"P5"));
    }

    #[test]
    fn file_round_trip_and_unwritable_path() {
        let dir = tempfile::tempdir().unwrap();
        let f = Frame::new(3, 2, 3, (0..18).collect()).unwrap();
        let p = dir.path().join("a.ppm");
        write_frame(&f, &p).unwrap();
        assert_eq!(read_frame(&p).unwrap(), f);

        let bad = dir.path().join("no/such/dir/a.ppm");
        assert!(matches!(write_frame(&f, bad), Err(FrameError::Io { .. })));
    }

    #[test]
    fn grayscale_values() {
        let f = Frame::new(3, 1, 3, vec![255, 255, 255, 0, 0, 0, 255, 0, 0]).unwrap();
        let g = to_grayscale(&f).unwrap();
        assert_eq!(g.channels(), 1);
        assert_eq!(g.data(), &[255, 0, 76]);
        assert!(matches!(to_grayscale(&g), Err(FrameError::AlreadyGray)));
    }

    #[test]
    fn index_patterns() {
        assert_eq!(format_index("frame_%06d.ppm", 42).unwrap(), "frame_000042.ppm");
        assert_eq!(format_index("f%d.pgm", 7).unwrap(), "f7.pgm");
        assert!(format_index("frame.ppm", 1).is_err());
    }

    #[test]
    fn manifest_probe_and_dimension_check() {
        let dir = tempfile::tempdir().unwrap();
        for i in 0..3 {
            let f = Frame::filled(4, 4, &[i as u8, 0, 0]).unwrap();
            write_frame(&f, dir.path().join(format!("frame_{i:06}.ppm"))).unwrap();
        }
        let m = SequenceManifest::open(dir.path(), "frame_%06d.ppm", 0, 0, 3).unwrap();
        assert_eq!(m.count, 3);
        let f2 = m.read(2, Some((4, 4))).unwrap();
        assert_eq!(f2.index, 2);
        assert!(m.read(0, Some((5, 4))).is_err());
        assert!(SequenceManifest::open(dir.path(), "frame_%06d.ppm", 0, 5, 3).is_err());
        assert!(SequenceManifest::open(dir.path(), "frame_%06d.ppm", 0, 0, 1)
            .unwrap()
            .read(0, None)
            .is_err());
    }

    fn arb_frame() -> impl Strategy<Value = Frame> {
        (1usize..12, 1usize..12, prop_oneof![Just(1usize), Just(3usize)]).prop_flat_map(
            |(w, h, c)| {
                proptest::collection::vec(any::<u8>(), w * h * c)
                    .prop_map(move |data| Frame::new(w, h, c, data).unwrap())
            },
        )
    }

    proptest! {
        #[test]
        fn decode_encode_identity(f in arb_frame()) {
            prop_assert_eq!(decode_pnm(&encode_pnm(&f)).unwrap(), f);
        }

        #[test]
        fn gray_within_channel_range(px in proptest::collection::vec(any::<u8>(), 3..=48)) {
            let n = px.len() / 3;
            let f = Frame::new(n, 1, 3, px[..n * 3].to_vec()).unwrap();
            let g = to_grayscale(&f).unwrap();
            for (rgb, &y) in f.data().chunks_exact(3).zip(g.data()) {
                let lo = *rgb.iter().min().unwrap();
                let hi = *rgb.iter().max().unwrap();
                prop_assert!(lo <= y && y <= hi);
            }
        }
    }
}
