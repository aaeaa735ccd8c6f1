//! Frame stream files.
//!
//! A recording is a `.frames.jsonl` file plus an optional `.depth` sidecar.
//! Line 1 of the JSONL file is a [`StreamHeader`]; every following line is
//! one [`Frame`]. The sidecar holds raw little-endian `u16` depth images,
//! row-major, concatenated in `depth_ref` order: image `k` starts at byte
//! `k * width * height * 2`.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::CameraIntrinsics;
use crate::hand::HandFrame;
use crate::scene::{DepthFrame, ObjectId, SceneError, SceneObject};
use crate::selector::SelectorConfig;

pub const FORMAT_NAME: &str = "deixis-frames";
pub const FORMAT_VERSION: u32 = 1;

/// Longest accepted line in a frames file.
pub const MAX_LINE_BYTES: usize = 16 << 20;
pub const MAX_HANDS: usize = 2;
pub const MAX_OBJECTS: usize = 1024;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {source}")]
    Json { line: u64, source: serde_json::Error },
    #[error("line {line}: {source}")]
    Frame { line: u64, source: FrameError },
    #[error("line {line}: exceeds {MAX_LINE_BYTES} bytes")]
    LineTooLong { line: u64 },
    #[error("line {line}: not valid UTF-8")]
    Utf8 { line: u64 },
    #[error("not a {FORMAT_NAME} stream (format `{0}`)")]
    Format(String),
    #[error("unsupported stream version {found} (this build reads version {FORMAT_VERSION})")]
    Version { found: u32 },
    #[error("empty stream: missing header line")]
    MissingHeader,
    #[error("depth frame {index} out of range: sidecar holds {available} frames")]
    DepthIndex { index: u64, available: u64 },
    #[error("frame refers to depth but the stream has no sidecar")]
    NoSidecar,
    #[error("invalid intrinsics in header: {0}")]
    Intrinsics(#[from] crate::geometry::GeometryError),
}

/// Structural problems inside a single frame.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrameError {
    #[error("{0} hands in frame (at most {MAX_HANDS})")]
    TooManyHands(usize),
    #[error("two hands share the same handedness")]
    DuplicateHandedness,
    #[error("{0} objects in frame (at most {MAX_OBJECTS})")]
    TooManyObjects(usize),
    #[error("duplicate object id {0}")]
    DuplicateObjectId(ObjectId),
    #[error("object {id}: {source}")]
    Mask { id: ObjectId, source: SceneError },
    #[error("object {id}: mask is {width}x{height}, image is {expected_w}x{expected_h}")]
    MaskSize { id: ObjectId, width: u32, height: u32, expected_w: u32, expected_h: u32 },
    #[error("non-finite landmark coordinate")]
    NonFiniteLandmark,
    #[error("timestamp {t} precedes previous frame's {prev}")]
    TimeReversed { t: u64, prev: u64 },
}

/// First line of a frames file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamHeader {
    pub format: String,
    pub version: u32,
    pub intrinsics: CameraIntrinsics,
    /// Nominal frame rate.
    pub fps: f64,
    pub producer: String,
    /// Sidecar file name, relative to the frames file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<String>,
    /// Engine settings the stream was recorded with.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selector: Option<SelectorConfig>,
}

impl StreamHeader {
    pub fn new(intrinsics: CameraIntrinsics, fps: f64, producer: impl Into<String>) -> Self {
        Self {
            format: FORMAT_NAME.to_string(),
            version: FORMAT_VERSION,
            intrinsics,
            fps,
            producer: producer.into(),
            depth: None,
            selector: None,
        }
    }

    fn check(&self) -> Result<(), IoError> {
        if self.format != FORMAT_NAME {
            return Err(IoError::Format(self.format.clone()));
        }
        if self.version != FORMAT_VERSION {
            return Err(IoError::Version { found: self.version });
        }
        self.intrinsics.validate()?;
        Ok(())
    }
}

/// One perception sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub index: u64,
    /// Milliseconds since stream start.
    pub t: u64,
    #[serde(default)]
    pub hands: Vec<HandFrame>,
    #[serde(default)]
    pub objects: Vec<SceneObject>,
    /// Index of this frame's depth image in the sidecar.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_ref: Option<u64>,
}

impl Frame {
    pub fn empty(index: u64, t: u64) -> Self {
        Self { index, t, hands: Vec::new(), objects: Vec::new(), depth_ref: None }
    }

    /// Check the frame's internal consistency. `image` is the expected mask
    /// size, if known.
    pub fn validate(&self, image: Option<(u32, u32)>) -> Result<(), FrameError> {
        if self.hands.len() > MAX_HANDS {
            return Err(FrameError::TooManyHands(self.hands.len()));
        }
        if let [a, b] = self.hands.as_slice() {
            if a.handedness == b.handedness {
                return Err(FrameError::DuplicateHandedness);
            }
        }
        if self.hands.iter().flat_map(|h| h.landmarks.iter()).any(|p| !(p.u.is_finite() && p.v.is_finite())) {
            return Err(FrameError::NonFiniteLandmark);
        }
        if self.objects.len() > MAX_OBJECTS {
            return Err(FrameError::TooManyObjects(self.objects.len()));
        }
        let mut ids: Vec<ObjectId> = self.objects.iter().map(|o| o.id).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(FrameError::DuplicateObjectId(w[0]));
        }
        for o in &self.objects {
            if let Some((w, h)) = image {
                if o.mask.width != w || o.mask.height != h {
                    return Err(FrameError::MaskSize {
                        id: o.id,
                        width: o.mask.width,
                        height: o.mask.height,
                        expected_w: w,
                        expected_h: h,
                    });
                }
            }
            o.mask.validate().map_err(|source| FrameError::Mask { id: o.id, source })?;
        }
        Ok(())
    }
}

pub fn encode_header(h: &StreamHeader) -> String {
    serde_json::to_string(h).expect("header serializes")
}

pub fn decode_header(line: &str) -> Result<StreamHeader, IoError> {
    let h: StreamHeader = serde_json::from_str(line).map_err(|source| IoError::Json { line: 1, source })?;
    h.check()?;
    Ok(h)
}

/// Serialize a frame as a single JSON line (no trailing newline).
pub fn encode_frame(f: &Frame) -> String {
    serde_json::to_string(f).expect("frame serializes")
}

/// Parse and validate one frame line. `line` is the 1-based line number used
/// in error messages.
pub fn decode_frame(text: &str, line: u64) -> Result<Frame, IoError> {
    if text.len() > MAX_LINE_BYTES {
        return Err(IoError::LineTooLong { line });
    }
    let f: Frame = serde_json::from_str(text).map_err(|source| IoError::Json { line, source })?;
    f.validate(None).map_err(|source| IoError::Frame { line, source })?;
    Ok(f)
}

/// Read one `\n`-terminated line of at most [`MAX_LINE_BYTES`]. Returns
/// `Ok(false)` at end of input.
fn read_line_capped<R: BufRead>(r: &mut R, buf: &mut Vec<u8>, line: u64) -> Result<bool, IoError> {
    buf.clear();
    let n = r.by_ref().take(MAX_LINE_BYTES as u64 + 1).read_until(b'\n', buf)?;
    if n == 0 {
        return Ok(false);
    }
    if buf.last() == Some(&b'\n') {
        buf.pop();
        if buf.last() == Some(&b'\r') {
            buf.pop();
        }
    } else if buf.len() > MAX_LINE_BYTES {
        return Err(IoError::LineTooLong { line });
    }
    Ok(true)
}

/// Streaming reader for a frames file.
pub struct FrameReader<R> {
    inner: R,
    header: StreamHeader,
    line: u64,
    prev_t: Option<u64>,
    buf: Vec<u8>,
}

impl<R: BufRead> FrameReader<R> {
    pub fn new(mut inner: R) -> Result<Self, IoError> {
        let mut buf = Vec::new();
        if !read_line_capped(&mut inner, &mut buf, 1)? {
            return Err(IoError::MissingHeader);
        }
        let text = std::str::from_utf8(&buf).map_err(|_| IoError::Utf8 { line: 1 })?;
        let header = decode_header(text)?;
        Ok(Self { inner, header, line: 1, prev_t: None, buf })
    }

    pub fn header(&self) -> &StreamHeader {
        &self.header
    }

    /// Next frame, or `None` at end of stream. Blank lines are skipped.
    pub fn next_frame(&mut self) -> Result<Option<Frame>, IoError> {
        loop {
            self.line += 1;
            let line = self.line;
            if !read_line_capped(&mut self.inner, &mut self.buf, line)? {
                return Ok(None);
            }
            let text = std::str::from_utf8(&self.buf).map_err(|_| IoError::Utf8 { line })?;
            if text.trim().is_empty() {
                continue;
            }
            let f = decode_frame(text, line)?;
            let intr = &self.header.intrinsics;
            f.validate(Some((intr.width, intr.height))).map_err(|source| IoError::Frame { line, source })?;
            if let Some(prev) = self.prev_t {
                if f.t < prev {
                    return Err(IoError::Frame { line, source: FrameError::TimeReversed { t: f.t, prev } });
                }
            }
            self.prev_t = Some(f.t);
            return Ok(Some(f));
        }
    }
}

impl<R: BufRead> Iterator for FrameReader<R> {
    type Item = Result<Frame, IoError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_frame().transpose()
    }
}

pub struct FrameWriter<W: Write> {
    inner: W,
}

impl<W: Write> FrameWriter<W> {
    pub fn new(mut inner: W, header: &StreamHeader) -> io::Result<Self> {
        writeln!(inner, "{}", encode_header(header))?;
        Ok(Self { inner })
    }

    pub fn write_frame(&mut self, f: &Frame) -> io::Result<()> {
        writeln!(self.inner, "{}", encode_frame(f))
    }

    pub fn into_inner(mut self) -> io::Result<W> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

fn frame_bytes(width: u32, height: u32) -> u64 {
    u64::from(width) * u64::from(height) * 2
}

/// Append one depth image to a sidecar stream.
pub fn depth_sidecar_write<W: Write>(w: &mut W, depth: &DepthFrame) -> io::Result<()> {
    let mut bytes = Vec::with_capacity(depth.data.len() * 2);
    for v in &depth.data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&bytes)
}

/// Random-access reader over a depth sidecar.
pub struct DepthSidecar {
    file: File,
    frames: u64,
    intr: CameraIntrinsics,
}

impl DepthSidecar {
    pub fn open(path: impl AsRef<Path>, intr: CameraIntrinsics) -> Result<Self, IoError> {
        let file = File::open(path)?;
        let len = file.metadata()?.len();
        Ok(Self { file, frames: len / frame_bytes(intr.width, intr.height), intr })
    }

    pub fn len(&self) -> u64 {
        self.frames
    }

    pub fn is_empty(&self) -> bool {
        self.frames == 0
    }

    pub fn read(&mut self, index: u64) -> Result<DepthFrame, IoError> {
        if index >= self.frames {
            return Err(IoError::DepthIndex { index, available: self.frames });
        }
        let (w, h) = (self.intr.width, self.intr.height);
        let size = frame_bytes(w, h);
        self.file.seek(SeekFrom::Start(index * size))?;
        let mut bytes = vec![0u8; size as usize];
        self.file.read_exact(&mut bytes)?;
        let data = bytes.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect();
        Ok(DepthFrame::new(w, h, data, self.intr.depth_scale).expect("sized from intrinsics"))
    }
}

/// Read depth image `frame_index` from the sidecar at `path`.
pub fn depth_sidecar_read(path: impl AsRef<Path>, frame_index: u64, intr: &CameraIntrinsics) -> Result<DepthFrame, IoError> {
    DepthSidecar::open(path, *intr)?.read(frame_index)
}

/// `base.frames.jsonl`
pub fn frames_path(base: &Path) -> PathBuf {
    with_suffix(base, ".frames.jsonl")
}

/// `base.depth`
pub fn depth_path(base: &Path) -> PathBuf {
    with_suffix(base, ".depth")
}

/// `base.events.jsonl`
pub fn events_path(base: &Path) -> PathBuf {
    with_suffix(base, ".events.jsonl")
}

fn with_suffix(base: &Path, suffix: &str) -> PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Writes a frames file and its depth sidecar side by side.
pub struct Recorder {
    frames: FrameWriter<BufWriter<File>>,
    depth: BufWriter<File>,
    depth_count: u64,
    next_index: u64,
}

impl Recorder {
    /// Create `base.frames.jsonl` and `base.depth`.
    pub fn create(base: &Path, mut header: StreamHeader) -> Result<Self, IoError> {
        let dpath = depth_path(base);
        header.depth = dpath.file_name().map(|n| n.to_string_lossy().into_owned());
        let frames = FrameWriter::new(BufWriter::new(File::create(frames_path(base))?), &header)?;
        let depth = BufWriter::new(File::create(dpath)?);
        Ok(Self { frames, depth, depth_count: 0, next_index: 0 })
    }

    /// Append a frame. Its `index` and `depth_ref` are assigned here.
    pub fn push(&mut self, frame: &Frame, depth: Option<&DepthFrame>) -> Result<(), IoError> {
        let mut f = frame.clone();
        f.index = self.next_index;
        f.depth_ref = None;
        if let Some(d) = depth {
            depth_sidecar_write(&mut self.depth, d)?;
            f.depth_ref = Some(self.depth_count);
            self.depth_count += 1;
        }
        self.frames.write_frame(&f)?;
        self.next_index += 1;
        Ok(())
    }

    pub fn finish(self) -> Result<(), IoError> {
        self.frames.into_inner()?;
        let mut d = self.depth;
        d.flush()?;
        Ok(())
    }
}

/// Reads a recording back as `(frame, depth)` pairs.
pub struct Replay {
    reader: FrameReader<BufReader<File>>,
    sidecar: Option<DepthSidecar>,
}

impl Replay {
    pub fn open(frames: impl AsRef<Path>) -> Result<Self, IoError> {
        let frames = frames.as_ref();
        let reader = FrameReader::new(BufReader::new(File::open(frames)?))?;
        let sidecar = match &reader.header().depth {
            Some(name) => {
                let p = frames.parent().unwrap_or(Path::new(".")).join(name);
                Some(DepthSidecar::open(p, reader.header().intrinsics)?)
            }
            None => None,
        };
        Ok(Self { reader, sidecar })
    }

    pub fn header(&self) -> &StreamHeader {
        self.reader.header()
    }

    pub fn next_frame(&mut self) -> Result<Option<(Frame, Option<DepthFrame>)>, IoError> {
        let Some(f) = self.reader.next_frame()? else {
            return Ok(None);
        };
        let depth = match f.depth_ref {
            Some(k) => Some(self.sidecar.as_mut().ok_or(IoError::NoSidecar)?.read(k)?),
            None => None,
        };
        Ok(Some((f, depth)))
    }
}

impl Iterator for Replay {
    type Item = Result<(Frame, Option<DepthFrame>), IoError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_frame().transpose()
    }
}

/// Open a recording for replay.
pub fn replay(frames: impl AsRef<Path>) -> Result<Replay, IoError> {
    Replay::open(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pixel;
    use crate::hand::{Handedness, LANDMARK_COUNT};
    use crate::scene::{rle_encode, Bitmap};

    fn intr() -> CameraIntrinsics {
        CameraIntrinsics::new(100.0, 100.0, 8.0, 6.0, 16, 12, 0.001).unwrap()
    }

    fn sample_frame() -> Frame {
        let mut b = Bitmap::new(16, 12);
        b.set(3, 4, true);
        b.set(4, 4, true);
        let mut hand = HandFrame::new(Handedness::Left, [Pixel::new(1.25, 2.5); LANDMARK_COUNT]);
        hand.depth[3] = Some(0.61);
        hand.confidence = Some(0.9);
        Frame {
            index: 4,
            t: 133,
            hands: vec![hand],
            objects: vec![SceneObject {
                id: ObjectId(2),
                label: "mug".into(),
                mask: rle_encode(&b),
                centroid: None,
                pixel_count: None,
            }],
            depth_ref: Some(0),
        }
    }

    #[test]
    fn frame_round_trip() {
        let f = sample_frame();
        assert_eq!(decode_frame(&encode_frame(&f), 2).unwrap(), f);
        let e = Frame::empty(0, 0);
        assert_eq!(decode_frame(&encode_frame(&e), 2).unwrap(), e);
    }

    #[test]
    fn truncated_line_names_line() {
        let s = encode_frame(&sample_frame());
        let err = decode_frame(&s[..s.len() / 2], 17).unwrap_err();
        assert!(err.to_string().starts_with("line 17:"), "{err}");
    }

    #[test]
    fn bad_rle_rejected() {
        let mut f = sample_frame();
        f.objects[0].mask.runs.push(1);
        assert!(matches!(decode_frame(&encode_frame(&f), 3), Err(IoError::Frame { line: 3, .. })));
    }

    #[test]
    fn unknown_keys_ignored() {
        let f: Frame = decode_frame(r#"{"index":1,"t":2,"future":[1,2],"hands":[],"objects":[]}"#, 2).unwrap();
        assert_eq!(f, Frame::empty(1, 2));
    }

    #[test]
    fn version_mismatch_refused() {
        let mut h = StreamHeader::new(intr(), 30.0, "test");
        h.version = 2;
        let text = format!("{}\n", encode_header(&h));
        assert!(matches!(FrameReader::new(text.as_bytes()), Err(IoError::Version { found: 2 })));
    }

    #[test]
    fn overlong_line_rejected_without_reading_it_all() {
        let h = encode_header(&StreamHeader::new(intr(), 30.0, "test"));
        let body = vec![b' '; MAX_LINE_BYTES + 10];
        let mut data = format!("{h}\n").into_bytes();
        data.extend_from_slice(&body);
        let mut r = FrameReader::new(data.as_slice()).unwrap();
        assert!(matches!(r.next_frame(), Err(IoError::LineTooLong { line: 2 })));
    }

    #[test]
    fn sidecar_offsets() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.depth");
        let i = intr();
        let a = DepthFrame::new(16, 12, (0..192).collect(), 0.001).unwrap();
        let b = DepthFrame::new(16, 12, (0..192).map(|v| 60000 - v).collect(), 0.001).unwrap();
        let mut f = File::create(&path).unwrap();
        depth_sidecar_write(&mut f, &a).unwrap();
        depth_sidecar_write(&mut f, &b).unwrap();
        drop(f);
        assert_eq!(depth_sidecar_read(&path, 0, &i).unwrap(), a);
        assert_eq!(depth_sidecar_read(&path, 1, &i).unwrap(), b);
        let raw = std::fs::read(&path).unwrap();
        assert_eq!(&raw[192 * 2..192 * 2 + 2], &60000u16.to_le_bytes());
        assert!(matches!(depth_sidecar_read(&path, 2, &i), Err(IoError::DepthIndex { index: 2, available: 2 })));
    }

    #[test]
    fn recorder_replay_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("session");
        let d = DepthFrame::filled(16, 12, 700, 0.001);
        let mut rec = Recorder::create(&base, StreamHeader::new(intr(), 30.0, "test")).unwrap();
        rec.push(&sample_frame(), Some(&d)).unwrap();
        rec.push(&Frame::empty(9, 200), None).unwrap();
        rec.finish().unwrap();

        let got: Vec<_> = replay(frames_path(&base)).unwrap().collect::<Result<_, _>>().unwrap();
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].0.index, 0);
        assert_eq!(got[0].1.as_ref(), Some(&d));
        assert_eq!(got[1].0.index, 1);
        assert_eq!(got[1].1, None);
    }
}
