//! Frame-sequence directories, binary PGM/PPM codec and on-disk statistics.
//!
//! A sequence is a directory of `NNNNNN.pgm` / `NNNNNN.ppm` files ordered by
//! their numeric stem. Numbering may start at 0 or 1; frame indices used by
//! the rest of the crate are always 0-based positions in that order.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::mask::BinaryMask;

pub const DEFAULT_FPS: f64 = 30.0;

/// 8-bit image, row-major, 1 (gray) or 3 (RGB) interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl Frame {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::DimensionMismatch(format!(
                "frame dimensions must be positive, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::UnsupportedFormat(format!(
                "{channels} channels (expected 1 or 3)"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::DimensionMismatch(format!(
                "{width}x{height}x{channels} frame needs {} bytes, got {}",
                width * height * channels,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn gray(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        Self::new(width, height, 1, data)
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

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    /// Intensity of a luminance frame at `(x, y)`.
    pub fn luma(&self, x: usize, y: usize) -> u8 {
        debug_assert_eq!(self.channels, 1);
        self.data[y * self.width + x]
    }
}

/// Rec. 601 luma. Gray frames are returned unchanged.
pub fn to_luminance(frame: &Frame) -> Frame {
    if frame.channels == 1 {
        return frame.clone();
    }
    let data = frame
        .data
        .chunks_exact(3)
        .map(|rgb| {
            let y = 0.299 * rgb[0] as f64 + 0.587 * rgb[1] as f64 + 0.114 * rgb[2] as f64;
            y.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    Frame {
        width: frame.width,
        height: frame.height,
        channels: 1,
        data,
    }
}

/// Anything that yields equally sized frames by 0-based index.
pub trait FrameSource {
    fn frame_count(&self) -> usize;

    /// `(width, height)` shared by every frame.
    fn dims(&self) -> (usize, usize);

    fn frame(&self, index: usize) -> Result<Frame>;

    fn luma_frame(&self, index: usize) -> Result<Frame> {
        self.frame(index).map(|f| to_luminance(&f))
    }
}

/// In-memory frames, mostly for synthetic scenes and tests.
#[derive(Debug, Clone)]
pub struct MemorySequence {
    frames: Vec<Frame>,
}

impl MemorySequence {
    pub fn new(frames: Vec<Frame>) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::EmptyDirectory(PathBuf::from("<memory>")))?;
        let (w, h, c) = (first.width, first.height, first.channels);
        for (i, f) in frames.iter().enumerate() {
            if (f.width, f.height, f.channels) != (w, h, c) {
                return Err(Error::DimensionMismatch(format!(
                    "frame {i} is {}x{}x{}, expected {w}x{h}x{c}",
                    f.width, f.height, f.channels
                )));
            }
        }
        Ok(Self { frames })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }
}

impl FrameSource for MemorySequence {
    fn frame_count(&self) -> usize {
        self.frames.len()
    }

    fn dims(&self) -> (usize, usize) {
        (self.frames[0].width, self.frames[0].height)
    }

    fn frame(&self, index: usize) -> Result<Frame> {
        self.frames
            .get(index)
            .cloned()
            .ok_or(Error::IndexOutOfRange {
                index,
                len: self.frames.len(),
            })
    }
}

/// Descriptor of an on-disk frame directory. Pixel data is decoded lazily.
#[derive(Debug, Clone)]
pub struct FrameSequence {
    directory: PathBuf,
    files: Vec<PathBuf>,
    first_number: u64,
    width: usize,
    height: usize,
    channels: usize,
    fps: f64,
}

const RASTER_EXTENSIONS: &[&str] = &["pgm", "ppm"];
const OTHER_IMAGE_EXTENSIONS: &[&str] = &[
    "png", "jpg", "jpeg", "bmp", "tif", "tiff", "gif", "webp", "pbm", "pnm",
];

/// Scan a directory for numerically named frames.
pub fn load_sequence(directory: impl AsRef<Path>) -> Result<FrameSequence> {
    let directory = directory.as_ref();
    let entries = fs::read_dir(directory).map_err(|e| Error::io(directory, e))?;
    let mut numbered: Vec<(u64, PathBuf)> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(directory, e))?;
        let path = entry.path();
        if !path.is_file() {
            continue;
        }
        let (Some(stem), Some(ext)) = (
            path.file_stem().and_then(|s| s.to_str()),
            path.extension().and_then(|s| s.to_str()),
        ) else {
            continue;
        };
        let Ok(number) = stem.parse::<u64>() else {
            continue;
        };
        let ext = ext.to_ascii_lowercase();
        if RASTER_EXTENSIONS.contains(&ext.as_str()) {
            numbered.push((number, path));
        } else if OTHER_IMAGE_EXTENSIONS.contains(&ext.as_str()) {
            return Err(Error::UnsupportedFormat(format!(
                "{} (only binary PGM/PPM frames are supported)",
                path.display()
            )));
        }
    }
    if numbered.is_empty() {
        return Err(Error::EmptyDirectory(directory.to_path_buf()));
    }
    numbered.sort();
    if let Some(w) = numbered.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::UnsupportedFormat(format!(
            "duplicate frame number {} in {}",
            w[0].0,
            directory.display()
        )));
    }

    let first_number = numbered[0].0;
    let files: Vec<PathBuf> = numbered.into_iter().map(|(_, p)| p).collect();
    let first = read_pnm_header(&files[0])?;
    for path in &files[1..] {
        let header = read_pnm_header(path)?;
        if (header.width, header.height, header.channels)
            != (first.width, first.height, first.channels)
        {
            return Err(Error::DimensionMismatch(format!(
                "{} is {}x{}x{}, first frame is {}x{}x{}",
                path.display(),
                header.width,
                header.height,
                header.channels,
                first.width,
                first.height,
                first.channels
            )));
        }
    }
    Ok(FrameSequence {
        directory: directory.to_path_buf(),
        files,
        first_number,
        width: first.width,
        height: first.height,
        channels: first.channels,
        fps: DEFAULT_FPS,
    })
}

impl FrameSequence {
    pub fn with_fps(mut self, fps: f64) -> Self {
        self.fps = fps;
        self
    }

    pub fn directory(&self) -> &Path {
        &self.directory
    }

    pub fn files(&self) -> &[PathBuf] {
        &self.files
    }

    /// Numeric stem of the first frame file (0 or 1 in practice).
    pub fn first_number(&self) -> u64 {
        self.first_number
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

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn size_bytes(&self) -> Result<u64> {
        self.files.iter().try_fold(0u64, |acc, p| {
            let len = fs::metadata(p).map_err(|e| Error::io(p, e))?.len();
            Ok(acc + len)
        })
    }
}

/// Decode one frame of `seq`.
pub fn read_frame(seq: &FrameSequence, index: usize) -> Result<Frame> {
    let path = seq.files.get(index).ok_or(Error::IndexOutOfRange {
        index,
        len: seq.files.len(),
    })?;
    let frame = read_pnm(path)?;
    if (frame.width, frame.height, frame.channels) != (seq.width, seq.height, seq.channels) {
        return Err(Error::DimensionMismatch(format!(
            "{} changed size since the sequence was loaded",
            path.display()
        )));
    }
    Ok(frame)
}

impl FrameSource for FrameSequence {
    fn frame_count(&self) -> usize {
        self.files.len()
    }

    fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    fn frame(&self, index: usize) -> Result<Frame> {
        read_frame(self, index)
    }
}

#[derive(Debug, Clone, Copy)]
struct PnmHeader {
    width: usize,
    height: usize,
    channels: usize,
    data_offset: usize,
}

fn corrupt(path: &Path, reason: impl Into<String>) -> Error {
    Error::CorruptFile {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn parse_pnm_header(bytes: &[u8], path: &Path) -> Result<PnmHeader> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(corrupt(path, "missing netpbm magic"));
    }
    let channels = match bytes[1] {
        b'5' => 1,
        b'6' => 3,
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "{}: netpbm type P{} (only P5/P6)",
                path.display(),
                other as char
            )))
        }
    };
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(corrupt(path, "truncated header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        if start == pos {
            return Err(corrupt(path, "malformed header field"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| corrupt(path, "header field out of range"))?;
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(corrupt(path, "truncated header")),
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(corrupt(path, "zero image dimension"));
    }
    if maxval != 255 {
        return Err(Error::UnsupportedFormat(format!(
            "{}: maxval {maxval} (only 8-bit, maxval 255)",
            path.display()
        )));
    }
    Ok(PnmHeader {
        width,
        height,
        channels,
        data_offset: pos,
    })
}

fn read_pnm_header(path: &Path) -> Result<PnmHeader> {
    use std::io::Read;
    let mut file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut buf = [0u8; 512];
    let mut filled = 0;
    while filled < buf.len() {
        let n = file
            .read(&mut buf[filled..])
            .map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        filled += n;
    }
    parse_pnm_header(&buf[..filled], path)
}

/// Decode a binary PGM (P5) or PPM (P6) file.
pub fn read_pnm(path: impl AsRef<Path>) -> Result<Frame> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pnm(&bytes, path)
}

fn decode_pnm(bytes: &[u8], path: &Path) -> Result<Frame> {
    let header = parse_pnm_header(bytes, path)?;
    let need = header.width * header.height * header.channels;
    let data = &bytes[header.data_offset..];
    if data.len() < need {
        return Err(corrupt(
            path,
            format!("expected {need} data bytes, found {}", data.len()),
        ));
    }
    Frame::new(
        header.width,
        header.height,
        header.channels,
        data[..need].to_vec(),
    )
}

pub fn encode_pnm(frame: &Frame) -> Vec<u8> {
    let magic = if frame.channels == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", frame.width, frame.height).into_bytes();
    out.extend_from_slice(&frame.data);
    out
}

pub fn write_pnm(frame: &Frame, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_bytes(path, &encode_pnm(frame))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(bytes).map_err(|e| Error::io(path, e))
}

/// Write a mask as P5 PGM: foreground 255, background 0.
pub fn write_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let data = mask
        .labels()
        .iter()
        .map(|&fg| if fg { 255 } else { 0 })
        .collect();
    let frame = Frame::gray(mask.width(), mask.height(), data)?;
    write_pnm(&frame, path)
}

/// Read a mask written by [`write_mask`] (or any 8-bit PGM: values ≥ 128
/// are foreground).
pub fn read_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let path = path.as_ref();
    let frame = read_pnm(path)?;
    if frame.channels != 1 {
        return Err(Error::UnsupportedFormat(format!(
            "{}: masks must be single-channel",
            path.display()
        )));
    }
    let labels = frame.data.iter().map(|&v| v >= 128).collect();
    BinaryMask::new(frame.width, frame.height, labels)
}

/// Canonical file name for frame `index` of a written sequence.
pub fn frame_file_name(index: usize, channels: usize) -> String {
    let ext = if channels == 1 { "pgm" } else { "ppm" };
    format!("{index:06}.{ext}")
}

/// Write frames as a 0-based numbered sequence into `dir` (created if needed).
pub fn write_sequence(frames: &[Frame], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, f) in frames.iter().enumerate() {
        write_pnm(f, dir.join(frame_file_name(i, f.channels)))?;
    }
    Ok(())
}

/// Duration/size/frames of a sequence plus the CPU seconds of a measured stage.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SequenceStats {
    pub frames: usize,
    pub fps: f64,
    pub size_bytes: u64,
    pub wall_seconds: f64,
}

impl SequenceStats {
    pub fn new(frames: usize, fps: f64, size_bytes: u64, wall_seconds: f64) -> Self {
        Self {
            frames,
            fps,
            size_bytes,
            wall_seconds: wall_seconds.max(0.0),
        }
    }

    /// Whole seconds of playback, floored.
    pub fn duration_seconds(&self) -> u64 {
        (self.frames as f64 / self.fps).floor() as u64
    }

    /// `mm:ss`, both fields floored and zero-padded.
    pub fn duration(&self) -> String {
        let secs = self.duration_seconds();
        format!("{:02}:{:02}", secs / 60, secs % 60)
    }

    /// Decimal megabytes.
    pub fn size_mb(&self) -> f64 {
        self.size_bytes as f64 / 1_000_000.0
    }

    /// One report row: `duration | size MB | frames | seconds`.
    pub fn row(&self) -> String {
        format!(
            "{} | {:.1} | {} | {:.0}",
            self.duration(),
            self.size_mb(),
            self.frames,
            self.wall_seconds
        )
    }

    /// Same fields, tab separated, seconds at millisecond precision.
    pub fn tsv_row(&self) -> String {
        format!(
            "{}\t{:.1}\t{}\t{:.3}",
            self.duration(),
            self.size_mb(),
            self.frames,
            self.wall_seconds
        )
    }
}

pub fn sequence_stats(seq: &FrameSequence, wall_seconds: f64) -> Result<SequenceStats> {
    Ok(SequenceStats::new(
        seq.frame_count(),
        seq.fps,
        seq.size_bytes()?,
        wall_seconds,
    ))
}
