//! Temporal segmentation and the built-in segment motion descriptor.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::net::{Bag, Polarity};
use crate::error::{Error, Result};
use crate::frame_io::FrameSource;
use crate::mask::BinaryMask;
use crate::trim::foreground_ratio;

pub const DEFAULT_SEGMENTS: usize = 32;
pub const DIFF_BINS: usize = 16;
/// Histogram of absolute differences, then mean / std / max of per-frame
/// mean difference, then mean foreground ratio.
pub const FEATURE_DIM: usize = DIFF_BINS + 4;

/// `S x D` feature matrix, one row per temporal segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentFeatures {
    segments: usize,
    dims: usize,
    data: Vec<f64>,
}

impl SegmentFeatures {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::RaggedRows(format!(
                "need at least 2 segments, got {} rows",
                rows.len()
            )));
        }
        let dims = rows[0].len();
        if dims == 0 {
            return Err(Error::RaggedRows("rows have no columns".into()));
        }
        let mut data = Vec::with_capacity(rows.len() * dims);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dims {
                return Err(Error::RaggedRows(format!(
                    "row {i} has {} columns, row 0 has {dims}",
                    row.len()
                )));
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::Parse(format!("row {i} column {j} is not finite")));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            segments: rows.len(),
            dims,
            data,
        })
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dims..(i + 1) * self.dims]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.dims)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.rows() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Split `n_frames` into `segments` contiguous inclusive ranges whose sizes
/// differ by at most one; the longer ranges come first.
pub fn segment_video(n_frames: usize, segments: usize) -> Result<Vec<(usize, usize)>> {
    if segments == 0 {
        return Err(Error::InvalidArgument("segment count must be positive".into()));
    }
    if n_frames < segments {
        return Err(Error::InsufficientFrames {
            frames: n_frames,
            segments,
        });
    }
    let (base, extra) = (n_frames / segments, n_frames % segments);
    let mut start = 0;
    Ok((0..segments)
        .map(|k| {
            let len = base + usize::from(k < extra);
            let range = (start, start + len - 1);
            start += len;
            range
        })
        .collect())
}

/// Motion descriptor of frames `start..=end`.
///
/// `masks`, when given, is indexed by frame and contributes the mean
/// foreground ratio over the frames of the range that have one.
pub fn builtin_features<S: FrameSource + ?Sized>(
    src: &S,
    (start, end): (usize, usize),
    masks: Option<&[Option<BinaryMask>]>,
) -> Result<Vec<f64>> {
    if end <= start {
        return Err(Error::RangeTooShort { start, end });
    }
    let len = src.frame_count();
    if end >= len {
        return Err(Error::IndexOutOfRange { index: end, len });
    }
    let mut hist = [0u64; DIFF_BINS];
    let mut frame_means = Vec::with_capacity(end - start);
    let mut prev = src.luma_frame(start)?;
    for t in start + 1..=end {
        let cur = src.luma_frame(t)?;
        let mut sum = 0u64;
        for (&a, &b) in prev.data().iter().zip(cur.data()) {
            let d = a.abs_diff(b);
            hist[(d / 16) as usize] += 1;
            sum += d as u64;
        }
        frame_means.push(sum as f64 / (cur.data().len() as f64 * 255.0));
        prev = cur;
    }
    let total: u64 = hist.iter().sum();
    let mut out: Vec<f64> = hist.iter().map(|&c| c as f64 / total as f64).collect();

    let n = frame_means.len() as f64;
    let mean = frame_means.iter().sum::<f64>() / n;
    let var = frame_means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / n;
    let max = frame_means.iter().copied().fold(0.0, f64::max);
    out.extend([mean, var.sqrt(), max]);

    let ratios: Vec<f64> = masks
        .map(|m| {
            (start..=end)
                .filter_map(|t| m.get(t).and_then(|o| o.as_ref()))
                .map(foreground_ratio)
                .collect()
        })
        .unwrap_or_default();
    out.push(if ratios.is_empty() {
        0.0
    } else {
        ratios.iter().sum::<f64>() / ratios.len() as f64
    });
    Ok(out)
}

/// Features of every segment of a whole sequence. A one-frame segment is
/// widened by its preceding frame (or the following one for frame 0) so that
/// it has a difference to measure.
pub fn video_features<S: FrameSource + ?Sized>(
    src: &S,
    segments: usize,
    masks: Option<&[Option<BinaryMask>]>,
) -> Result<SegmentFeatures> {
    let n = src.frame_count();
    if n < 2 {
        return Err(Error::InsufficientFrames {
            frames: n,
            segments,
        });
    }
    let rows = segment_video(n, segments)?
        .into_iter()
        .map(|(s, e)| {
            let range = match (s, e) {
                (0, 0) => (0, 1),
                (s, e) if s == e => (s - 1, e),
                r => r,
            };
            builtin_features(src, range, masks)
        })
        .collect::<Result<Vec<_>>>()?;
    SegmentFeatures::new(rows)
}

/// Parse a comma-separated feature matrix (no header). When
/// `expected_segments` is given the row count must match it.
pub fn parse_features(text: &str, expected_segments: Option<usize>) -> Result<SegmentFeatures> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|cell| {
                let cell = cell.trim();
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse(format!("line {}: bad value {cell:?}", i + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if let Some(s) = expected_segments {
        if rows.len() != s {
            return Err(Error::RaggedRows(format!(
                "expected {s} segment rows, found {}",
                rows.len()
            )));
        }
    }
    SegmentFeatures::new(rows)
}

pub fn load_features(path: impl AsRef<Path>, expected_segments: Option<usize>) -> Result<SegmentFeatures> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_features(&text, expected_segments)
}

/// Write bags as `pos_NNN.csv` / `neg_NNN.csv` feature files.
pub fn write_bags(bags: &[Bag], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (mut p, mut n) = (0, 0);
    for bag in bags {
        let name = match bag.polarity {
            Polarity::Positive => {
                p += 1;
                format!("pos_{:03}.csv", p - 1)
            }
            Polarity::Negative => {
                n += 1;
                format!("neg_{:03}.csv", n - 1)
            }
        };
        bag.features.write(dir.join(name))?;
    }
    Ok(())
}

/// Read every `pos_*.csv` and `neg_*.csv` in `dir`, in file-name order.
pub fn load_bags(dir: impl AsRef<Path>) -> Result<Vec<Bag>> {
    let dir = dir.as_ref();
    let mut names: Vec<String> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter(|n| n.ends_with(".csv") && (n.starts_with("pos_") || n.starts_with("neg_")))
        .collect();
    names.sort();
    names
        .into_iter()
        .map(|name| {
            let polarity = if name.starts_with("pos_") {
                Polarity::Positive
            } else {
                Polarity::Negative
            };
            let features = load_features(dir.join(&name), None)
                .map_err(|e| Error::Parse(format!("{name}: {e}")))?;
            Ok(Bag { features, polarity })
        })
        .collect()
}
