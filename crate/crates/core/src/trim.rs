//! Motion-based trimming: keep the frames whose foreground ratio reaches a
//! threshold, and remember where each kept frame came from.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::frame_io::{frame_file_name, load_sequence, FrameSequence};
use crate::mask::BinaryMask;

pub const MAP_FILE_NAME: &str = "trim_map.txt";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrimConfig {
    pub threshold: f64,
    pub padding: usize,
}

impl Default for TrimConfig {
    fn default() -> Self {
        Self {
            threshold: 0.05,
            padding: 0,
        }
    }
}

impl TrimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::InvalidArgument(format!(
                "trim threshold must lie in [0, 1], got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// Kept frames as inclusive original-index runs, sorted and disjoint.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TrimSegmentMap {
    runs: Vec<(usize, usize)>,
    total_kept: usize,
}

impl TrimSegmentMap {
    /// Build from runs, checking order, disjointness and bounds.
    pub fn from_runs(runs: Vec<(usize, usize)>) -> Result<Self> {
        for (k, &(s, e)) in runs.iter().enumerate() {
            if s > e {
                return Err(Error::InconsistentMap(format!("run {k} starts after it ends ({s} > {e})")));
            }
            if k > 0 && s <= runs[k - 1].1 {
                return Err(Error::InconsistentMap(format!(
                    "run {k} ({s},{e}) overlaps or precedes run {}",
                    k - 1
                )));
            }
        }
        let total_kept = runs.iter().map(|&(s, e)| e - s + 1).sum();
        Ok(Self { runs, total_kept })
    }

    pub fn runs(&self) -> &[(usize, usize)] {
        &self.runs
    }

    pub fn total_kept(&self) -> usize {
        self.total_kept
    }

    pub fn is_empty(&self) -> bool {
        self.total_kept == 0
    }

    /// Original indices of every kept frame, in trimmed order.
    pub fn kept_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.runs.iter().flat_map(|&(s, e)| s..=e)
    }

    /// Last original index referenced, if any.
    pub fn last_index(&self) -> Option<usize> {
        self.runs.last().map(|&(_, e)| e)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("total_kept {}\n", self.total_kept);
        for (s, e) in &self.runs {
            let _ = writeln!(out, "{s} {e}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty trim map".into()))?;
        let declared: usize = header
            .strip_prefix("total_kept ")
            .and_then(|n| n.trim().parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad trim map header {header:?}")))?;
        let mut runs = Vec::new();
        for (n, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parsed = match fields.as_slice() {
                [s, e] => s.parse().ok().zip(e.parse().ok()),
                _ => None,
            };
            let run = parsed
                .ok_or_else(|| Error::Parse(format!("trim map line {}: {line:?}", n + 2)))?;
            runs.push(run);
        }
        let map = Self::from_runs(runs)?;
        if map.total_kept != declared {
            return Err(Error::InconsistentMap(format!(
                "header says {declared} kept frames, runs cover {}",
                map.total_kept
            )));
        }
        Ok(map)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

pub fn foreground_ratio(mask: &BinaryMask) -> f64 {
    mask.foreground_count() as f64 / (mask.width() * mask.height()) as f64
}

/// Select frames by precomputed ratios. `None` marks a frame with no mask
/// (e.g. inside the first window); such frames are never kept.
pub fn select_by_ratio(ratios: &[Option<f64>], config: &TrimConfig) -> TrimSegmentMap {
    let n = ratios.len();
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut t = 0;
    while t < n {
        if !matches!(ratios[t], Some(r) if r >= config.threshold) {
            t += 1;
            continue;
        }
        let start = t;
        while t + 1 < n && matches!(ratios[t + 1], Some(r) if r >= config.threshold) {
            t += 1;
        }
        let s = start.saturating_sub(config.padding);
        let e = (t + config.padding).min(n - 1);
        match runs.last_mut() {
            Some(last) if s <= last.1 + 1 => last.1 = last.1.max(e),
            _ => runs.push((s, e)),
        }
        t += 1;
    }
    TrimSegmentMap::from_runs(runs).expect("runs are built sorted and disjoint")
}

pub fn select_frames(masks: &[BinaryMask], config: &TrimConfig) -> TrimSegmentMap {
    let ratios: Vec<Option<f64>> = masks.iter().map(|m| Some(foreground_ratio(m))).collect();
    select_by_ratio(&ratios, config)
}

pub fn map_to_original(map: &TrimSegmentMap, trimmed_index: usize) -> Result<usize> {
    let mut rest = trimmed_index;
    for &(s, e) in &map.runs {
        let len = e - s + 1;
        if rest < len {
            return Ok(s + rest);
        }
        rest -= len;
    }
    Err(Error::IndexOutOfRange {
        index: trimmed_index,
        len: map.total_kept,
    })
}

/// Copy the kept frames of `seq` into `out_dir`, renumbered from 0, and write
/// the map file next to them.
pub fn emit_trimmed(
    seq: &FrameSequence,
    map: &TrimSegmentMap,
    out_dir: impl AsRef<Path>,
) -> Result<FrameSequence> {
    let out_dir = out_dir.as_ref();
    if map.is_empty() {
        return Err(Error::EmptySelection("trim map keeps no frames".into()));
    }
    let len = seq.files().len();
    if let Some(last) = map.last_index().filter(|&l| l >= len) {
        return Err(Error::IndexOutOfRange { index: last, len });
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    for (k, orig) in map.kept_indices().enumerate() {
        let src = &seq.files()[orig];
        let dst = out_dir.join(frame_file_name(k, seq.channels()));
        fs::copy(src, &dst).map_err(|e| Error::io(&dst, e))?;
    }
    map.write(out_dir.join(MAP_FILE_NAME))?;
    Ok(load_sequence(out_dir)?.with_fps(seq.fps()))
}
