//! Temporal difference histograms: the per-pixel input features of the
//! distribution network.
//!
//! Every histogram lives on a fixed grid of `B` bins spanning `[-1, 1]`
//! with step `2 / (B - 1)`; bin `(B - 1) / 2` represents the value 0.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::frame_io::{write_bytes, Frame, FrameSource};
use crate::mask::BinaryMask;

pub const DEFAULT_BINS: usize = 201;
pub const DEFAULT_WINDOW: usize = 100;

pub fn validate_bins(bins: usize) -> Result<()> {
    if bins < 3 || bins % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "bin count must be odd and at least 3, got {bins}"
        )));
    }
    Ok(())
}

/// `B` real values on the `[-1, 1]` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    bins: Vec<f64>,
}

impl Histogram {
    pub fn zeros(bins: usize) -> Result<Self> {
        validate_bins(bins)?;
        Ok(Self {
            bins: vec![0.0; bins],
        })
    }

    pub fn from_bins(bins: Vec<f64>) -> Result<Self> {
        validate_bins(bins.len())?;
        if let Some(i) = bins.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("bin {i} is not finite")));
        }
        Ok(Self { bins })
    }

    /// Unit mass at bin `index`.
    pub fn delta(bins: usize, index: usize) -> Result<Self> {
        let mut h = Self::zeros(bins)?;
        if index >= bins {
            return Err(Error::IndexOutOfRange { index, len: bins });
        }
        h.bins[index] = 1.0;
        Ok(h)
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn bins(&self) -> &[f64] {
        &self.bins
    }

    pub fn into_bins(self) -> Vec<f64> {
        self.bins
    }

    pub fn center(&self) -> usize {
        (self.bins.len() - 1) / 2
    }

    pub fn step(&self) -> f64 {
        2.0 / (self.bins.len() - 1) as f64
    }

    /// Grid value of bin `i`.
    pub fn value(&self, i: usize) -> f64 {
        grid_value(i, self.bins.len())
    }

    pub fn total(&self) -> f64 {
        self.bins.iter().sum()
    }

    /// Non-negative and summing to one (within 1e-9).
    pub fn is_distribution(&self) -> bool {
        self.bins.iter().all(|&v| v >= 0.0) && (self.total() - 1.0).abs() <= 1e-9
    }
}

pub fn grid_value(i: usize, bins: usize) -> f64 {
    -1.0 + 2.0 * i as f64 / (bins - 1) as f64
}

/// Bin of an intensity difference `diff ∈ [-255, 255]`, i.e. of `diff / 255`,
/// rounded half away from zero in exact integer arithmetic.
pub fn diff_bin(diff: i32, bins: usize) -> usize {
    debug_assert!((-255..=255).contains(&diff));
    let num = (diff + 255) as u64 * (bins as u64 - 1);
    // round(num / 510), num >= 0
    ((2 * num + 510) / 1020) as usize
}

/// History length in frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TemporalWindow {
    length: usize,
}

impl TemporalWindow {
    pub fn new(length: usize) -> Result<Self> {
        if length == 0 {
            return Err(Error::InvalidArgument(
                "temporal window must be at least 1 frame".into(),
            ));
        }
        Ok(Self { length })
    }

    pub fn length(&self) -> usize {
        self.length
    }
}

impl Default for TemporalWindow {
    fn default() -> Self {
        Self {
            length: DEFAULT_WINDOW,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Background,
    Foreground,
}

impl Label {
    pub fn index(self) -> usize {
        match self {
            Label::Background => 0,
            Label::Foreground => 1,
        }
    }

    pub fn from_bool(foreground: bool) -> Self {
        if foreground {
            Label::Foreground
        } else {
            Label::Background
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PixelSample {
    pub histogram: Histogram,
    pub label: Option<Label>,
    pub x: usize,
    pub y: usize,
    pub t: usize,
}

/// The current frame and its `L` predecessors, luminance only.
/// `frames[0]` is frame `t - L`, the last entry is frame `t`.
pub(crate) struct HistoryStack {
    pub frames: Vec<Frame>,
}

impl HistoryStack {
    pub fn load<S: FrameSource + ?Sized>(
        src: &S,
        t: usize,
        window: TemporalWindow,
    ) -> Result<Self> {
        let l = window.length();
        if t >= src.frame_count() {
            return Err(Error::IndexOutOfRange {
                index: t,
                len: src.frame_count(),
            });
        }
        if t < l {
            return Err(Error::InsufficientHistory { t, window: l });
        }
        let frames = (t - l..=t)
            .map(|i| src.luma_frame(i))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { frames })
    }

    pub fn current(&self) -> &Frame {
        self.frames.last().expect("history holds at least two frames")
    }

    pub fn history(&self) -> &[Frame] {
        &self.frames[..self.frames.len() - 1]
    }

    /// Per-bin difference counts for pixel `offset` (row-major index).
    pub fn counts_into(&self, offset: usize, bins: usize, counts: &mut [u32]) {
        let current = self.current().data()[offset] as i32;
        for frame in self.history() {
            let diff = current - frame.data()[offset] as i32;
            counts[diff_bin(diff, bins)] += 1;
        }
    }

    pub fn histogram(&self, offset: usize, bins: usize) -> Histogram {
        let mut counts = vec![0u32; bins];
        self.counts_into(offset, bins, &mut counts);
        counts_to_histogram(&counts, self.history().len())
    }
}

fn counts_to_histogram(counts: &[u32], total: usize) -> Histogram {
    let total = total as f64;
    Histogram {
        bins: counts.iter().map(|&c| c as f64 / total).collect(),
    }
}

/// Histogram of `(I_t(p) - I_{t-i}(p)) / 255` for `i = 1..=L`.
pub fn diff_histogram<S: FrameSource + ?Sized>(
    src: &S,
    pixel: (usize, usize),
    t: usize,
    window: TemporalWindow,
    bins: usize,
) -> Result<Histogram> {
    validate_bins(bins)?;
    let (width, height) = src.dims();
    let (x, y) = pixel;
    if x >= width || y >= height {
        return Err(Error::OutOfBounds {
            x,
            y,
            width,
            height,
        });
    }
    let stack = HistoryStack::load(src, t, window)?;
    Ok(stack.histogram(y * width + x, bins))
}

/// One histogram per pixel of frame `t`, row-major.
#[derive(Debug, Clone)]
pub struct HistogramGrid {
    width: usize,
    height: usize,
    histograms: Vec<Histogram>,
}

impl HistogramGrid {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> &Histogram {
        &self.histograms[y * self.width + x]
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), &Histogram)> {
        let w = self.width;
        self.histograms
            .iter()
            .enumerate()
            .map(move |(i, h)| ((i % w, i / w), h))
    }

    /// Debug dump: one `x y b0 b1 ... b{B-1}` line per pixel.
    pub fn to_dump(&self) -> String {
        let mut out = String::new();
        for ((x, y), h) in self.iter() {
            write!(out, "{x} {y}").unwrap();
            for v in h.bins() {
                write!(out, " {v}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn write_dump(&self, path: impl AsRef<Path>) -> Result<()> {
        write_bytes(path.as_ref(), self.to_dump().as_bytes())
    }
}

/// Parse a dump written by [`HistogramGrid::to_dump`] into `(x, y, histogram)` records.
pub fn parse_histogram_dump(text: &str) -> Result<Vec<(usize, usize, Histogram)>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, line)| {
            let mut it = line.split_whitespace();
            let parse_err = || Error::Parse(format!("histogram dump line {}", n + 1));
            let x = it.next().and_then(|s| s.parse().ok()).ok_or_else(parse_err)?;
            let y = it.next().and_then(|s| s.parse().ok()).ok_or_else(parse_err)?;
            let bins = it
                .map(|s| s.parse::<f64>().map_err(|_| parse_err()))
                .collect::<Result<Vec<_>>>()?;
            Ok((x, y, Histogram::from_bins(bins)?))
        })
        .collect()
}

/// Batch form of [`diff_histogram`] over every pixel of frame `t`.
pub fn infer_histograms<S: FrameSource + ?Sized>(
    src: &S,
    t: usize,
    window: TemporalWindow,
    bins: usize,
) -> Result<HistogramGrid> {
    validate_bins(bins)?;
    let (width, height) = src.dims();
    let stack = HistoryStack::load(src, t, window)?;
    let histograms = (0..width * height)
        .map(|offset| stack.histogram(offset, bins))
        .collect();
    Ok(HistogramGrid {
        width,
        height,
        histograms,
    })
}

#[derive(Debug, Clone)]
pub struct SampleSet {
    pub samples: Vec<PixelSample>,
    /// Fewer foreground pixels than half the request were available, so the
    /// set is as balanced as possible rather than 50/50.
    pub insufficient_foreground: bool,
}

/// Draw `n` labeled training pixels, half foreground and half background
/// where the ground truth allows. `labeled` pairs frame indices with their
/// ground-truth masks; frames with `t < L` are ignored.
pub fn sample_training_set<S: FrameSource + ?Sized>(
    src: &S,
    labeled: &[(usize, BinaryMask)],
    n: usize,
    seed: u64,
    window: TemporalWindow,
    bins: usize,
) -> Result<SampleSet> {
    validate_bins(bins)?;
    let (width, height) = src.dims();
    let mut eligible: Vec<&(usize, BinaryMask)> = labeled
        .iter()
        .filter(|(t, _)| *t >= window.length() && *t < src.frame_count())
        .collect();
    if eligible.is_empty() {
        return Err(Error::NoEligibleFrames);
    }
    eligible.sort_by_key(|(t, _)| *t);
    for (t, mask) in &eligible {
        if (mask.width(), mask.height()) != (width, height) {
            return Err(Error::DimensionMismatch(format!(
                "ground truth for frame {t} is {}x{}, frames are {width}x{height}",
                mask.width(),
                mask.height()
            )));
        }
    }

    // candidates as (eligible index, pixel offset)
    let mut fg = Vec::new();
    let mut bg = Vec::new();
    for (k, (_, mask)) in eligible.iter().enumerate() {
        for (offset, &label) in mask.labels().iter().enumerate() {
            if label {
                fg.push((k, offset));
            } else {
                bg.push((k, offset));
            }
        }
    }

    let want_fg = n / 2;
    let mut take_fg = want_fg.min(fg.len());
    let take_bg = (n - take_fg).min(bg.len());
    // background ran short: top up with foreground
    take_fg = (n - take_bg).min(fg.len()).max(take_fg);
    let insufficient_foreground = take_fg < want_fg;
    if insufficient_foreground {
        log::warn!(
            target: "sample",
            "only {} foreground pixels available for {} requested; using {} background",
            fg.len(),
            want_fg,
            take_bg
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<(usize, usize, Label)> = Vec::with_capacity(take_fg + take_bg);
    for (pool, take, label) in [
        (&fg, take_fg, Label::Foreground),
        (&bg, take_bg, Label::Background),
    ] {
        let mut picks: Vec<usize> = index::sample(&mut rng, pool.len(), take).into_vec();
        picks.sort_unstable();
        chosen.extend(picks.into_iter().map(|i| (pool[i].0, pool[i].1, label)));
    }

    let mut samples: Vec<Option<PixelSample>> = vec![None; chosen.len()];
    for (k, (t, _)) in eligible.iter().enumerate() {
        let members: Vec<usize> = (0..chosen.len()).filter(|&i| chosen[i].0 == k).collect();
        if members.is_empty() {
            continue;
        }
        let stack = HistoryStack::load(src, *t, window)?;
        for i in members {
            let (_, offset, label) = chosen[i];
            samples[i] = Some(PixelSample {
                histogram: stack.histogram(offset, bins),
                label: Some(label),
                x: offset % width,
                y: offset / width,
                t: *t,
            });
        }
    }
    Ok(SampleSet {
        samples: samples.into_iter().map(|s| s.expect("filled")).collect(),
        insufficient_foreground,
    })
}
