//! Synthetic surveillance scenes and MIL bags.
//!
//! Scenes are a static textured background with one bright square and
//! per-frame Gaussian sensor noise. Ground truth marks the square only on
//! frames where it has moved since the previous frame.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::frame_io::{frame_file_name, write_mask, write_sequence, Frame, MemorySequence};
use crate::mask::BinaryMask;
use crate::mil::{video_features, Bag, Polarity, SegmentFeatures, DEFAULT_SEGMENTS};

pub const SQUARE_LEVEL: u8 = 210;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Motion {
    /// 1 px per frame around a rectangular loop for the whole sequence.
    Loop,
    /// Parked, then moving with a speed between 1 and 3 px per frame during
    /// `start..end`, then parked again.
    Burst { start: usize, end: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub square: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    pub motion: Motion,
}

impl SceneSpec {
    /// 64x64, 8x8 square looping at 1 px per frame, 300 frames.
    pub fn looping() -> Self {
        Self {
            width: 64,
            height: 64,
            frames: 300,
            square: 8,
            noise_sigma: 5.0,
            seed: 1,
            motion: Motion::Loop,
        }
    }

    /// 64x64, 16x16 square moving only during the middle third.
    pub fn burst(frames: usize) -> Self {
        Self {
            width: 64,
            height: 64,
            frames,
            square: 16,
            noise_sigma: 5.0,
            seed: 2,
            motion: Motion::Burst {
                start: frames / 3,
                end: 2 * frames / 3,
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub frames: Vec<Frame>,
    pub truth: Vec<BinaryMask>,
    /// Top-left corner of the square per frame.
    pub positions: Vec<(usize, usize)>,
}

impl SyntheticScene {
    pub fn sequence(&self) -> MemorySequence {
        MemorySequence::new(self.frames.clone()).expect("scene frames share one size")
    }

    /// Frames where the ground truth marks motion.
    pub fn moving(&self, t: usize) -> bool {
        self.truth[t].foreground_count() > 0
    }
}

/// Smooth texture in [30, 130].
pub fn background(width: usize, height: usize) -> Vec<f64> {
    (0..width * height)
        .map(|i| {
            let (x, y) = ((i % width) as f64, (i / width) as f64);
            80.0 + 35.0 * (x / 5.0).sin() * (y / 7.0).cos() + 15.0 * ((x + 2.0 * y) / 11.0).sin()
        })
        .collect()
}

/// Point at arc length `d` along the square loop with corners `lo` and `hi`.
fn loop_point(d: f64, lo: usize, hi: usize) -> (usize, usize) {
    let side = (hi - lo) as f64;
    let d = d.rem_euclid(4.0 * side);
    let (x, y) = if d < side {
        (d, 0.0)
    } else if d < 2.0 * side {
        (side, d - side)
    } else if d < 3.0 * side {
        (3.0 * side - d, side)
    } else {
        (0.0, 4.0 * side - d)
    };
    (lo + x.round() as usize, lo + y.round() as usize)
}

fn positions(spec: &SceneSpec) -> Vec<(usize, usize)> {
    let margin = spec.square.min(8) / 2 + 4;
    let lo = margin;
    let hi = spec.width.min(spec.height) - spec.square - margin;
    match spec.motion {
        Motion::Loop => (0..spec.frames).map(|t| loop_point(t as f64, lo, hi)).collect(),
        Motion::Burst { start, end } => {
            let mut d = 0.0;
            (0..spec.frames)
                .map(|t| {
                    if (start..end).contains(&t) {
                        d += burst_speed(t - start);
                    }
                    loop_point(d, lo, hi)
                })
                .collect()
        }
    }
}

/// Speed profile of a burst: two slow/fast cycles per 100 frames.
pub fn burst_speed(k: usize) -> f64 {
    2.0 + (2.0 * PI * k as f64 / 50.0).sin()
}

fn render(
    bg: &[f64],
    spec: &SceneSpec,
    pos: (usize, usize),
    normal: &Normal<f64>,
    rng: &mut ChaCha8Rng,
) -> Frame {
    let w = spec.width;
    let data = bg
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            let (x, y) = (i % w, i / w);
            let inside = (pos.0..pos.0 + spec.square).contains(&x) && (pos.1..pos.1 + spec.square).contains(&y);
            let base = if inside { SQUARE_LEVEL as f64 } else { b };
            (base + normal.sample(rng)).round().clamp(0.0, 255.0) as u8
        })
        .collect();
    Frame::gray(w, spec.height, data).expect("frame size matches")
}

fn footprint(spec: &SceneSpec, pos: (usize, usize)) -> BinaryMask {
    let mut m = BinaryMask::filled(spec.width, spec.height, false);
    for y in pos.1..pos.1 + spec.square {
        for x in pos.0..pos.0 + spec.square {
            m.set(x, y, true);
        }
    }
    m
}

pub fn generate_scene(spec: &SceneSpec) -> Result<SyntheticScene> {
    if spec.frames < 2 || spec.square + 16 > spec.width.min(spec.height) {
        return Err(Error::InvalidArgument(format!(
            "scene {}x{} with {} frames cannot hold a {}px square",
            spec.width, spec.height, spec.frames, spec.square
        )));
    }
    let normal = Normal::new(0.0, spec.noise_sigma)
        .map_err(|e| Error::InvalidArgument(format!("noise sigma: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let bg = background(spec.width, spec.height);
    let positions = positions(spec);
    let frames = positions
        .iter()
        .map(|&p| render(&bg, spec, p, &normal, &mut rng))
        .collect();
    let truth = (0..spec.frames)
        .map(|t| {
            let other = if t == 0 { positions[1] } else { positions[t - 1] };
            if positions[t] != other {
                footprint(spec, positions[t])
            } else {
                BinaryMask::filled(spec.width, spec.height, false)
            }
        })
        .collect();
    Ok(SyntheticScene {
        frames,
        truth,
        positions,
    })
}

/// Gaussian feature bags: every segment is standard normal; positive bags
/// have `anomalous` consecutive segments shifted by `shift` in every dimension.
pub fn gaussian_bags(
    positives: usize,
    negatives: usize,
    segments: usize,
    dims: usize,
    anomalous: usize,
    shift: f64,
    seed: u64,
) -> Vec<Bag> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut bag = |positive: bool| {
        let start = rng.random_range(0..=segments - anomalous);
        let rows = (0..segments)
            .map(|s| {
                let bump = if positive && (start..start + anomalous).contains(&s) { shift } else { 0.0 };
                (0..dims).map(|_| normal.sample(&mut rng) + bump).collect()
            })
            .collect();
        Bag {
            features: SegmentFeatures::new(rows).expect("finite rows"),
            polarity: if positive { Polarity::Positive } else { Polarity::Negative },
        }
    };
    let mut out: Vec<Bag> = (0..positives).map(|_| bag(true)).collect();
    out.extend((0..negatives).map(|_| bag(false)));
    out
}

/// Bags built from short synthetic videos with the built-in descriptor.
/// Positive videos contain a fast burst of motion; negative videos hold
/// the square still or drift it slowly. The noise level varies per video.
pub fn motion_bags(positives: usize, negatives: usize, seed: u64) -> Result<Vec<Bag>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(positives + negatives);
    for k in 0..positives + negatives {
        let positive = k < positives;
        let frames = rng.random_range(3..=10) * DEFAULT_SEGMENTS;
        let spec = SceneSpec {
            frames,
            seed: rng.random(),
            ..SceneSpec::burst(frames)
        };
        let bg = background(spec.width, spec.height);
        let (lo, hi) = (8usize, spec.width - spec.square - 8);
        let burst_len = rng.random_range(frames / 8..=frames / 3);
        let burst_start = rng.random_range(0..frames - burst_len);
        let slow = if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.05..0.3) };
        let fast = rng.random_range(1.0..3.5);
        let mut d = rng.random_range(0.0..160.0);
        let sigma = rng.random_range(2.0..8.0);
        let normal = Normal::new(0.0, sigma).expect("noise");
        let mut noise_rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let seq: Vec<Frame> = (0..frames)
            .map(|t| {
                let in_burst = positive && (burst_start..burst_start + burst_len).contains(&t);
                d += if in_burst { fast } else { slow };
                render(&bg, &spec, loop_point(d, lo, hi), &normal, &mut noise_rng)
            })
            .collect();
        let seq = MemorySequence::new(seq)?;
        out.push(Bag {
            features: video_features(&seq, DEFAULT_SEGMENTS, None)?,
            polarity: if positive { Polarity::Positive } else { Polarity::Negative },
        });
    }
    Ok(out)
}

/// Frames used as labeled ground truth for a burst scene: spread across the
/// static and moving parts, avoiding the first frames after the square
/// stops.
pub fn labeled_frames(spec: &SceneSpec, window: usize, count: usize) -> Vec<usize> {
    let n = spec.frames;
    let candidates: Vec<usize> = match spec.motion {
        Motion::Loop => (window..n).collect(),
        Motion::Burst { start, end } => (window..n)
            .filter(|&t| !(end..end + window).contains(&t))
            .filter(|&t| t < start || t > start + 1)
            .collect(),
    };
    if candidates.is_empty() || count == 0 {
        return Vec::new();
    }
    let count = count.min(candidates.len());
    (0..count)
        .map(|i| candidates[i * (candidates.len() - 1) / (count.max(2) - 1).max(1)])
        .collect()
}

/// Write a complete demo input tree: `frames/`, `truth/` (labeled frames
/// only), `bags/` and `pipeline.conf`.
pub fn write_demo(dir: impl AsRef<Path>, frames: usize, window: usize, seed: u64) -> Result<SceneSpec> {
    let dir = dir.as_ref();
    let spec = SceneSpec {
        seed,
        ..SceneSpec::burst(frames)
    };
    let scene = generate_scene(&spec)?;
    write_sequence(&scene.frames, dir.join("frames"))?;
    let truth_dir = dir.join("truth");
    fs::create_dir_all(&truth_dir).map_err(|e| Error::io(&truth_dir, e))?;
    for t in labeled_frames(&spec, window, 10) {
        write_mask(&scene.truth[t], truth_dir.join(frame_file_name(t, 1)))?;
    }
    let bags = motion_bags(64, 64, seed.wrapping_add(100))?;
    crate::mil::write_bags(&bags, dir.join("bags"))?;
    let conf = dir.join("pipeline.conf");
    let text = format!(
        "# synthetic demo scene\n\
         paths.input = frames\n\
         paths.ground_truth = truth\n\
         paths.mil_bags = bags\n\
         paths.output = out\n\
         seed = {seed}\n\
         window.length = {window}\n"
    );
    fs::write(&conf, text).map_err(|e| Error::io(&conf, e))?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trim::foreground_ratio;

    #[test]
    fn loop_scene_never_revisits_within_window() {
        let spec = SceneSpec::looping();
        let scene = generate_scene(&spec).unwrap();
        assert_eq!(scene.frames.len(), 300);
        for t in 0..300 {
            assert!(scene.moving(t));
            for k in 1..=50.min(t) {
                assert_ne!(scene.positions[t], scene.positions[t - k]);
            }
        }
    }

    #[test]
    fn background_range_and_square_contrast() {
        let bg = background(64, 64);
        assert!(bg.iter().all(|&v| (30.0..=130.0).contains(&v)));
        let scene = generate_scene(&SceneSpec::looping()).unwrap();
        let (x, y) = scene.positions[0];
        assert!(scene.frames[0].luma(x + 3, y + 3) > 170);
    }

    #[test]
    fn burst_scene_moves_only_in_the_middle() {
        let spec = SceneSpec::burst(300);
        let scene = generate_scene(&spec).unwrap();
        for t in 0..300 {
            assert_eq!(scene.moving(t), (100..200).contains(&t), "frame {t}");
            if scene.moving(t) {
                assert!(foreground_ratio(&scene.truth[t]) >= 0.05);
            }
        }
    }

    #[test]
    fn scenes_are_reproducible() {
        let a = generate_scene(&SceneSpec::burst(90)).unwrap();
        let b = generate_scene(&SceneSpec::burst(90)).unwrap();
        assert_eq!(a.frames, b.frames);
    }

    #[test]
    fn gaussian_bag_shapes() {
        let bags = gaussian_bags(3, 2, 32, 20, 4, 3.0, 0);
        assert_eq!(bags.len(), 5);
        assert_eq!(bags.iter().filter(|b| b.polarity == Polarity::Positive).count(), 3);
        assert!(bags.iter().all(|b| b.features.segments() == 32 && b.features.dims() == 20));
    }

    #[test]
    fn labeled_frames_skip_the_stop() {
        let spec = SceneSpec::burst(300);
        let l = labeled_frames(&spec, 50, 10);
        assert_eq!(l.len(), 10);
        assert!(l.iter().all(|&t| t >= 50 && !(200..250).contains(&t)));
    }
}
