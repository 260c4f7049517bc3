//! Iterative mask refinement from Gaussian-weighted neighbourhood evidence.
//!
//! Each neighbour `q` of `p` votes for its current label with weight
//! `exp(-(I(p) - I(q))^2 / 2σc^2) * exp(-|p - q|^2 / 2σs^2)`. A pixel becomes
//! foreground iff the foreground vote strictly exceeds the background vote.
//! All pixels are updated from the previous iteration's mask.

use crate::error::{Error, Result};
use crate::frame_io::{to_luminance, Frame};
use crate::mask::BinaryMask;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineParams {
    pub sigma_spatial: f64,
    pub sigma_color: f64,
    pub radius: usize,
    pub max_iters: usize,
    pub min_flips: usize,
}

impl Default for RefineParams {
    fn default() -> Self {
        Self {
            sigma_spatial: 3.0,
            sigma_color: 15.0,
            radius: 5,
            max_iters: 5,
            min_flips: 10,
        }
    }
}

impl RefineParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_spatial > 0.0 && self.sigma_color > 0.0) {
            return Err(Error::InvalidArgument("refinement sigmas must be positive".into()));
        }
        if self.radius == 0 || self.max_iters == 0 {
            return Err(Error::InvalidArgument(
                "refinement radius and max_iters must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineOutcome {
    pub mask: BinaryMask,
    pub iterations: usize,
    /// Labels changed by each iteration.
    pub flips: Vec<usize>,
}

struct Weights {
    radius: isize,
    spatial: Vec<f64>,
    color: [f64; 256],
}

impl Weights {
    fn new(params: &RefineParams) -> Self {
        let r = params.radius as isize;
        let side = (2 * r + 1) as usize;
        let mut spatial = vec![0.0; side * side];
        let two_ss = 2.0 * params.sigma_spatial * params.sigma_spatial;
        for dy in -r..=r {
            for dx in -r..=r {
                let d2 = (dx * dx + dy * dy) as f64;
                spatial[((dy + r) as usize) * side + (dx + r) as usize] = (-d2 / two_ss).exp();
            }
        }
        let two_cc = 2.0 * params.sigma_color * params.sigma_color;
        let mut color = [0.0; 256];
        for (d, c) in color.iter_mut().enumerate() {
            *c = (-((d * d) as f64) / two_cc).exp();
        }
        Self {
            radius: r,
            spatial,
            color,
        }
    }
}

/// Foreground and background votes at every pixel for the given mask.
pub fn evidence(mask: &BinaryMask, frame: &Frame, params: &RefineParams) -> Result<Vec<(f64, f64)>> {
    check_dims(mask, frame)?;
    params.validate()?;
    let luma = to_luminance(frame);
    Ok(evidence_with(mask, &luma, &Weights::new(params)))
}

fn evidence_with(mask: &BinaryMask, luma: &Frame, weights: &Weights) -> Vec<(f64, f64)> {
    let (w, h) = (mask.width() as isize, mask.height() as isize);
    let r = weights.radius;
    let side = (2 * r + 1) as usize;
    let data = luma.data();
    let labels = mask.labels();
    let mut out = Vec::with_capacity((w * h) as usize);
    for y in 0..h {
        for x in 0..w {
            let ip = data[(y * w + x) as usize] as i32;
            let (mut fg, mut bg) = (0.0, 0.0);
            for qy in (y - r).max(0)..=(y + r).min(h - 1) {
                let srow = ((qy - y + r) as usize) * side;
                for qx in (x - r).max(0)..=(x + r).min(w - 1) {
                    if qx == x && qy == y {
                        continue;
                    }
                    let q = (qy * w + qx) as usize;
                    let g = weights.color[(ip - data[q] as i32).unsigned_abs() as usize]
                        * weights.spatial[srow + (qx - x + r) as usize];
                    if labels[q] {
                        fg += g;
                    } else {
                        bg += g;
                    }
                }
            }
            out.push((fg, bg));
        }
    }
    out
}

fn check_dims(mask: &BinaryMask, frame: &Frame) -> Result<()> {
    if (mask.width(), mask.height()) != (frame.width(), frame.height()) {
        return Err(Error::DimensionMismatch(format!(
            "mask is {}x{}, frame is {}x{}",
            mask.width(),
            mask.height(),
            frame.width(),
            frame.height()
        )));
    }
    Ok(())
}

/// One synchronous relabelling pass.
pub fn refine_step(mask: &BinaryMask, frame: &Frame, params: &RefineParams) -> Result<BinaryMask> {
    let ev = evidence(mask, frame, params)?;
    let labels = ev.into_iter().map(|(fg, bg)| fg > bg).collect();
    BinaryMask::new(mask.width(), mask.height(), labels)
}

/// Refine until an iteration flips fewer than `min_flips` labels or
/// `max_iters` is reached.
pub fn refine_detailed(
    mask: &BinaryMask,
    frame: &Frame,
    params: &RefineParams,
) -> Result<RefineOutcome> {
    check_dims(mask, frame)?;
    params.validate()?;
    let luma = to_luminance(frame);
    let weights = Weights::new(params);
    let mut current = mask.clone();
    let mut flips = Vec::new();
    for _ in 0..params.max_iters {
        let labels = evidence_with(&current, &luma, &weights)
            .into_iter()
            .map(|(fg, bg)| fg > bg)
            .collect();
        let next = BinaryMask::new(current.width(), current.height(), labels)?;
        let changed = next.diff_count(&current);
        flips.push(changed);
        current = next;
        if changed < params.min_flips {
            break;
        }
    }
    Ok(RefineOutcome {
        mask: current,
        iterations: flips.len(),
        flips,
    })
}

pub fn refine(mask: &BinaryMask, frame: &Frame, params: &RefineParams) -> Result<BinaryMask> {
    Ok(refine_detailed(mask, frame, params)?.mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(w: usize, h: usize, v: u8) -> Frame {
        Frame::gray(w, h, vec![v; w * h]).unwrap()
    }

    #[test]
    fn all_foreground_on_uniform_image_is_fixed() {
        let mask = BinaryMask::filled(9, 7, true);
        let out = refine(&mask, &uniform(9, 7, 80), &RefineParams::default()).unwrap();
        assert_eq!(out, mask);
    }

    #[test]
    fn empty_mask_converges_in_one_iteration() {
        let mask = BinaryMask::filled(9, 7, false);
        let out = refine_detailed(&mask, &uniform(9, 7, 80), &RefineParams::default()).unwrap();
        assert_eq!(out.mask, mask);
        assert_eq!(out.iterations, 1);
        assert_eq!(out.flips, vec![0]);
    }

    #[test]
    fn isolated_pixel_is_removed_in_one_pass() {
        let mut mask = BinaryMask::filled(11, 11, false);
        mask.set(5, 5, true);
        let frame = uniform(11, 11, 120);
        let ev = evidence(&mask, &frame, &RefineParams::default()).unwrap();
        let (fg, bg) = ev[5 * 11 + 5];
        assert_eq!(fg, 0.0);
        assert!(bg > 0.0);
        let step = refine_step(&mask, &frame, &RefineParams::default()).unwrap();
        assert_eq!(step.foreground_count(), 0);
    }

    #[test]
    fn ties_go_to_background() {
        // 1x2: each pixel sees only the other, so the vote is one-sided
        let mask = BinaryMask::new(2, 1, vec![true, false]).unwrap();
        let out = refine_step(&mask, &uniform(2, 1, 0), &RefineParams::default()).unwrap();
        assert_eq!(out.labels(), &[false, true]);
        // single pixel: no neighbours, zero evidence both ways
        let out = refine_step(
            &BinaryMask::filled(1, 1, true),
            &uniform(1, 1, 0),
            &RefineParams::default(),
        )
        .unwrap();
        assert_eq!(out.labels(), &[false]);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            refine(
                &BinaryMask::filled(3, 3, false),
                &uniform(4, 3, 0),
                &RefineParams::default()
            ),
            Err(Error::DimensionMismatch(_))
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn case() -> impl Strategy<Value = (usize, usize, Vec<bool>, Vec<u8>)> {
            (2usize..12, 2usize..12).prop_flat_map(|(w, h)| {
                (
                    Just(w),
                    Just(h),
                    prop::collection::vec(any::<bool>(), w * h),
                    prop::collection::vec(any::<u8>(), w * h),
                )
            })
        }

        proptest! {
            #[test]
            fn fixpoint_stays_fixed((w, h, labels, pixels) in case()) {
                let params = RefineParams { min_flips: 1, max_iters: 50, ..RefineParams::default() };
                let frame = Frame::gray(w, h, pixels).unwrap();
                let mask = BinaryMask::new(w, h, labels).unwrap();
                let out = refine_detailed(&mask, &frame, &params).unwrap();
                if *out.flips.last().unwrap() == 0 {
                    let again = refine_step(&out.mask, &frame, &params).unwrap();
                    prop_assert_eq!(again, out.mask);
                }
            }

            #[test]
            fn decisions_ignore_weight_scale((w, h, labels, pixels) in case(), scale in 0.001f64..1000.0) {
                let frame = Frame::gray(w, h, pixels).unwrap();
                let mask = BinaryMask::new(w, h, labels).unwrap();
                let ev = evidence(&mask, &frame, &RefineParams::default()).unwrap();
                for (fg, bg) in ev {
                    let margin = (fg - bg).abs();
                    if margin > 1e-9 * (fg + bg) {
                        prop_assert_eq!(fg > bg, fg * scale > bg * scale);
                    }
                }
            }

            #[test]
            fn visiting_order_does_not_matter((w, h, labels, pixels) in case()) {
                // transposing the problem must transpose the answer
                let frame = Frame::gray(w, h, pixels.clone()).unwrap();
                let mask = BinaryMask::new(w, h, labels.clone()).unwrap();
                let out = refine_step(&mask, &frame, &RefineParams::default()).unwrap();
                let tp: Vec<u8> = (0..w * h).map(|i| pixels[(i % h) * w + i / h]).collect();
                let tl: Vec<bool> = (0..w * h).map(|i| labels[(i % h) * w + i / h]).collect();
                let out_t = refine_step(
                    &BinaryMask::new(h, w, tl).unwrap(),
                    &Frame::gray(h, w, tp).unwrap(),
                    &RefineParams::default(),
                ).unwrap();
                for y in 0..h {
                    for x in 0..w {
                        prop_assert_eq!(out.get(x, y), out_t.get(y, x));
                    }
                }
            }
        }
    }
}
