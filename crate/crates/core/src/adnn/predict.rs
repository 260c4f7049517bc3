//! Frozen-model inference over whole frames.
//!
//! The distribution layers and the first classifier layer are all linear in
//! the input histogram, so for a trained model they fold into one
//! `B x H` table: row `i` is the hidden pre-activation contributed by unit
//! mass in input bin `i`. A pixel then costs `nnz(histogram) x H`
//! multiply-adds instead of a full forward pass.

use super::classifier::{softmax2, Probs};
use super::model::AdnnModel;
use crate::error::{Error, Result};
use crate::frame_io::FrameSource;
use crate::histogram::{diff_bin, Histogram, HistoryStack, TemporalWindow};
use crate::mask::BinaryMask;

#[derive(Debug, Clone)]
pub struct InferencePlan {
    bins: usize,
    hidden: usize,
    /// `bins x hidden`, row-major
    folded: Vec<f64>,
    model: AdnnModel,
}

impl InferencePlan {
    pub fn new(model: &AdnnModel) -> Self {
        let b = model.bins();
        let cl = model.classifier();
        let (h, n) = (cl.hidden(), cl.input_dim());
        let mut folded = vec![0.0; b * h];
        for (channel, (kind, kernel)) in model.kernels().enumerate() {
            let base = channel * b;
            for i in 0..b {
                let row = &mut folded[i * h..(i + 1) * h];
                for (j, &wj) in kernel.weights().iter().enumerate() {
                    if wj == 0.0 {
                        continue;
                    }
                    let col = base + kind.target_bin(i, j, b);
                    for (r, acc) in row.iter_mut().enumerate() {
                        *acc += wj * cl.w1()[r * n + col];
                    }
                }
            }
        }
        Self {
            bins: b,
            hidden: h,
            folded,
            model: model.clone(),
        }
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn model(&self) -> &AdnnModel {
        &self.model
    }

    /// Probabilities from sparse `(bin, mass)` pairs.
    fn probs_sparse(&self, entries: impl Iterator<Item = (usize, f64)>, hidden: &mut [f64]) -> Probs {
        let h = self.hidden;
        hidden.copy_from_slice(self.model.classifier().b1());
        for (bin, mass) in entries {
            for (acc, &f) in hidden.iter_mut().zip(&self.folded[bin * h..(bin + 1) * h]) {
                *acc += mass * f;
            }
        }
        hidden.iter_mut().for_each(|z| *z = z.max(0.0));
        softmax2(self.model.classifier().logits_from_hidden(hidden))
    }

    pub fn probs(&self, x: &Histogram) -> Result<Probs> {
        if x.len() != self.bins {
            return Err(Error::SizeMismatch(format!(
                "plan has {} bins, histogram has {}",
                self.bins,
                x.len()
            )));
        }
        let mut hidden = vec![0.0; self.hidden];
        Ok(self.probs_sparse(
            x.bins()
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(i, &v)| (i, v)),
            &mut hidden,
        ))
    }

    /// Foreground probability of every pixel of the stack's current frame.
    pub(crate) fn foreground_map(&self, stack: &HistoryStack) -> Vec<f64> {
        let current = stack.current();
        let history = stack.history();
        let l = history.len() as f64;
        let n = current.width() * current.height();
        let mut counts = vec![0u32; self.bins];
        let mut touched = Vec::with_capacity(history.len());
        let mut hidden = vec![0.0; self.hidden];
        let mut out = Vec::with_capacity(n);
        for offset in 0..n {
            let cur = current.data()[offset] as i32;
            for frame in history {
                let bin = diff_bin(cur - frame.data()[offset] as i32, self.bins);
                if counts[bin] == 0 {
                    touched.push(bin);
                }
                counts[bin] += 1;
            }
            touched.sort_unstable();
            let p = self.probs_sparse(
                touched.iter().map(|&b| (b, counts[b] as f64 / l)),
                &mut hidden,
            );
            out.push(p.foreground);
            for &b in &touched {
                counts[b] = 0;
            }
            touched.clear();
        }
        out
    }

    pub fn predict_mask<S: FrameSource + ?Sized>(
        &self,
        src: &S,
        t: usize,
        window: TemporalWindow,
        threshold: f64,
    ) -> Result<BinaryMask> {
        let stack = HistoryStack::load(src, t, window)?;
        self.predict_stack(&stack, threshold)
    }

    pub(crate) fn predict_stack(&self, stack: &HistoryStack, threshold: f64) -> Result<BinaryMask> {
        let cur = stack.current();
        let labels = self
            .foreground_map(stack)
            .into_iter()
            .map(|p| p >= threshold)
            .collect();
        BinaryMask::new(cur.width(), cur.height(), labels)
    }
}

/// Foreground mask of frame `t`: a pixel is foreground iff `p_fg >= threshold`.
pub fn predict_mask<S: FrameSource + ?Sized>(
    src: &S,
    t: usize,
    model: &AdnnModel,
    window: TemporalWindow,
    threshold: f64,
) -> Result<BinaryMask> {
    InferencePlan::new(model).predict_mask(src, t, window, threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adnn::model::AdnnConfig;
    use crate::frame_io::{Frame, MemorySequence};
    use crate::histogram::infer_histograms;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_seq(n: usize, w: usize, h: usize, seed: u64) -> MemorySequence {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        MemorySequence::new(
            (0..n)
                .map(|_| Frame::gray(w, h, (0..w * h).map(|_| rng.random()).collect()).unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn cfg() -> AdnnConfig {
        AdnnConfig {
            bins: 21,
            sum_kernels: 2,
            product_kernels: 2,
            hidden: 6,
        }
    }

    #[test]
    fn folded_plan_matches_full_forward() {
        let model = AdnnModel::new(cfg(), 8).unwrap();
        let plan = InferencePlan::new(&model);
        let seq = random_seq(7, 5, 4, 1);
        let w = TemporalWindow::new(6).unwrap();
        let grid = infer_histograms(&seq, 6, w, 21).unwrap();
        let stack = HistoryStack::load(&seq, 6, w).unwrap();
        let fmap = plan.foreground_map(&stack);
        for ((x, y), h) in grid.iter() {
            let direct = model.forward(h).unwrap().foreground;
            assert!((plan.probs(h).unwrap().foreground - direct).abs() < 1e-12);
            assert!((fmap[y * 5 + x] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn biased_model_gives_empty_mask_and_zero_threshold_full_mask() {
        let mut model = AdnnModel::new(cfg(), 8).unwrap();
        model.classifier_mut().set_output_bias([100.0, -100.0]);
        let seq = random_seq(5, 4, 4, 2);
        let w = TemporalWindow::new(4).unwrap();
        let m = predict_mask(&seq, 4, &model, w, 0.5).unwrap();
        assert_eq!(m.foreground_count(), 0);
        let m = predict_mask(&seq, 4, &model, w, 0.0).unwrap();
        assert_eq!(m.foreground_count(), 16);
    }

    #[test]
    fn insufficient_history() {
        let model = AdnnModel::new(cfg(), 0).unwrap();
        let seq = random_seq(5, 4, 4, 2);
        assert!(matches!(
            predict_mask(&seq, 3, &model, TemporalWindow::new(4).unwrap(), 0.5),
            Err(Error::InsufficientHistory { .. })
        ));
    }
}
