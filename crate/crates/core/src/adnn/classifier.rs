//! Two-layer classifier head: linear, ReLU, linear, softmax over
//! (background, foreground).

use crate::error::{Error, Result};
use crate::histogram::Label;

/// Class probabilities; always sums to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probs {
    pub background: f64,
    pub foreground: f64,
}

impl Probs {
    pub fn of(&self, label: Label) -> f64 {
        match label {
            Label::Background => self.background,
            Label::Foreground => self.foreground,
        }
    }
}

pub fn softmax2(logits: [f64; 2]) -> Probs {
    let m = logits[0].max(logits[1]);
    let e0 = (logits[0] - m).exp();
    let e1 = (logits[1] - m).exp();
    let s = e0 + e1;
    Probs {
        background: e0 / s,
        foreground: e1 / s,
    }
}

pub const PROB_FLOOR: f64 = 1e-12;

/// `-ln p[label]`, with the probability floored at 1e-12.
pub fn cross_entropy(probs: Probs, label: Label) -> f64 {
    -probs.of(label).max(PROB_FLOOR).ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub(crate) input_dim: usize,
    pub(crate) hidden: usize,
    /// `hidden x input_dim`, row-major
    pub(crate) w1: Vec<f64>,
    pub(crate) b1: Vec<f64>,
    /// `2 x hidden`, row-major
    pub(crate) w2: Vec<f64>,
    pub(crate) b2: [f64; 2],
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ClassifierCache {
    pub pre_activation: Vec<f64>,
    pub hidden: Vec<f64>,
    pub logits: [f64; 2],
    pub probs: Probs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierGrads {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: [f64; 2],
}

impl ClassifierGrads {
    pub fn zeros_like(c: &Classifier) -> Self {
        Self {
            w1: vec![0.0; c.w1.len()],
            b1: vec![0.0; c.b1.len()],
            w2: vec![0.0; c.w2.len()],
            b2: [0.0; 2],
        }
    }
}

impl Classifier {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        Self {
            input_dim,
            hidden,
            w1: vec![0.0; hidden * input_dim],
            b1: vec![0.0; hidden],
            w2: vec![0.0; 2 * hidden],
            b2: [0.0; 2],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn w1(&self) -> &[f64] {
        &self.w1
    }

    pub fn b1(&self) -> &[f64] {
        &self.b1
    }

    pub fn w2(&self) -> &[f64] {
        &self.w2
    }

    pub fn b2(&self) -> [f64; 2] {
        self.b2
    }

    pub fn set_output_bias(&mut self, b2: [f64; 2]) {
        self.b2 = b2;
    }

    pub fn logits_from_hidden(&self, hidden: &[f64]) -> [f64; 2] {
        let h = self.hidden;
        let mut logits = self.b2;
        for (k, logit) in logits.iter_mut().enumerate() {
            *logit += dot(&self.w2[k * h..(k + 1) * h], hidden);
        }
        logits
    }

    pub fn forward(&self, input: &[f64]) -> Result<ClassifierCache> {
        if input.len() != self.input_dim {
            return Err(Error::SizeMismatch(format!(
                "classifier expects {} inputs, got {}",
                self.input_dim,
                input.len()
            )));
        }
        let n = self.input_dim;
        let pre_activation: Vec<f64> = self
            .b1
            .iter()
            .enumerate()
            .map(|(r, &b)| b + dot(&self.w1[r * n..(r + 1) * n], input))
            .collect();
        let hidden: Vec<f64> = pre_activation.iter().map(|&z| z.max(0.0)).collect();
        let logits = self.logits_from_hidden(&hidden);
        Ok(ClassifierCache {
            pre_activation,
            hidden,
            logits,
            probs: softmax2(logits),
        })
    }

    /// Accumulate parameter gradients for upstream logit gradient `d_logits`
    /// into `grads` and return the gradient with respect to the input.
    pub fn backward(
        &self,
        input: &[f64],
        cache: &ClassifierCache,
        d_logits: [f64; 2],
        grads: &mut ClassifierGrads,
        want_input_grad: bool,
    ) -> Vec<f64> {
        let (n, h) = (self.input_dim, self.hidden);
        for k in 0..2 {
            grads.b2[k] += d_logits[k];
            for (g, &hv) in grads.w2[k * h..(k + 1) * h].iter_mut().zip(&cache.hidden) {
                *g += d_logits[k] * hv;
            }
        }
        let mut d_input = if want_input_grad {
            vec![0.0; n]
        } else {
            Vec::new()
        };
        for r in 0..h {
            if cache.pre_activation[r] <= 0.0 {
                continue;
            }
            let dz = d_logits[0] * self.w2[r] + d_logits[1] * self.w2[h + r];
            if dz == 0.0 {
                continue;
            }
            grads.b1[r] += dz;
            let row = &self.w1[r * n..(r + 1) * n];
            for (g, &x) in grads.w1[r * n..(r + 1) * n].iter_mut().zip(input) {
                *g += dz * x;
            }
            if want_input_grad {
                for (d, &w) in d_input.iter_mut().zip(row) {
                    *d += dz * w;
                }
            }
        }
        d_input
    }

    pub(crate) fn params_mut(&mut self) -> [&mut [f64]; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }
}

/// Logit gradient of the cross-entropy loss: `p - onehot(label)`.
pub fn cross_entropy_logit_grad(probs: Probs, label: Label) -> [f64; 2] {
    let mut g = [probs.background, probs.foreground];
    g[label.index()] -= 1.0;
    g
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_head_is_uniform() {
        let c = Classifier::zeros(6, 3);
        let p = c.forward(&[0.3, 0.1, 0.0, 0.2, 0.2, 0.2]).unwrap().probs;
        assert_eq!((p.background, p.foreground), (0.5, 0.5));
    }

    #[test]
    fn softmax_values() {
        for z in [-30.0, 0.0, 2.5, 700.0] {
            let p = softmax2([z, z]);
            assert_eq!((p.background, p.foreground), (0.5, 0.5));
        }
        let p = softmax2([0.0, 3f64.ln()]);
        assert!((p.background - 0.25).abs() < 1e-15);
        assert!((p.foreground - 0.75).abs() < 1e-15);
        let p = softmax2([0.3, -1.7]);
        assert!((p.background + p.foreground - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_values() {
        let half = Probs {
            background: 0.5,
            foreground: 0.5,
        };
        for l in [Label::Background, Label::Foreground] {
            assert!((cross_entropy(half, l) - std::f64::consts::LN_2).abs() < 1e-15);
        }
        let sure = Probs {
            background: 1.0 - 1e-12,
            foreground: 1e-12,
        };
        assert!(cross_entropy(sure, Label::Background) < 1e-11);
        assert!((cross_entropy(sure, Label::Foreground) - 27.631021115928547).abs() < 1e-9);
        let p = Probs {
            background: 0.25,
            foreground: 0.75,
        };
        assert!((cross_entropy(p, Label::Foreground) - 0.287682072451781).abs() < 1e-12);
        let zero = Probs {
            background: 1.0,
            foreground: 0.0,
        };
        assert!(cross_entropy(zero, Label::Foreground).is_finite());
    }

    #[test]
    fn wrong_input_size() {
        let c = Classifier::zeros(6, 3);
        assert!(matches!(c.forward(&[0.0; 5]), Err(Error::SizeMismatch(_))));
    }
}
