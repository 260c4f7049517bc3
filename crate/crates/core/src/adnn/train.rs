use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::classifier::{cross_entropy, cross_entropy_logit_grad};
use super::model::{AdnnModel, ModelGrads};
use crate::error::{Error, Result};
use crate::histogram::PixelSample;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub momentum: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 30,
            batch_size: 32,
            seed: 0,
            momentum: 0.9,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be a finite non-negative number, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidArgument(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        Ok(())
    }
}

/// Mini-batch SGD with momentum on cross-entropy.
///
/// Samples are reshuffled every epoch from a generator seeded once with
/// `config.seed`. Gradients within a batch are summed in batch order and
/// averaged; the reported epoch loss sums per-sample losses in sample-index
/// order, so both are reproducible bit for bit.
pub fn train(
    mut model: AdnnModel,
    samples: &[PixelSample],
    config: &TrainConfig,
) -> Result<(AdnnModel, Vec<f64>)> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    let labels = samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            s.label
                .ok_or_else(|| Error::InvalidArgument(format!("sample {i} has no label")))
        })
        .collect::<Result<Vec<_>>>()?;
    for (i, s) in samples.iter().enumerate() {
        if s.histogram.len() != model.bins() {
            return Err(Error::SizeMismatch(format!(
                "sample {i} has {} bins, model has {}",
                s.histogram.len(),
                model.bins()
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut velocity = ModelGrads::zeros_like(&model);
    let mut losses = vec![0.0; samples.len()];
    let mut curve = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for (batch_no, batch) in order.chunks(config.batch_size).enumerate() {
            let mut grads = ModelGrads::zeros_like(&model);
            for &i in batch {
                let x = &samples[i].histogram;
                let cache = model.forward_with_cache(x)?;
                let loss = cross_entropy(cache.head.probs, labels[i]);
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        epoch,
                        batch: batch_no,
                        detail: format!(
                            "sample {i} (pixel {},{} frame {}), logits {:?}",
                            samples[i].x, samples[i].y, samples[i].t, cache.head.logits
                        ),
                    });
                }
                losses[i] = loss;
                let d_logits = cross_entropy_logit_grad(cache.head.probs, labels[i]);
                model.backward(x, &cache, d_logits, &mut grads);
            }
            grads.scale(1.0 / batch.len() as f64);
            apply_momentum(&mut model, &mut velocity, &grads, config);
            if !model.all_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_no,
                    detail: "parameters became non-finite after update".into(),
                });
            }
        }
        let mean = losses.iter().sum::<f64>() / losses.len() as f64;
        log::debug!(target: "train-bg", "epoch {epoch} loss {mean:.6}");
        curve.push(mean);
    }
    Ok((model, curve))
}

fn apply_momentum(
    model: &mut AdnnModel,
    velocity: &mut ModelGrads,
    grads: &ModelGrads,
    config: &TrainConfig,
) {
    let (mu, lr) = (config.momentum, config.learning_rate);
    let grad_slices = grads.slices();
    let vel_slices = velocity_slices_mut(velocity);
    for ((param, vel), grad) in model
        .param_slices_mut()
        .into_iter()
        .zip(vel_slices)
        .zip(grad_slices)
    {
        for ((p, v), g) in param.iter_mut().zip(vel.iter_mut()).zip(grad) {
            *v = mu * *v - lr * g;
            *p += *v;
        }
    }
}

fn velocity_slices_mut(v: &mut ModelGrads) -> Vec<&mut [f64]> {
    let mut out: Vec<&mut [f64]> = Vec::new();
    out.extend(v.sum_kernels.iter_mut().map(|k| k.as_mut_slice()));
    out.extend(v.product_kernels.iter_mut().map(|k| k.as_mut_slice()));
    let c = &mut v.classifier;
    out.push(&mut c.w1);
    out.push(&mut c.b1);
    out.push(&mut c.w2);
    out.push(&mut c.b2);
    out
}
