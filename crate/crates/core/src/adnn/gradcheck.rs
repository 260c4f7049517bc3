//! Central-difference verification of the analytic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::classifier::{cross_entropy, cross_entropy_logit_grad, Classifier, ClassifierGrads};
use super::layers::{forward_into, layer_backward, DistKernel, LayerKind};
use crate::error::{Error, Result};
use crate::histogram::{Histogram, Label};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradCheckLayer {
    Sum,
    Product,
    Classifier,
}

/// `|a - n| / max(1e-8, |a| + |n|)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

fn central<F: FnMut(f64) -> f64>(mut f: F, at: f64, eps: f64) -> f64 {
    (f(at + eps) - f(at - eps)) / (2.0 * eps)
}

/// Largest relative error between the layer's backward pass and central
/// differences of `f(X, W) = <u, forward(X, W)>`, over every input and
/// kernel coordinate.
pub fn layer_grad_error(
    kind: LayerKind,
    x: &[f64],
    w: &[f64],
    u: &[f64],
    eps: f64,
) -> Result<f64> {
    let b = x.len();
    if w.len() != b || u.len() != b {
        return Err(Error::SizeMismatch("grad check operands differ in size".into()));
    }
    let objective = |x: &[f64], w: &[f64]| {
        let mut out = vec![0.0; b];
        forward_into(kind, x, w, &mut out);
        out.iter().zip(u).map(|(o, g)| o * g).sum::<f64>()
    };
    let grads = layer_backward(
        kind,
        u,
        &Histogram::from_bins(x.to_vec())?,
        &DistKernel::new(w.to_vec())?,
    )?;
    let mut worst = 0.0f64;
    let mut xs = x.to_vec();
    for i in 0..b {
        let orig = xs[i];
        let numeric = central(
            |v| {
                xs[i] = v;
                objective(&xs, w)
            },
            orig,
            eps,
        );
        xs[i] = orig;
        worst = worst.max(relative_error(grads.d_input[i], numeric));
    }
    let mut ws = w.to_vec();
    for j in 0..b {
        let orig = ws[j];
        let numeric = central(
            |v| {
                ws[j] = v;
                objective(x, &ws)
            },
            orig,
            eps,
        );
        ws[j] = orig;
        worst = worst.max(relative_error(grads.d_kernel[j], numeric));
    }
    Ok(worst)
}

/// Largest relative error of the classifier head's cross-entropy gradients
/// (all parameters and the input) against central differences.
pub fn classifier_grad_error(
    head: &Classifier,
    input: &[f64],
    label: Label,
    eps: f64,
) -> Result<f64> {
    let cache = head.forward(input)?;
    let mut grads = ClassifierGrads::zeros_like(head);
    let d_input = head.backward(
        input,
        &cache,
        cross_entropy_logit_grad(cache.probs, label),
        &mut grads,
        true,
    );
    let loss = |c: &Classifier, x: &[f64]| cross_entropy(c.forward(x).unwrap().probs, label);

    let mut worst = 0.0f64;
    let mut probe = head.clone();
    let analytic: [&[f64]; 4] = [&grads.w1, &grads.b1, &grads.w2, &grads.b2];
    for (block, analytic) in analytic.iter().enumerate() {
        for k in 0..analytic.len() {
            let orig = probe.params_mut()[block][k];
            let numeric = central(
                |v| {
                    probe.params_mut()[block][k] = v;
                    loss(&probe, input)
                },
                orig,
                eps,
            );
            probe.params_mut()[block][k] = orig;
            worst = worst.max(relative_error(analytic[k], numeric));
        }
    }
    let mut xs = input.to_vec();
    for i in 0..xs.len() {
        let orig = xs[i];
        let numeric = central(
            |v| {
                xs[i] = v;
                loss(head, &xs)
            },
            orig,
            eps,
        );
        xs[i] = orig;
        worst = worst.max(relative_error(d_input[i], numeric));
    }
    Ok(worst)
}

/// Run `trials` seeded random cases at `bins` bins and return the largest
/// relative error seen. The classifier case uses a head over four channels
/// with eight hidden units.
pub fn grad_check(
    layer: GradCheckLayer,
    bins: usize,
    trials: usize,
    eps: f64,
    seed: u64,
) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument("eps must be positive".into()));
    }
    crate::histogram::validate_bins(bins)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let err = match layer {
            GradCheckLayer::Sum | GradCheckLayer::Product => {
                let kind = if layer == GradCheckLayer::Sum {
                    LayerKind::Sum
                } else {
                    LayerKind::Product
                };
                let x = random_vec(&mut rng, bins, 0.0, 1.0);
                let w = random_vec(&mut rng, bins, -1.0, 1.0);
                let u = random_vec(&mut rng, bins, -1.0, 1.0);
                layer_grad_error(kind, &x, &w, &u, eps)?
            }
            GradCheckLayer::Classifier => {
                let input_dim = 4 * bins;
                let hidden = 8;
                let mut head = Classifier::zeros(input_dim, hidden);
                let s1 = (6.0 / input_dim as f64).sqrt();
                head.w1 = random_vec(&mut rng, hidden * input_dim, -s1, s1);
                head.b1 = random_vec(&mut rng, hidden, -0.1, 0.1);
                head.w2 = random_vec(&mut rng, 2 * hidden, -1.0, 1.0);
                head.b2 = [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)];
                let input = random_vec(&mut rng, input_dim, 0.0, 1.0);
                let label = Label::from_bool(rng.random_bool(0.5));
                classifier_grad_error(&head, &input, label, eps)?
            }
        };
        worst = worst.max(err);
    }
    Ok(worst)
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layers_pass_at_small_scale() {
        for layer in [GradCheckLayer::Sum, GradCheckLayer::Product] {
            assert!(grad_check(layer, 21, 10, 1e-5, 7).unwrap() <= 1e-4);
        }
        assert!(grad_check(GradCheckLayer::Classifier, 5, 3, 1e-5, 7).unwrap() <= 1e-4);
    }

    #[test]
    fn zero_input_has_defined_error() {
        let b = 21;
        let x = vec![0.0; b];
        let w: Vec<f64> = (0..b).map(|j| (j as f64 * 0.37).sin()).collect();
        let u: Vec<f64> = (0..b).map(|j| (j as f64 * 0.91).cos()).collect();
        for kind in [LayerKind::Sum, LayerKind::Product] {
            let e = layer_grad_error(kind, &x, &w, &u, 1e-5).unwrap();
            assert!(e.is_finite() && e <= 1e-4, "{e}");
        }
    }

    #[test]
    fn rejects_bad_eps() {
        assert!(grad_check(GradCheckLayer::Sum, 21, 1, 0.0, 0).is_err());
    }

    #[test]
    fn detects_a_wrong_gradient() {
        assert!(relative_error(1.0, 1.1) > 1e-2);
        assert_eq!(relative_error(0.0, 0.0), 0.0);
    }
}
