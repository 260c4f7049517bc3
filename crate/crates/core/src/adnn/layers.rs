//! Sum and product distribution layers.
//!
//! Both layers push the mass `X[i] * W[j]` of every bin pair into exactly
//! one output bin. For the sum layer that bin is `clamp(i + j - c)` (grid
//! value `x_i + w_j` clamped to `[-1, 1]`); for the product layer it is the
//! grid bin nearest to `x_i * w_j`. The bin map does not depend on the
//! masses, so each layer is bilinear in `(X, W)` and the backward pass is
//! its exact adjoint.

use crate::error::{Error, Result};
use crate::histogram::{validate_bins, Histogram};

/// Learnable kernel on the histogram grid. Weights are unconstrained.
#[derive(Debug, Clone, PartialEq)]
pub struct DistKernel {
    weights: Vec<f64>,
}

impl DistKernel {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        validate_bins(weights.len())?;
        if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "kernel weight {i} is not finite"
            )));
        }
        Ok(Self { weights })
    }

    /// Unit mass at grid value 0: the sum layer's identity.
    pub fn sum_identity(bins: usize) -> Result<Self> {
        Ok(Self {
            weights: Histogram::delta(bins, (bins - 1) / 2)?.into_bins(),
        })
    }

    /// Unit mass at grid value +1: the product layer's identity.
    pub fn product_identity(bins: usize) -> Result<Self> {
        Ok(Self {
            weights: Histogram::delta(bins, bins - 1)?.into_bins(),
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradBundle {
    pub d_input: Vec<f64>,
    pub d_kernel: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerKind {
    Sum,
    Product,
}

impl LayerKind {
    /// Output bin receiving the mass of input bin `i` and kernel bin `j`.
    #[inline]
    pub fn target_bin(self, i: usize, j: usize, bins: usize) -> usize {
        match self {
            LayerKind::Sum => sum_bin(i, j, bins),
            LayerKind::Product => product_bin(i, j, bins),
        }
    }
}

#[inline]
pub fn sum_bin(i: usize, j: usize, bins: usize) -> usize {
    let c = (bins - 1) / 2;
    (i + j).saturating_sub(c).min(bins - 1)
}

/// Nearest grid bin of `x_i * w_j`, ties rounded toward the upper bin.
///
/// With `m = B - 1`, `x_i = (2i - m) / m`, so the bin is
/// `round(((2i - m)(2j - m) + m^2) / 2m)`; the numerator is never negative.
#[inline]
pub fn product_bin(i: usize, j: usize, bins: usize) -> usize {
    let m = (bins - 1) as i64;
    let num = (2 * i as i64 - m) * (2 * j as i64 - m) + m * m;
    ((num + m) / (2 * m)) as usize
}

fn check_shapes(kind: &str, parts: &[(&str, usize)]) -> Result<()> {
    let b = parts[0].1;
    if parts.iter().any(|&(_, n)| n != b) {
        let desc: Vec<String> = parts.iter().map(|(k, n)| format!("{k}={n}")).collect();
        return Err(Error::SizeMismatch(format!("{kind}: {}", desc.join(", "))));
    }
    Ok(())
}

/// Accumulate the layer output for `x` and `w` into `out` (not cleared).
/// Zero input bins are skipped; feature histograms are sparse.
pub(crate) fn forward_into(kind: LayerKind, x: &[f64], w: &[f64], out: &mut [f64]) {
    let b = x.len();
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        match kind {
            LayerKind::Sum => {
                // j in [lo, hi) lands unclamped at i + j - c
                let c = (b - 1) / 2;
                let lo = c.saturating_sub(i);
                let hi = (b + c - i).min(b);
                for &wj in &w[..lo] {
                    out[0] += xi * wj;
                }
                for j in lo..hi {
                    out[i + j - c] += xi * w[j];
                }
                for &wj in &w[hi..] {
                    out[b - 1] += xi * wj;
                }
            }
            LayerKind::Product => {
                for (j, &wj) in w.iter().enumerate() {
                    out[product_bin(i, j, b)] += xi * wj;
                }
            }
        }
    }
}

/// Kernel gradient only, accumulated into `d_kernel`.
pub(crate) fn kernel_grad_into(kind: LayerKind, x: &[f64], grad_out: &[f64], d_kernel: &mut [f64]) {
    let b = x.len();
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        for (j, dk) in d_kernel.iter_mut().enumerate() {
            *dk += xi * grad_out[kind.target_bin(i, j, b)];
        }
    }
}

/// Input gradient only, accumulated into `d_input`.
pub(crate) fn input_grad_into(kind: LayerKind, w: &[f64], grad_out: &[f64], d_input: &mut [f64]) {
    let b = w.len();
    for (i, di) in d_input.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, &wj) in w.iter().enumerate() {
            acc += wj * grad_out[kind.target_bin(i, j, b)];
        }
        *di += acc;
    }
}

pub fn layer_forward(kind: LayerKind, x: &Histogram, w: &DistKernel) -> Result<Histogram> {
    check_shapes("layer forward", &[("input", x.len()), ("kernel", w.len())])?;
    let mut out = vec![0.0; x.len()];
    forward_into(kind, x.bins(), w.weights(), &mut out);
    Histogram::from_bins(out)
}

pub fn layer_backward(
    kind: LayerKind,
    grad_out: &[f64],
    x: &Histogram,
    w: &DistKernel,
) -> Result<GradBundle> {
    check_shapes(
        "layer backward",
        &[
            ("grad", grad_out.len()),
            ("input", x.len()),
            ("kernel", w.len()),
        ],
    )?;
    let b = x.len();
    let mut d_kernel = vec![0.0; b];
    let mut d_input = vec![0.0; b];
    kernel_grad_into(kind, x.bins(), grad_out, &mut d_kernel);
    input_grad_into(kind, w.weights(), grad_out, &mut d_input);
    Ok(GradBundle { d_input, d_kernel })
}

/// Distribution of `X + W` on the grid, clamped at the domain edges.
pub fn sum_layer_forward(x: &Histogram, w: &DistKernel) -> Result<Histogram> {
    layer_forward(LayerKind::Sum, x, w)
}

pub fn sum_layer_backward(grad_out: &[f64], x: &Histogram, w: &DistKernel) -> Result<GradBundle> {
    layer_backward(LayerKind::Sum, grad_out, x, w)
}

/// Distribution of `X * W` on the grid.
pub fn product_layer_forward(x: &Histogram, w: &DistKernel) -> Result<Histogram> {
    layer_forward(LayerKind::Product, x, w)
}

pub fn product_layer_backward(
    grad_out: &[f64],
    x: &Histogram,
    w: &DistKernel,
) -> Result<GradBundle> {
    layer_backward(LayerKind::Product, grad_out, x, w)
}
