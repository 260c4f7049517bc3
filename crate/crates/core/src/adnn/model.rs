use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::classifier::{Classifier, ClassifierCache, ClassifierGrads, Probs};
use super::layers::{forward_into, kernel_grad_into, DistKernel, LayerKind};
use crate::error::{Error, Result};
use crate::frame_io::write_bytes;
use crate::histogram::{validate_bins, Histogram, DEFAULT_BINS};

/// Architecture sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdnnConfig {
    pub bins: usize,
    pub sum_kernels: usize,
    pub product_kernels: usize,
    pub hidden: usize,
}

impl Default for AdnnConfig {
    fn default() -> Self {
        Self {
            bins: DEFAULT_BINS,
            sum_kernels: 4,
            product_kernels: 4,
            hidden: 64,
        }
    }
}

impl AdnnConfig {
    pub fn validate(&self) -> Result<()> {
        validate_bins(self.bins)?;
        if self.sum_kernels + self.product_kernels == 0 {
            return Err(Error::InvalidArgument(
                "model needs at least one distribution kernel".into(),
            ));
        }
        if self.hidden == 0 {
            return Err(Error::InvalidArgument("hidden width must be positive".into()));
        }
        Ok(())
    }

    pub fn channels(&self) -> usize {
        self.sum_kernels + self.product_kernels
    }

    pub fn param_count(&self) -> usize {
        let (b, k, h) = (self.bins, self.channels(), self.hidden);
        k * b + h * b * k + h + 2 * h + 2
    }
}

/// Parallel sum and product distribution branches feeding a classifier head.
/// Channel order is all sum kernels, then all product kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct AdnnModel {
    config: AdnnConfig,
    pub(crate) sum_kernels: Vec<DistKernel>,
    pub(crate) product_kernels: Vec<DistKernel>,
    pub(crate) classifier: Classifier,
}

/// Forward intermediates for one sample.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub channels: Vec<f64>,
    pub head: ClassifierCache,
}

/// Gradients for every learnable parameter, laid out like the model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub sum_kernels: Vec<Vec<f64>>,
    pub product_kernels: Vec<Vec<f64>>,
    pub classifier: ClassifierGrads,
}

impl ModelGrads {
    pub fn zeros_like(model: &AdnnModel) -> Self {
        let b = model.config.bins;
        Self {
            sum_kernels: vec![vec![0.0; b]; model.config.sum_kernels],
            product_kernels: vec![vec![0.0; b]; model.config.product_kernels],
            classifier: ClassifierGrads::zeros_like(&model.classifier),
        }
    }

    pub(crate) fn slices(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = Vec::new();
        v.extend(self.sum_kernels.iter().map(|k| k.as_slice()));
        v.extend(self.product_kernels.iter().map(|k| k.as_slice()));
        v.push(&self.classifier.w1);
        v.push(&self.classifier.b1);
        v.push(&self.classifier.w2);
        v.push(&self.classifier.b2);
        v
    }

    pub(crate) fn scale(&mut self, s: f64) {
        for k in self.sum_kernels.iter_mut().chain(&mut self.product_kernels) {
            k.iter_mut().for_each(|v| *v *= s);
        }
        let c = &mut self.classifier;
        for v in c
            .w1
            .iter_mut()
            .chain(&mut c.b1)
            .chain(&mut c.w2)
            .chain(&mut c.b2)
        {
            *v *= s;
        }
    }
}

impl AdnnModel {
    /// Identity kernels (sum: delta at 0, product: delta at +1) plus uniform
    /// noise in [-0.01, 0.01]; He-uniform first layer, small output layer,
    /// zero biases.
    pub fn new(config: AdnnConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = config.bins;
        let noisy = |mut k: DistKernel, rng: &mut ChaCha8Rng| {
            for w in k.weights_mut() {
                *w += rng.random_range(-0.01..=0.01);
            }
            k
        };
        let sum_kernels = (0..config.sum_kernels)
            .map(|_| noisy(DistKernel::sum_identity(b).unwrap(), &mut rng))
            .collect();
        let product_kernels = (0..config.product_kernels)
            .map(|_| noisy(DistKernel::product_identity(b).unwrap(), &mut rng))
            .collect();
        let input_dim = b * config.channels();
        let mut classifier = Classifier::zeros(input_dim, config.hidden);
        let limit1 = (6.0 / input_dim as f64).sqrt();
        classifier
            .w1
            .iter_mut()
            .for_each(|w| *w = rng.random_range(-limit1..=limit1));
        let limit2 = (6.0 / (config.hidden + 2) as f64).sqrt();
        classifier
            .w2
            .iter_mut()
            .for_each(|w| *w = rng.random_range(-limit2..=limit2));
        Ok(Self {
            config,
            sum_kernels,
            product_kernels,
            classifier,
        })
    }

    /// Assemble a model from explicit parts.
    pub fn from_parts(
        sum_kernels: Vec<DistKernel>,
        product_kernels: Vec<DistKernel>,
        classifier: Classifier,
    ) -> Result<Self> {
        let bins = sum_kernels
            .first()
            .or(product_kernels.first())
            .map(|k| k.len())
            .ok_or_else(|| Error::InvalidArgument("model needs at least one kernel".into()))?;
        let config = AdnnConfig {
            bins,
            sum_kernels: sum_kernels.len(),
            product_kernels: product_kernels.len(),
            hidden: classifier.hidden(),
        };
        config.validate()?;
        if sum_kernels
            .iter()
            .chain(&product_kernels)
            .any(|k| k.len() != bins)
        {
            return Err(Error::SizeMismatch("kernels differ in bin count".into()));
        }
        if classifier.input_dim() != bins * config.channels() {
            return Err(Error::SizeMismatch(format!(
                "classifier takes {} inputs, kernels produce {}",
                classifier.input_dim(),
                bins * config.channels()
            )));
        }
        Ok(Self {
            config,
            sum_kernels,
            product_kernels,
            classifier,
        })
    }

    pub fn config(&self) -> AdnnConfig {
        self.config
    }

    pub fn bins(&self) -> usize {
        self.config.bins
    }

    pub fn param_count(&self) -> usize {
        self.config.param_count()
    }

    pub fn sum_kernels(&self) -> &[DistKernel] {
        &self.sum_kernels
    }

    pub fn product_kernels(&self) -> &[DistKernel] {
        &self.product_kernels
    }

    pub fn classifier(&self) -> &Classifier {
        &self.classifier
    }

    pub fn classifier_mut(&mut self) -> &mut Classifier {
        &mut self.classifier
    }

    pub(crate) fn kernels(&self) -> impl Iterator<Item = (LayerKind, &DistKernel)> {
        self.sum_kernels
            .iter()
            .map(|k| (LayerKind::Sum, k))
            .chain(self.product_kernels.iter().map(|k| (LayerKind::Product, k)))
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.config.bins {
            return Err(Error::SizeMismatch(format!(
                "model has {} bins, histogram has {}",
                self.config.bins,
                x.len()
            )));
        }
        Ok(())
    }

    /// Stacked layer outputs, `channels x B`.
    pub fn channel_outputs(&self, x: &Histogram) -> Result<Vec<f64>> {
        self.check_input(x.bins())?;
        Ok(self.channels_unchecked(x.bins()))
    }

    fn channels_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let b = self.config.bins;
        let mut channels = vec![0.0; b * self.config.channels()];
        for ((kind, kernel), out) in self.kernels().zip(channels.chunks_exact_mut(b)) {
            forward_into(kind, x, kernel.weights(), out);
        }
        channels
    }

    pub fn forward_with_cache(&self, x: &Histogram) -> Result<ForwardCache> {
        let channels = self.channel_outputs(x)?;
        let head = self.classifier.forward(&channels)?;
        Ok(ForwardCache { channels, head })
    }

    pub fn forward(&self, x: &Histogram) -> Result<Probs> {
        Ok(self.forward_with_cache(x)?.head.probs)
    }

    /// Accumulate gradients of a loss whose logit gradient is `d_logits`.
    pub fn backward(
        &self,
        x: &Histogram,
        cache: &ForwardCache,
        d_logits: [f64; 2],
        grads: &mut ModelGrads,
    ) {
        let b = self.config.bins;
        let d_channels = self.classifier.backward(
            &cache.channels,
            &cache.head,
            d_logits,
            &mut grads.classifier,
            true,
        );
        let kernel_grads = grads
            .sum_kernels
            .iter_mut()
            .map(|g| (LayerKind::Sum, g))
            .chain(
                grads
                    .product_kernels
                    .iter_mut()
                    .map(|g| (LayerKind::Product, g)),
            );
        for ((kind, g), d_out) in kernel_grads.zip(d_channels.chunks_exact(b)) {
            kernel_grad_into(kind, x.bins(), d_out, g);
        }
    }

    pub(crate) fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = Vec::new();
        v.extend(self.sum_kernels.iter_mut().map(|k| k.weights_mut()));
        v.extend(self.product_kernels.iter_mut().map(|k| k.weights_mut()));
        v.extend(self.classifier.params_mut());
        v
    }

    pub fn all_finite(&self) -> bool {
        self.kernels().all(|(_, k)| k.weights().iter().all(|v| v.is_finite()))
            && [
                self.classifier.w1(),
                self.classifier.b1(),
                self.classifier.w2(),
                &self.classifier.b2()[..],
            ]
            .iter()
            .all(|s| s.iter().all(|v| v.is_finite()))
    }

    /// Plain-text checkpoint. Values use shortest round-trip formatting, so
    /// loading reproduces every parameter bit for bit.
    pub fn to_checkpoint(&self) -> String {
        let c = &self.config;
        let mut out = String::new();
        writeln!(out, "{CHECKPOINT_MAGIC}").unwrap();
        writeln!(out, "bins {}", c.bins).unwrap();
        writeln!(out, "sum_kernels {}", c.sum_kernels).unwrap();
        writeln!(out, "product_kernels {}", c.product_kernels).unwrap();
        writeln!(out, "hidden {}", c.hidden).unwrap();
        let mut section = |name: &str, values: &[f64], row: usize| {
            writeln!(out, "{name}").unwrap();
            for chunk in values.chunks(row) {
                let line: Vec<String> = chunk.iter().map(|v| format!("{v:e}")).collect();
                writeln!(out, "{}", line.join(" ")).unwrap();
            }
        };
        for k in &self.sum_kernels {
            section("sum_kernel", k.weights(), c.bins);
        }
        for k in &self.product_kernels {
            section("product_kernel", k.weights(), c.bins);
        }
        let cl = &self.classifier;
        section("w1", &cl.w1, cl.input_dim);
        section("b1", &cl.b1, cl.hidden);
        section("w2", &cl.w2, cl.hidden);
        section("b2", &cl.b2, 2);
        out.push_str("end\n");
        out
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::CheckpointMismatch(msg);
        let mut lines = text.lines();
        if lines.next() != Some(CHECKPOINT_MAGIC) {
            return Err(bad("missing checkpoint header".into()));
        }
        let mut header = |key: &str| -> Result<usize> {
            let line = lines.next().unwrap_or("");
            line.strip_prefix(key)
                .and_then(|r| r.trim().parse().ok())
                .ok_or_else(|| bad(format!("expected `{key} <n>`, found `{line}`")))
        };
        let config = AdnnConfig {
            bins: header("bins")?,
            sum_kernels: header("sum_kernels")?,
            product_kernels: header("product_kernels")?,
            hidden: header("hidden")?,
        };
        config.validate().map_err(|e| bad(e.to_string()))?;
        let mut section = |name: &str, count: usize| -> Result<Vec<f64>> {
            match lines.next() {
                Some(l) if l == name => {}
                other => {
                    return Err(bad(format!(
                        "expected section `{name}`, found `{}`",
                        other.unwrap_or("<eof>")
                    )))
                }
            }
            let mut values = Vec::with_capacity(count);
            while values.len() < count {
                let line = lines
                    .next()
                    .ok_or_else(|| bad(format!("section `{name}` truncated")))?;
                for tok in line.split_whitespace() {
                    let v: f64 = tok
                        .parse()
                        .map_err(|_| bad(format!("bad number `{tok}` in `{name}`")))?;
                    if !v.is_finite() {
                        return Err(bad(format!("non-finite value in `{name}`")));
                    }
                    values.push(v);
                }
            }
            if values.len() != count {
                return Err(bad(format!(
                    "section `{name}` has {} values, expected {count}",
                    values.len()
                )));
            }
            Ok(values)
        };
        let b = config.bins;
        let sum_kernels = (0..config.sum_kernels)
            .map(|_| section("sum_kernel", b).and_then(DistKernel::new))
            .collect::<Result<Vec<_>>>()?;
        let product_kernels = (0..config.product_kernels)
            .map(|_| section("product_kernel", b).and_then(DistKernel::new))
            .collect::<Result<Vec<_>>>()?;
        let input_dim = b * config.channels();
        let h = config.hidden;
        let mut classifier = Classifier::zeros(input_dim, h);
        classifier.w1 = section("w1", h * input_dim)?;
        classifier.b1 = section("b1", h)?;
        classifier.w2 = section("w2", 2 * h)?;
        let b2 = section("b2", 2)?;
        classifier.b2 = [b2[0], b2[1]];
        if lines.next() != Some("end") {
            return Err(bad("missing `end` marker".into()));
        }
        Ok(Self {
            config,
            sum_kernels,
            product_kernels,
            classifier,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_bytes(path.as_ref(), self.to_checkpoint().as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_checkpoint(&text)
    }
}

const CHECKPOINT_MAGIC: &str = "adnn-checkpoint v1";

/// Apply the network to one histogram.
pub fn adnn_forward(x: &Histogram, model: &AdnnModel) -> Result<Probs> {
    model.forward(x)
}

/// Classifier head applied to already computed channel outputs.
pub fn classifier_forward(channels: &[f64], model: &AdnnModel) -> Result<Probs> {
    Ok(model.classifier.forward(channels)?.probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adnn::layers::{product_layer_forward, sum_layer_forward};

    fn sample_hist(b: usize) -> Histogram {
        let mut v = vec![0.0; b];
        v[b / 2] = 0.5;
        v[b / 2 + 1] = 0.25;
        v[b - 2] = 0.25;
        Histogram::from_bins(v).unwrap()
    }

    #[test]
    fn default_size_is_about_a_hundred_thousand() {
        let c = AdnnConfig::default();
        assert_eq!(c.param_count(), 104_714);
        let m = AdnnModel::new(c, 0).unwrap();
        assert_eq!(m.param_count(), 104_714);
    }

    #[test]
    fn forward_is_deterministic_and_compositional() {
        let cfg = AdnnConfig {
            bins: 21,
            sum_kernels: 2,
            product_kernels: 3,
            hidden: 7,
        };
        let m = AdnnModel::new(cfg, 11).unwrap();
        let x = sample_hist(21);
        assert_eq!(m.forward(&x).unwrap(), m.forward(&x).unwrap());

        let mut stacked = Vec::new();
        for k in m.sum_kernels() {
            stacked.extend(sum_layer_forward(&x, k).unwrap().into_bins());
        }
        for k in m.product_kernels() {
            stacked.extend(product_layer_forward(&x, k).unwrap().into_bins());
        }
        let composed = classifier_forward(&stacked, &m).unwrap();
        let direct = adnn_forward(&x, &m).unwrap();
        assert!((composed.foreground - direct.foreground).abs() < 1e-15);
    }

    #[test]
    fn identity_kernels_copy_input() {
        let b = 11;
        let m = AdnnModel::from_parts(
            vec![DistKernel::sum_identity(b).unwrap(); 2],
            vec![DistKernel::product_identity(b).unwrap(); 2],
            Classifier::zeros(4 * b, 3),
        )
        .unwrap();
        let x = sample_hist(b);
        let ch = m.channel_outputs(&x).unwrap();
        for chunk in ch.chunks_exact(b) {
            assert_eq!(chunk, x.bins());
        }
    }

    #[test]
    fn checkpoint_round_trip_is_bitwise() {
        let cfg = AdnnConfig {
            bins: 21,
            sum_kernels: 2,
            product_kernels: 2,
            hidden: 5,
        };
        let m = AdnnModel::new(cfg, 5).unwrap();
        let back = AdnnModel::from_checkpoint(&m.to_checkpoint()).unwrap();
        assert_eq!(back, m);
        let x = sample_hist(21);
        assert_eq!(
            back.forward(&x).unwrap().foreground.to_bits(),
            m.forward(&x).unwrap().foreground.to_bits()
        );
    }

    #[test]
    fn corrupted_checkpoint_is_rejected() {
        let cfg = AdnnConfig {
            bins: 5,
            sum_kernels: 1,
            product_kernels: 1,
            hidden: 2,
        };
        let text = AdnnModel::new(cfg, 1).unwrap().to_checkpoint();
        let truncated = &text[..text.len() / 2];
        assert!(matches!(
            AdnnModel::from_checkpoint(truncated),
            Err(Error::CheckpointMismatch(_))
        ));
        let garbled = text.replace("bins 5", "bins 7");
        assert!(matches!(
            AdnnModel::from_checkpoint(&garbled),
            Err(Error::CheckpointMismatch(_))
        ));
        assert!(AdnnModel::from_checkpoint("hello").is_err());
    }

    #[test]
    fn mismatched_histogram_size() {
        let m = AdnnModel::new(
            AdnnConfig {
                bins: 5,
                sum_kernels: 1,
                product_kernels: 1,
                hidden: 2,
            },
            0,
        )
        .unwrap();
        assert!(matches!(
            m.forward(&Histogram::delta(7, 3).unwrap()),
            Err(Error::SizeMismatch(_))
        ));
    }
}
