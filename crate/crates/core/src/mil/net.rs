//! Segment scoring network and multiple-instance ranking training.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::SegmentFeatures;
use crate::error::{Error, Result};

/// Scores are kept this far away from 0 and 1.
const SCORE_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MilParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub hidden1: usize,
    pub hidden2: usize,
}

impl Default for MilParams {
    fn default() -> Self {
        Self {
            lambda1: 8e-5,
            lambda2: 8e-5,
            learning_rate: 1e-3,
            epochs: 200,
            seed: 0,
            hidden1: 512,
            hidden2: 32,
        }
    }
}

impl MilParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda1 >= 0.0 && self.lambda2 >= 0.0) {
            return Err(Error::InvalidArgument("MIL lambdas must be non-negative".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "MIL learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.hidden1 == 0 || self.hidden2 == 0 {
            return Err(Error::InvalidArgument("MIL hidden sizes must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarity {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bag {
    pub features: SegmentFeatures,
    pub polarity: Polarity,
}

/// Per-segment anomaly scores in `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSeries {
    scores: Vec<f64>,
}

impl ScoreSeries {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if let Some(i) = scores.iter().position(|s| !(0.0..=1.0).contains(s)) {
            return Err(Error::InvalidArgument(format!(
                "score {i} = {} is outside [0, 1]",
                scores[i]
            )));
        }
        Ok(Self { scores })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.scores.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `D -> H1 -> H2 -> 1` with ReLU between layers and a logistic output.
/// Inputs are standardized with the stored per-dimension mean and scale
/// before the first layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilWeights {
    pub dims: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    /// `hidden1 x dims`, row-major
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `hidden2 x hidden1`, row-major
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub w3: Vec<f64>,
    pub b3: f64,
}

impl MilWeights {
    pub fn zeros(dims: usize, hidden1: usize, hidden2: usize) -> Self {
        Self {
            dims,
            hidden1,
            hidden2,
            mean: vec![0.0; dims],
            scale: vec![1.0; dims],
            w1: vec![0.0; hidden1 * dims],
            b1: vec![0.0; hidden1],
            w2: vec![0.0; hidden2 * hidden1],
            b2: vec![0.0; hidden2],
            w3: vec![0.0; hidden2],
            b3: 0.0,
        }
    }

    /// Uniform fan-in initialisation, zero biases, identity standardization.
    pub fn init(dims: usize, hidden1: usize, hidden2: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = Self::zeros(dims, hidden1, hidden2);
        let mut fill = |v: &mut [f64], limit: f64| {
            v.iter_mut().for_each(|x| *x = rng.random_range(-limit..limit));
        };
        fill(&mut w.w1, (6.0 / dims as f64).sqrt());
        fill(&mut w.w2, (6.0 / hidden1 as f64).sqrt());
        fill(&mut w.w3, (6.0 / (hidden2 + 1) as f64).sqrt());
        w
    }

    /// Set the standardization from the segments of `bags` (population std;
    /// constant dimensions get scale 1).
    pub fn fit_standardization(&mut self, bags: &[Bag]) {
        let d = self.dims;
        let rows: Vec<&[f64]> = bags.iter().flat_map(|b| b.features.rows()).collect();
        if rows.is_empty() {
            return;
        }
        let n = rows.len() as f64;
        for j in 0..d {
            let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
            self.mean[j] = mean;
            self.scale[j] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
    }

    fn check(&self) -> Result<()> {
        let (d, h1, h2) = (self.dims, self.hidden1, self.hidden2);
        let ok = self.mean.len() == d
            && self.scale.len() == d
            && self.w1.len() == h1 * d
            && self.b1.len() == h1
            && self.w2.len() == h2 * h1
            && self.b2.len() == h2
            && self.w3.len() == h2;
        if !ok {
            return Err(Error::SizeMismatch("MIL weight arrays do not match their dimensions".into()));
        }
        if self.scale.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::InvalidArgument("MIL standardization scales must be positive".into()));
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self).expect("weights serialize");
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let w: Self = serde_json::from_str(&text).map_err(|e| Error::CorruptFile {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        w.check()?;
        Ok(w)
    }

    fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len() + self.w3.len() + 1
    }
}

struct SegmentCache {
    input: Vec<f64>,
    z1: Vec<f64>,
    z2: Vec<f64>,
    score: f64,
}

/// Dot product over four interleaved partial sums.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn forward_segment(w: &MilWeights, row: &[f64]) -> SegmentCache {
    let input: Vec<f64> = row
        .iter()
        .zip(w.mean.iter().zip(&w.scale))
        .map(|(x, (m, s))| (x - m) / s)
        .collect();
    let z1: Vec<f64> = (0..w.hidden1)
        .map(|r| {
            let wr = &w.w1[r * w.dims..(r + 1) * w.dims];
            (w.b1[r] + dot(wr, &input)).max(0.0)
        })
        .collect();
    let z2: Vec<f64> = (0..w.hidden2)
        .map(|r| {
            let wr = &w.w2[r * w.hidden1..(r + 1) * w.hidden1];
            (w.b2[r] + dot(wr, &z1)).max(0.0)
        })
        .collect();
    let logit = w.b3 + dot(&w.w3, &z2);
    let score = (1.0 / (1.0 + (-logit).exp())).clamp(SCORE_MARGIN, 1.0 - SCORE_MARGIN);
    SegmentCache {
        input,
        z1,
        z2,
        score,
    }
}

/// Score every segment independently.
pub fn score_forward(features: &SegmentFeatures, weights: &MilWeights) -> Result<ScoreSeries> {
    weights.check()?;
    if features.dims() != weights.dims {
        return Err(Error::SizeMismatch(format!(
            "features have {} dims, weights expect {}",
            features.dims(),
            weights.dims
        )));
    }
    ScoreSeries::new(
        features
            .rows()
            .map(|r| forward_segment(weights, r).score)
            .collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankingLoss {
    pub hinge: f64,
    pub smoothness: f64,
    pub sparsity: f64,
}

impl RankingLoss {
    pub fn total(&self) -> f64 {
        self.hinge + self.smoothness + self.sparsity
    }
}

fn loss_terms(pos: &[f64], neg: &[f64], lambda1: f64, lambda2: f64) -> Result<RankingLoss> {
    if pos.len() != neg.len() || pos.is_empty() {
        return Err(Error::SizeMismatch(format!(
            "positive bag has {} segments, negative bag has {}",
            pos.len(),
            neg.len()
        )));
    }
    let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(RankingLoss {
        hinge: (1.0 - max(pos) + max(neg)).max(0.0),
        smoothness: lambda1 * pos.windows(2).map(|w| (w[0] - w[1]).powi(2)).sum::<f64>(),
        sparsity: lambda2 * pos.iter().sum::<f64>(),
    })
}

/// Hinge on the top-scored segments plus temporal smoothness and sparsity
/// of the positive bag.
pub fn mil_ranking_loss(pos: &ScoreSeries, neg: &ScoreSeries, lambda1: f64, lambda2: f64) -> Result<f64> {
    Ok(loss_terms(pos.scores(), neg.scores(), lambda1, lambda2)?.total())
}

pub fn ranking_loss_terms(
    pos: &ScoreSeries,
    neg: &ScoreSeries,
    lambda1: f64,
    lambda2: f64,
) -> Result<RankingLoss> {
    loss_terms(pos.scores(), neg.scores(), lambda1, lambda2)
}

/// Per-epoch means over the training pairs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossHistory {
    pub total: Vec<f64>,
    pub hinge: Vec<f64>,
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Flat gradient buffer with the same layout as [`MilWeights`] parameters.
struct Grads {
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
    w3: Vec<f64>,
    b3: f64,
}

impl Grads {
    fn zeros(w: &MilWeights) -> Self {
        Self {
            w1: vec![0.0; w.w1.len()],
            b1: vec![0.0; w.b1.len()],
            w2: vec![0.0; w.w2.len()],
            b2: vec![0.0; w.b2.len()],
            w3: vec![0.0; w.w3.len()],
            b3: 0.0,
        }
    }
}

/// Accumulate `d_score * d score / d params` for one cached segment.
fn backward_segment(w: &MilWeights, c: &SegmentCache, d_score: f64, g: &mut Grads) {
    let d_logit = d_score * c.score * (1.0 - c.score);
    g.b3 += d_logit;
    let mut d_z2 = vec![0.0; w.hidden2];
    for r in 0..w.hidden2 {
        g.w3[r] += d_logit * c.z2[r];
        if c.z2[r] > 0.0 {
            d_z2[r] = d_logit * w.w3[r];
        }
    }
    let mut d_z1 = vec![0.0; w.hidden1];
    for (r, &dz) in d_z2.iter().enumerate() {
        if dz == 0.0 {
            continue;
        }
        g.b2[r] += dz;
        let row = r * w.hidden1;
        for k in 0..w.hidden1 {
            g.w2[row + k] += dz * c.z1[k];
            d_z1[k] += dz * w.w2[row + k];
        }
    }
    for (r, &dz) in d_z1.iter().enumerate() {
        if dz == 0.0 || c.z1[r] <= 0.0 {
            continue;
        }
        g.b1[r] += dz;
        let row = r * w.dims;
        for (k, &x) in c.input.iter().enumerate() {
            g.w1[row + k] += dz * x;
        }
    }
}

struct Adagrad {
    sum_sq: Vec<f64>,
    lr: f64,
}

impl Adagrad {
    const EPS: f64 = 1e-8;
    const INITIAL_ACCUMULATOR: f64 = 0.1;

    fn new(n: usize, lr: f64) -> Self {
        Self {
            sum_sq: vec![Self::INITIAL_ACCUMULATOR; n],
            lr,
        }
    }

    fn apply(&mut self, w: &mut MilWeights, g: &Grads) {
        let b3 = [g.b3];
        let grads = [&g.w1[..], &g.b1, &g.w2, &g.b2, &g.w3, &b3];
        let mut b3w = [w.b3];
        let params: [&mut [f64]; 6] = [&mut w.w1, &mut w.b1, &mut w.w2, &mut w.b2, &mut w.w3, &mut b3w];
        let mut k = 0;
        for (p, gr) in params.into_iter().zip(grads) {
            for (pi, &gi) in p.iter_mut().zip(gr) {
                let acc = &mut self.sum_sq[k];
                *acc += gi * gi;
                *pi -= self.lr * gi / (acc.sqrt() + Self::EPS);
                k += 1;
            }
        }
        w.b3 = b3w[0];
    }
}

/// Train with Adagrad on the ranking loss, one positive/negative pair per step.
///
/// Each epoch shuffles the positive and the negative bags with a generator
/// seeded once from `params.seed`, then pairs them round-robin for
/// `max(#pos, #neg)` steps.
pub fn train_mil(bags: &[Bag], params: &MilParams) -> Result<(MilWeights, LossHistory)> {
    params.validate()?;
    let pos: Vec<&Bag> = bags.iter().filter(|b| b.polarity == Polarity::Positive).collect();
    let neg: Vec<&Bag> = bags.iter().filter(|b| b.polarity == Polarity::Negative).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::MissingPolarity {
            positive: pos.len(),
            negative: neg.len(),
        });
    }
    let dims = bags[0].features.dims();
    let segments = bags[0].features.segments();
    if let Some(b) = bags
        .iter()
        .find(|b| b.features.dims() != dims || b.features.segments() != segments)
    {
        return Err(Error::SizeMismatch(format!(
            "bag is {}x{}, first bag is {segments}x{dims}",
            b.features.segments(),
            b.features.dims()
        )));
    }

    let mut weights = MilWeights::init(dims, params.hidden1, params.hidden2, params.seed);
    weights.fit_standardization(bags);
    let mut opt = Adagrad::new(weights.param_count(), params.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0x5eed_0f_ba65);
    let mut pos_order: Vec<usize> = (0..pos.len()).collect();
    let mut neg_order: Vec<usize> = (0..neg.len()).collect();
    let steps = pos.len().max(neg.len());
    let mut history = LossHistory::default();

    for epoch in 0..params.epochs {
        pos_order.shuffle(&mut rng);
        neg_order.shuffle(&mut rng);
        let (mut total, mut hinge) = (0.0, 0.0);
        for step in 0..steps {
            let p = pos[pos_order[step % pos.len()]];
            let n = neg[neg_order[step % neg.len()]];
            let pc: Vec<SegmentCache> = p.features.rows().map(|r| forward_segment(&weights, r)).collect();
            let nc: Vec<SegmentCache> = n.features.rows().map(|r| forward_segment(&weights, r)).collect();
            let ps: Vec<f64> = pc.iter().map(|c| c.score).collect();
            let ns: Vec<f64> = nc.iter().map(|c| c.score).collect();
            let terms = loss_terms(&ps, &ns, params.lambda1, params.lambda2)?;
            if !terms.total().is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: step,
                    detail: "MIL ranking loss".into(),
                });
            }
            total += terms.total();
            hinge += terms.hinge;

            let mut d_pos = vec![params.lambda2; ps.len()];
            for i in 0..ps.len().saturating_sub(1) {
                let d = 2.0 * params.lambda1 * (ps[i] - ps[i + 1]);
                d_pos[i] += d;
                d_pos[i + 1] -= d;
            }
            let mut grads = Grads::zeros(&weights);
            if terms.hinge > 0.0 {
                d_pos[argmax(&ps)] -= 1.0;
                let ni = argmax(&ns);
                backward_segment(&weights, &nc[ni], 1.0, &mut grads);
            }
            for (c, &d) in pc.iter().zip(&d_pos) {
                backward_segment(&weights, c, d, &mut grads);
            }
            opt.apply(&mut weights, &grads);
        }
        history.total.push(total / steps as f64);
        history.hinge.push(hinge / steps as f64);
        log::debug!(target: "train-mil", "epoch {epoch} loss {:.6} hinge {:.6}", total / steps as f64, hinge / steps as f64);
    }
    Ok((weights, history))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(v: Vec<f64>) -> ScoreSeries {
        ScoreSeries::new(v).unwrap()
    }

    #[test]
    fn loss_examples() {
        let mut pos = vec![0.0; 32];
        pos[3] = 1.0;
        let mut neg = vec![0.0; 32];
        assert_eq!(mil_ranking_loss(&series(pos.clone()), &series(neg.clone()), 0.0, 0.0).unwrap(), 0.0);
        neg[7] = 1.0;
        pos[3] = 0.0;
        assert_eq!(mil_ranking_loss(&series(pos), &series(neg), 0.0, 0.0).unwrap(), 2.0);
        let half = series(vec![0.5; 32]);
        let l = mil_ranking_loss(&half, &half, 0.0, 0.01).unwrap();
        assert!((l - 1.16).abs() < 1e-12, "{l}");
        assert!(mil_ranking_loss(&half, &series(vec![0.5; 31]), 0.0, 0.0).is_err());
    }

    fn features(rows: usize, dims: usize, f: impl Fn(usize, usize) -> f64) -> SegmentFeatures {
        SegmentFeatures::new((0..rows).map(|i| (0..dims).map(|j| f(i, j)).collect()).collect()).unwrap()
    }

    #[test]
    fn zero_weights_score_one_half() {
        let w = MilWeights::zeros(5, 8, 4);
        let f = features(6, 5, |i, j| (i * 7 + j) as f64);
        assert!(score_forward(&f, &w).unwrap().scores().iter().all(|&s| s == 0.5));
        let scaled = features(6, 5, |i, j| 1e3 * (i * 7 + j) as f64);
        assert!(score_forward(&scaled, &w).unwrap().scores().iter().all(|&s| s == 0.5));
        assert!(matches!(
            score_forward(&features(6, 4, |_, _| 0.0), &w),
            Err(Error::SizeMismatch(_))
        ));
    }

    #[test]
    fn missing_polarity() {
        let bag = Bag {
            features: features(4, 3, |i, j| (i + j) as f64),
            polarity: Polarity::Negative,
        };
        assert!(matches!(
            train_mil(&[bag.clone(), bag], &MilParams::default()),
            Err(Error::MissingPolarity { positive: 0, negative: 2 })
        ));
    }

    fn toy_bags() -> Vec<Bag> {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        (0..6)
            .map(|b| {
                let positive = b % 2 == 0;
                let f = (0..8)
                    .map(|s| {
                        (0..4)
                            .map(|_| rng.random_range(-1.0..1.0) + if positive && s == 3 { 3.0 } else { 0.0 })
                            .collect()
                    })
                    .collect();
                Bag {
                    features: SegmentFeatures::new(f).unwrap(),
                    polarity: if positive { Polarity::Positive } else { Polarity::Negative },
                }
            })
            .collect()
    }

    #[test]
    fn training_is_deterministic_and_learns() {
        let params = MilParams {
            epochs: 60,
            hidden1: 16,
            hidden2: 8,
            learning_rate: 5e-2,
            seed: 4,
            ..MilParams::default()
        };
        let bags = toy_bags();
        let (wa, ha) = train_mil(&bags, &params).unwrap();
        let (wb, hb) = train_mil(&bags, &params).unwrap();
        assert_eq!(wa, wb);
        assert_eq!(ha, hb);
        assert!(ha.hinge.last().unwrap() < &(0.2 * ha.hinge[0]), "{:?}", ha.hinge);
    }

    #[test]
    fn analytic_gradient_matches_differences() {
        let bags = toy_bags();
        let mut w = MilWeights::init(4, 6, 5, 2);
        w.fit_standardization(&bags);
        w.b1.iter_mut().for_each(|b| *b = 0.3);
        w.b2.iter_mut().for_each(|b| *b = 0.2);
        let row = bags[0].features.row(3).to_vec();
        let c = forward_segment(&w, &row);
        let mut g = Grads::zeros(&w);
        backward_segment(&w, &c, 1.0, &mut g);
        let eps = 1e-6;
        let score = |w: &MilWeights| forward_segment(w, &row).score;
        for k in 0..w.w1.len() {
            let mut p = w.clone();
            p.w1[k] += eps;
            let mut m = w.clone();
            m.w1[k] -= eps;
            let num = (score(&p) - score(&m)) / (2.0 * eps);
            assert!((num - g.w1[k]).abs() < 1e-7, "w1[{k}]");
        }
        for k in 0..w.w2.len() {
            let mut p = w.clone();
            p.w2[k] += eps;
            let mut m = w.clone();
            m.w2[k] -= eps;
            let num = (score(&p) - score(&m)) / (2.0 * eps);
            assert!((num - g.w2[k]).abs() < 1e-7, "w2[{k}]");
        }
        let mut p = w.clone();
        p.b3 += eps;
        let mut m = w.clone();
        m.b3 -= eps;
        assert!(((score(&p) - score(&m)) / (2.0 * eps) - g.b3).abs() < 1e-7);
    }

    #[test]
    fn weights_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let w = MilWeights::init(3, 4, 2, 9);
        let path = dir.path().join("w.json");
        w.save(&path).unwrap();
        assert_eq!(MilWeights::load(&path).unwrap(), w);
        fs::write(&path, "{").unwrap();
        assert!(MilWeights::load(&path).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn scores(n: usize) -> impl Strategy<Value = Vec<f64>> {
            prop::collection::vec(0.0f64..=1.0, n)
        }

        proptest! {
            #[test]
            fn loss_is_non_negative_and_hinge_is_permutation_invariant(
                pos in scores(12), neg in scores(12), l1 in 0.0f64..1.0, l2 in 0.0f64..1.0, rot in 0usize..12
            ) {
                let (p, n) = (series(pos.clone()), series(neg.clone()));
                prop_assert!(mil_ranking_loss(&p, &n, l1, l2).unwrap() >= 0.0);
                let mut pr = pos.clone();
                pr.rotate_left(rot);
                let mut nr = neg.clone();
                nr.reverse();
                let a = ranking_loss_terms(&p, &n, l1, l2).unwrap().hinge;
                let b = ranking_loss_terms(&series(pr), &series(nr), l1, l2).unwrap().hinge;
                prop_assert_eq!(a, b);
            }

            #[test]
            fn scores_are_strictly_inside_and_rise_with_output_bias(seed in 0u64..1000, bump in 0.01f64..3.0) {
                let w = MilWeights::init(4, 8, 4, seed);
                let f = features(5, 4, |i, j| ((seed as usize + i * 3 + j) % 7) as f64 - 3.0);
                let base = score_forward(&f, &w).unwrap();
                prop_assert!(base.scores().iter().all(|&s| s > 0.0 && s < 1.0));
                let mut up = w.clone();
                up.b3 += bump;
                let raised = score_forward(&f, &up).unwrap();
                for (a, b) in base.scores().iter().zip(raised.scores()) {
                    prop_assert!(b > a);
                }
            }
        }
    }
}
