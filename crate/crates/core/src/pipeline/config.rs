//! Line-oriented `key = value` pipeline configuration.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::adnn::{AdnnConfig, TrainConfig};
use crate::error::{Error, Result};
use crate::histogram::{validate_bins, TemporalWindow};
use crate::mil::{MilParams, DEFAULT_SEGMENTS};
use crate::refine::RefineParams;
use crate::trim::TrimConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Relative paths are resolved against this directory.
    pub base_dir: PathBuf,
    pub input: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    pub output: PathBuf,
    pub mil_weights: Option<PathBuf>,
    pub mil_bags: Option<PathBuf>,
    pub seed: u64,
    pub window: usize,
    pub model: AdnnConfig,
    pub train: TrainConfig,
    pub samples: usize,
    pub infer_threshold: f64,
    pub refine_enabled: bool,
    pub refine: RefineParams,
    pub trim: TrimConfig,
    pub mil: MilParams,
    pub segments: usize,
    pub fps: f64,
    pub use_masks: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            base_dir: PathBuf::from("."),
            input: None,
            ground_truth: None,
            output: PathBuf::from("out"),
            mil_weights: None,
            mil_bags: None,
            seed: 0,
            window: TemporalWindow::default().length(),
            model: AdnnConfig::default(),
            train: TrainConfig::default(),
            samples: 2000,
            infer_threshold: 0.5,
            refine_enabled: true,
            refine: RefineParams::default(),
            trim: TrimConfig::default(),
            mil: MilParams::default(),
            segments: DEFAULT_SEGMENTS,
            fps: 30.0,
            use_masks: false,
        }
    }
}

/// Every accepted key, in canonical order.
pub const KEYS: &[&str] = &[
    "paths.input",
    "paths.ground_truth",
    "paths.output",
    "paths.mil_weights",
    "paths.mil_bags",
    "seed",
    "window.length",
    "histogram.bins",
    "model.sum_kernels",
    "model.product_kernels",
    "model.hidden",
    "train.learning_rate",
    "train.epochs",
    "train.batch_size",
    "train.momentum",
    "train.samples",
    "infer.threshold",
    "infer.refine",
    "refine.sigma_spatial",
    "refine.sigma_color",
    "refine.radius",
    "refine.max_iters",
    "refine.min_flips",
    "trim.threshold",
    "trim.padding",
    "mil.lambda1",
    "mil.lambda2",
    "mil.learning_rate",
    "mil.epochs",
    "mil.segments",
    "mil.hidden1",
    "mil.hidden2",
    "sequence.fps",
    "score.use_masks",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("{key}: cannot parse {value:?}: {e}")))
}

fn path_value(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl PipelineConfig {
    /// Parse config text. Lines are `key = value`; `#` starts a comment.
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut cfg = Self {
            base_dir: base_dir.into(),
            ..Self::default()
        };
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got {raw:?}", n + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
        Self::parse(&text, if base.as_os_str().is_empty() { PathBuf::from(".") } else { base })
    }

    /// Apply one `key=value` override. Call [`validate`](Self::validate)
    /// afterwards.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "paths.input" => self.input = path_value(value),
            "paths.ground_truth" => self.ground_truth = path_value(value),
            "paths.output" => {
                self.output = path_value(value)
                    .ok_or_else(|| Error::Config("paths.output must not be empty".into()))?
            }
            "paths.mil_weights" => self.mil_weights = path_value(value),
            "paths.mil_bags" => self.mil_bags = path_value(value),
            "seed" => self.seed = parse(key, value)?,
            "window.length" => self.window = parse(key, value)?,
            "histogram.bins" => self.model.bins = parse(key, value)?,
            "model.sum_kernels" => self.model.sum_kernels = parse(key, value)?,
            "model.product_kernels" => self.model.product_kernels = parse(key, value)?,
            "model.hidden" => self.model.hidden = parse(key, value)?,
            "train.learning_rate" => self.train.learning_rate = parse(key, value)?,
            "train.epochs" => self.train.epochs = parse(key, value)?,
            "train.batch_size" => self.train.batch_size = parse(key, value)?,
            "train.momentum" => self.train.momentum = parse(key, value)?,
            "train.samples" => self.samples = parse(key, value)?,
            "infer.threshold" => self.infer_threshold = parse(key, value)?,
            "infer.refine" => self.refine_enabled = parse(key, value)?,
            "refine.sigma_spatial" => self.refine.sigma_spatial = parse(key, value)?,
            "refine.sigma_color" => self.refine.sigma_color = parse(key, value)?,
            "refine.radius" => self.refine.radius = parse(key, value)?,
            "refine.max_iters" => self.refine.max_iters = parse(key, value)?,
            "refine.min_flips" => self.refine.min_flips = parse(key, value)?,
            "trim.threshold" => self.trim.threshold = parse(key, value)?,
            "trim.padding" => self.trim.padding = parse(key, value)?,
            "mil.lambda1" => self.mil.lambda1 = parse(key, value)?,
            "mil.lambda2" => self.mil.lambda2 = parse(key, value)?,
            "mil.learning_rate" => self.mil.learning_rate = parse(key, value)?,
            "mil.epochs" => self.mil.epochs = parse(key, value)?,
            "mil.segments" => self.segments = parse(key, value)?,
            "mil.hidden1" => self.mil.hidden1 = parse(key, value)?,
            "mil.hidden2" => self.mil.hidden2 = parse(key, value)?,
            "sequence.fps" => self.fps = parse(key, value)?,
            "score.use_masks" => self.use_masks = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        self.sync_seeds();
        Ok(())
    }

    fn sync_seeds(&mut self) {
        self.train.seed = self.seed;
        self.mil.seed = self.seed;
    }

    /// Apply `key=value` strings (command-line overrides) and re-validate.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for o in overrides {
            let o = o.as_ref();
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {o:?} is not key=value")))?;
            self.set(k.trim(), v.trim())?;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |what: &str, r: Result<()>| {
            r.map_err(|e| match e {
                Error::Config(m) => Error::Config(m),
                other => Error::Config(format!("{what}: {other}")),
            })
        };
        wrap("window.length", TemporalWindow::new(self.window).map(|_| ()))?;
        wrap("histogram.bins", validate_bins(self.model.bins))?;
        wrap("model", self.model.validate())?;
        wrap("train", self.train.validate())?;
        wrap("refine", self.refine.validate())?;
        wrap("trim", self.trim.validate())?;
        wrap("mil", self.mil.validate())?;
        if self.samples == 0 {
            return Err(Error::Config("train.samples must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.infer_threshold) {
            return Err(Error::Config("infer.threshold must lie in [0, 1]".into()));
        }
        if self.segments < 2 {
            return Err(Error::Config("mil.segments must be at least 2".into()));
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(Error::Config("sequence.fps must be positive".into()));
        }
        Ok(())
    }

    /// Value of every key, rendered canonically, in [`KEYS`] order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let values = [
            show_path(&self.input),
            show_path(&self.ground_truth),
            self.output.display().to_string(),
            show_path(&self.mil_weights),
            show_path(&self.mil_bags),
            self.seed.to_string(),
            self.window.to_string(),
            self.model.bins.to_string(),
            self.model.sum_kernels.to_string(),
            self.model.product_kernels.to_string(),
            self.model.hidden.to_string(),
            self.train.learning_rate.to_string(),
            self.train.epochs.to_string(),
            self.train.batch_size.to_string(),
            self.train.momentum.to_string(),
            self.samples.to_string(),
            self.infer_threshold.to_string(),
            self.refine_enabled.to_string(),
            self.refine.sigma_spatial.to_string(),
            self.refine.sigma_color.to_string(),
            self.refine.radius.to_string(),
            self.refine.max_iters.to_string(),
            self.refine.min_flips.to_string(),
            self.trim.threshold.to_string(),
            self.trim.padding.to_string(),
            self.mil.lambda1.to_string(),
            self.mil.lambda2.to_string(),
            self.mil.learning_rate.to_string(),
            self.mil.epochs.to_string(),
            self.segments.to_string(),
            self.mil.hidden1.to_string(),
            self.mil.hidden2.to_string(),
            self.fps.to_string(),
            self.use_masks.to_string(),
        ];
        KEYS.iter().copied().zip(values).collect()
    }

    /// Hash of every setting except the `paths.*` keys. Input data enters
    /// stage fingerprints through content hashes instead, so a copied tree
    /// or a different output root does not change it.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.entries() {
            if !k.starts_with("paths.") {
                h.update(format!("{k}={v}\n").as_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    /// Hash of the keys starting with one of `prefixes`, for fingerprints
    /// of stages that read only part of the config.
    pub fn hash_keys(&self, prefixes: &[&str]) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.entries() {
            if prefixes.iter().any(|p| k.starts_with(p)) {
                h.update(format!("{k}={v}\n").as_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn required(&self, p: &Option<PathBuf>, key: &str) -> Result<PathBuf> {
        p.as_deref()
            .map(|p| self.resolve(p))
            .ok_or_else(|| Error::Config(format!("{key} is not set")))
    }

    pub fn input_dir(&self) -> Result<PathBuf> {
        self.required(&self.input, "paths.input")
    }

    pub fn ground_truth_dir(&self) -> Result<PathBuf> {
        self.required(&self.ground_truth, "paths.ground_truth")
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output)
    }

    pub fn temporal_window(&self) -> TemporalWindow {
        TemporalWindow::new(self.window).expect("validated window")
    }
}
