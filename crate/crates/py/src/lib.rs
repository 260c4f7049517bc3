//! Python bindings for the surveillance pipeline.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use surveil_core::adnn::{product_layer_forward, sum_layer_forward, DistKernel};
use surveil_core::mil::{score_forward, spearman as rank_correlation, MilWeights, SegmentFeatures};
use surveil_core::pipeline::{cmd_e2e, PipelineConfig};
use surveil_core::trim::{foreground_ratio, map_to_original, select_frames, TrimConfig, TrimSegmentMap};
use surveil_core::{synth, BinaryMask, Histogram, SequenceStats};

create_exception!(surveil, SurveilError, PyException);

fn err(e: surveil_core::Error) -> PyErr {
    SurveilError::new_err(e.to_string())
}

fn layer_inputs(x: Vec<f64>, w: Vec<f64>) -> PyResult<(Histogram, DistKernel)> {
    Ok((Histogram::from_bins(x).map_err(err)?, DistKernel::new(w).map_err(err)?))
}

/// Distribution of `X + W` on the shared bin grid.
#[pyfunction]
fn sum_layer(x: Vec<f64>, w: Vec<f64>) -> PyResult<Vec<f64>> {
    let (x, w) = layer_inputs(x, w)?;
    Ok(sum_layer_forward(&x, &w).map_err(err)?.bins().to_vec())
}

/// Distribution of `X * W` on the shared bin grid.
#[pyfunction]
fn product_layer(x: Vec<f64>, w: Vec<f64>) -> PyResult<Vec<f64>> {
    let (x, w) = layer_inputs(x, w)?;
    Ok(product_layer_forward(&x, &w).map_err(err)?.bins().to_vec())
}

fn to_mask(rows: Vec<Vec<bool>>) -> PyResult<BinaryMask> {
    let height = rows.len();
    let width = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != width) {
        return Err(SurveilError::new_err("mask rows differ in length"));
    }
    BinaryMask::new(width, height, rows.into_iter().flatten().collect()).map_err(err)
}

/// Fraction of foreground pixels in a mask given as rows of booleans.
#[pyfunction]
fn mask_foreground_ratio(mask: Vec<Vec<bool>>) -> PyResult<f64> {
    Ok(foreground_ratio(&to_mask(mask)?))
}

/// Kept frames and index mapping of a trimmed sequence.
#[pyclass(name = "TrimMap", frozen)]
struct PyTrimMap {
    inner: TrimSegmentMap,
}

#[pymethods]
impl PyTrimMap {
    #[new]
    fn new(runs: Vec<(usize, usize)>) -> PyResult<Self> {
        Ok(Self {
            inner: TrimSegmentMap::from_runs(runs).map_err(err)?,
        })
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: TrimSegmentMap::parse(text).map_err(err)?,
        })
    }

    #[getter]
    fn runs(&self) -> Vec<(usize, usize)> {
        self.inner.runs().to_vec()
    }

    fn kept_indices(&self) -> Vec<usize> {
        self.inner.kept_indices().collect()
    }

    fn original_index(&self, trimmed_index: usize) -> PyResult<usize> {
        map_to_original(&self.inner, trimmed_index).map_err(err)
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn __len__(&self) -> usize {
        self.inner.total_kept()
    }

    fn __repr__(&self) -> String {
        format!("TrimMap({:?})", self.inner.runs())
    }
}

/// Select the frames whose foreground ratio reaches `threshold`.
#[pyfunction]
#[pyo3(signature = (masks, threshold = 0.05, padding = 0))]
fn trim_frames(masks: Vec<Vec<Vec<bool>>>, threshold: f64, padding: usize) -> PyResult<PyTrimMap> {
    let masks = masks.into_iter().map(to_mask).collect::<PyResult<Vec<_>>>()?;
    Ok(PyTrimMap {
        inner: select_frames(&masks, &TrimConfig { threshold, padding }),
    })
}

/// Spearman rank correlation with average ranks for ties.
#[pyfunction]
fn spearman(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    rank_correlation(&a, &b).map_err(err)
}

/// Anomaly score of every segment row under saved weights.
#[pyfunction]
fn score_segments(features: Vec<Vec<f64>>, weights_path: PathBuf) -> PyResult<Vec<f64>> {
    let weights = MilWeights::load(weights_path).map_err(err)?;
    let features = SegmentFeatures::new(features).map_err(err)?;
    Ok(score_forward(&features, &weights).map_err(err)?.scores().to_vec())
}

/// One timing-table row: `mm:ss | MB | frames | seconds`.
#[pyfunction]
fn report_row(frames: usize, fps: f64, size_bytes: u64, seconds: f64) -> String {
    SequenceStats::new(frames, fps, size_bytes, seconds).row()
}

/// Write the synthetic demo scene and return the path of its config.
#[pyfunction]
#[pyo3(signature = (out, frames = 300, window = 50, seed = 0))]
fn write_demo(py: Python<'_>, out: PathBuf, frames: usize, window: usize, seed: u64) -> PyResult<PathBuf> {
    py.detach(|| synth::write_demo(&out, frames, window, seed)).map_err(err)?;
    Ok(out.join("pipeline.conf"))
}

/// Pipeline configuration; `run` executes every stage that is out of date.
#[pyclass(name = "Pipeline")]
struct PyPipeline {
    cfg: PipelineConfig,
}

#[pymethods]
impl PyPipeline {
    #[new]
    #[pyo3(signature = (config = None))]
    fn new(config: Option<PathBuf>) -> PyResult<Self> {
        let cfg = match config {
            Some(p) => PipelineConfig::load(p).map_err(err)?,
            None => PipelineConfig::default(),
        };
        Ok(Self { cfg })
    }

    fn set(&mut self, key: &str, value: &str) -> PyResult<()> {
        self.cfg.set(key, value).map_err(err)
    }

    fn entries(&self) -> Vec<(String, String)> {
        self.cfg.entries().into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    #[getter]
    fn output_dir(&self) -> PathBuf {
        self.cfg.output_dir()
    }

    fn run<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        self.cfg.validate().map_err(err)?;
        let cfg = self.cfg.clone();
        let outcome = py.detach(move || cmd_e2e(&cfg)).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("executed", outcome.executed)?;
        d.set_item("skipped", outcome.skipped)?;
        d.set_item("table", outcome.table)?;
        d.set_item("full_frames", outcome.summary.full_frames)?;
        d.set_item("trimmed_frames", outcome.summary.trimmed_frames)?;
        d.set_item("runs", outcome.summary.runs)?;
        d.set_item("correlation", outcome.summary.correlation)?;
        Ok(d)
    }
}

#[pymodule]
fn surveil(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SurveilError", m.py().get_type::<SurveilError>())?;
    m.add_class::<PyTrimMap>()?;
    m.add_class::<PyPipeline>()?;
    m.add_function(wrap_pyfunction!(sum_layer, m)?)?;
    m.add_function(wrap_pyfunction!(product_layer, m)?)?;
    m.add_function(wrap_pyfunction!(mask_foreground_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(trim_frames, m)?)?;
    m.add_function(wrap_pyfunction!(spearman, m)?)?;
    m.add_function(wrap_pyfunction!(score_segments, m)?)?;
    m.add_function(wrap_pyfunction!(report_row, m)?)?;
    m.add_function(wrap_pyfunction!(write_demo, m)?)?;
    Ok(())
}
