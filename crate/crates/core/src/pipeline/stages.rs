//! Pipeline stages. Each stage reads its inputs from disk, writes into its
//! own directory under the output root and leaves a manifest behind.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use super::manifest::{fresh_dir, hash_bytes, hash_dir, hash_file, hash_parts, thread_cpu_seconds, Manifest, OutputLock};
use crate::adnn::{train, AdnnModel, InferencePlan};
use crate::error::{Error, Result};
use crate::frame_io::{
    frame_file_name, load_sequence, read_mask, write_mask, FrameSequence, FrameSource, SequenceStats,
};
use crate::histogram::{sample_training_set, HistoryStack};
use crate::mask::BinaryMask;
use crate::mil::{
    compare_graphs, load_bags, score_video, train_mil, video_features, MilWeights, ScoreSeries,
};
use crate::refine::refine;
use crate::trim::{emit_trimmed, foreground_ratio, map_to_original, select_by_ratio, TrimSegmentMap, MAP_FILE_NAME};

pub const MODEL_DIR: &str = "model";
pub const MASKS_DIR: &str = "masks";
pub const TRIMMED_DIR: &str = "trimmed";
pub const MIL_DIR: &str = "mil";
pub const SCORES_FULL_DIR: &str = "scores_full";
pub const SCORES_TRIMMED_DIR: &str = "scores_trimmed";
pub const REPORT_DIR: &str = "report";

pub const CHECKPOINT_FILE: &str = "checkpoint.txt";
pub const WEIGHTS_FILE: &str = "weights.json";
pub const STAGE_FILE: &str = "stage.json";
pub const GRAPH_PREFIX: &str = "graph";

pub const REPORT_HEADER: &str = "Duration | Size (MB) | Frames | Anomaly Detection (cpu - sec)";

/// Timing and sequence statistics of one measured stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: String,
    pub input: SequenceStats,
    pub output: Option<SequenceStats>,
    pub wall_seconds: f64,
}

impl StageReport {
    /// `duration | size | frames | seconds` of the stage input.
    pub fn row(&self) -> String {
        SequenceStats {
            wall_seconds: self.wall_seconds,
            ..self.input
        }
        .row()
    }

    pub fn tsv_row(&self) -> String {
        SequenceStats {
            wall_seconds: self.wall_seconds,
            ..self.input
        }
        .tsv_row()
    }
}

/// Results table: a header line, then one row per report in order.
pub fn cmd_report(reports: &[StageReport]) -> String {
    let mut out = format!("{REPORT_HEADER}\n");
    for r in reports {
        out.push_str(&r.row());
        out.push('\n');
    }
    out
}

pub fn report_tsv(reports: &[StageReport]) -> String {
    let mut out = String::from("stage\tduration\tsize_mb\tframes\tcpu_seconds\n");
    for r in reports {
        out.push_str(&format!("{}\t{}\n", r.stage, r.tsv_row()));
    }
    out
}

pub fn load_input(cfg: &PipelineConfig) -> Result<FrameSequence> {
    Ok(load_sequence(cfg.input_dir()?)?.with_fps(cfg.fps))
}

/// Ground-truth masks named by frame number, mapped to 0-based sequence
/// indices.
pub fn load_ground_truth(cfg: &PipelineConfig, seq: &FrameSequence) -> Result<Vec<(usize, BinaryMask)>> {
    let dir = cfg.ground_truth_dir()?;
    let gt = load_sequence(&dir)?;
    let mut out = Vec::new();
    for path in gt.files() {
        let number: u64 = path
            .file_stem()
            .and_then(|s| s.to_str())
            .and_then(|s| s.parse().ok())
            .expect("sequence files have numeric stems");
        let Some(index) = number.checked_sub(seq.first_number()).map(|i| i as usize) else {
            continue;
        };
        if index < seq.frame_count() {
            out.push((index, read_mask(path)?));
        }
    }
    Ok(out)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn stage_dir(cfg: &PipelineConfig, name: &str) -> PathBuf {
    cfg.output_dir().join(name)
}

pub fn fingerprint_train_bg(cfg: &PipelineConfig) -> Result<String> {
    Ok(hash_parts(&[
        "train-bg".to_string(),
        cfg.hash_keys(&["seed", "window.", "histogram.", "model.", "train."]),
        hash_dir(&cfg.input_dir()?)?,
        hash_dir(&cfg.ground_truth_dir()?)?,
    ]))
}

/// Train the background model on the labeled frames. Returns the checkpoint path.
pub fn cmd_train_bg(cfg: &PipelineConfig) -> Result<PathBuf> {
    let seq = load_input(cfg)?;
    let labeled = load_ground_truth(cfg, &seq)?;
    let fingerprint = fingerprint_train_bg(cfg)?;
    let window = cfg.temporal_window();
    log::info!(target: "train-bg", "{} frames, {} labeled", seq.frame_count(), labeled.len());
    let set = sample_training_set(&seq, &labeled, cfg.samples, cfg.seed, window, cfg.model.bins)?;
    let model = AdnnModel::new(cfg.model, cfg.seed)?;
    let (model, curve) = train(model, &set.samples, &cfg.train)?;
    log::info!(
        target: "train-bg",
        "{} samples, final loss {:.6}",
        set.samples.len(),
        curve.last().copied().unwrap_or(f64::NAN)
    );

    let dir = stage_dir(cfg, MODEL_DIR);
    fresh_dir(&dir)?;
    let checkpoint = dir.join(CHECKPOINT_FILE);
    model.save(&checkpoint)?;
    let mut loss = String::from("epoch,loss\n");
    for (e, l) in curve.iter().enumerate() {
        loss.push_str(&format!("{e},{l}\n"));
    }
    write_text(&dir.join("loss.csv"), &loss)?;
    Manifest::describe("train-bg", &cfg.hash(), &fingerprint, &dir)?.write(&dir)?;
    Ok(checkpoint)
}

pub fn fingerprint_infer(cfg: &PipelineConfig, checkpoint: &Path) -> Result<String> {
    Ok(hash_parts(&[
        "infer".to_string(),
        cfg.hash_keys(&["window.", "histogram.", "model.", "infer.", "refine."]),
        hash_dir(&cfg.input_dir()?)?,
        hash_file(checkpoint)?,
    ]))
}

/// Predict (and optionally refine) a mask for every frame with a full
/// history window. Returns the mask directory.
pub fn cmd_infer(cfg: &PipelineConfig, checkpoint: &Path) -> Result<PathBuf> {
    let seq = load_input(cfg)?;
    let model = AdnnModel::load(checkpoint)?;
    if model.config() != cfg.model {
        return Err(Error::CheckpointMismatch(format!(
            "checkpoint has {:?}, config asks for {:?}",
            model.config(),
            cfg.model
        )));
    }
    let fingerprint = fingerprint_infer(cfg, checkpoint)?;
    let l = cfg.window;
    let n = seq.frame_count();
    if n <= l {
        return Err(Error::InsufficientHistory { t: n.saturating_sub(1), window: l });
    }
    let plan = InferencePlan::new(&model);
    let dir = stage_dir(cfg, MASKS_DIR);
    fresh_dir(&dir)?;

    let mut frames = (0..l).map(|i| seq.luma_frame(i)).collect::<Result<Vec<_>>>()?;
    for t in l..n {
        let current = seq.luma_frame(t)?;
        frames.push(current.clone());
        let stack = HistoryStack { frames };
        let raw = plan.predict_stack(&stack, cfg.infer_threshold)?;
        let mask = if cfg.refine_enabled {
            refine(&raw, &current, &cfg.refine)?
        } else {
            raw
        };
        write_mask(&mask, dir.join(frame_file_name(t, 1)))?;
        frames = stack.frames;
        frames.remove(0);
        if (t - l) % 50 == 0 {
            log::debug!(target: "infer", "frame {t}: {} foreground pixels", mask.foreground_count());
        }
    }
    log::info!(target: "infer", "{} masks written, frames 0..{} skipped", n - l, l);
    let mut manifest = Manifest::describe("infer", &cfg.hash(), &fingerprint, &dir)?;
    manifest.skipped_frames = (0..l).collect();
    manifest.write(&dir)?;
    Ok(dir)
}

/// Masks of a mask directory, indexed by frame; frames without a mask are `None`.
pub fn load_masks(mask_dir: &Path, frames: usize, dims: (usize, usize)) -> Result<Vec<Option<BinaryMask>>> {
    (0..frames)
        .map(|t| {
            let path = mask_dir.join(frame_file_name(t, 1));
            if !path.exists() {
                return Ok(None);
            }
            let m = read_mask(&path)?;
            if (m.width(), m.height()) != dims {
                return Err(Error::DimensionMismatch(format!(
                    "{} is {}x{}, frames are {}x{}",
                    path.display(),
                    m.width(),
                    m.height(),
                    dims.0,
                    dims.1
                )));
            }
            Ok(Some(m))
        })
        .collect()
}

pub fn fingerprint_trim(cfg: &PipelineConfig, mask_dir: &Path) -> Result<String> {
    Ok(hash_parts(&[
        "trim".to_string(),
        cfg.hash_keys(&["trim."]),
        hash_dir(&cfg.input_dir()?)?,
        hash_dir(mask_dir)?,
    ]))
}

/// Keep the frames whose mask reaches the trim threshold and write them as
/// a new sequence with its map.
pub fn cmd_trim(cfg: &PipelineConfig, mask_dir: &Path) -> Result<(FrameSequence, TrimSegmentMap)> {
    let seq = load_input(cfg)?;
    let fingerprint = fingerprint_trim(cfg, mask_dir)?;
    let masks = load_masks(mask_dir, seq.frame_count(), seq.dims())?;
    let ratios: Vec<Option<f64>> = masks.iter().map(|m| m.as_ref().map(foreground_ratio)).collect();
    let map = select_by_ratio(&ratios, &cfg.trim);
    if map.is_empty() {
        let present: Vec<f64> = ratios.iter().flatten().copied().collect();
        let summary = if present.is_empty() {
            "no frame has a mask".to_string()
        } else {
            let mean = present.iter().sum::<f64>() / present.len() as f64;
            format!(
                "{} masked frames, ratio min {:.4} mean {:.4} max {:.4}",
                present.len(),
                present.iter().copied().fold(f64::INFINITY, f64::min),
                mean,
                present.iter().copied().fold(0.0, f64::max)
            )
        };
        return Err(Error::EmptySelection(format!(
            "no frame reaches foreground ratio {}: {summary}",
            cfg.trim.threshold
        )));
    }
    let dir = stage_dir(cfg, TRIMMED_DIR);
    if dir.exists() {
        fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let trimmed = emit_trimmed(&seq, &map, &dir)?;
    log::info!(
        target: "trim",
        "kept {} of {} frames in {} runs",
        map.total_kept(),
        seq.frame_count(),
        map.runs().len()
    );
    Manifest::describe("trim", &cfg.hash(), &fingerprint, &dir)?.write(&dir)?;
    Ok((trimmed, map))
}

fn bags_dir(cfg: &PipelineConfig) -> Result<PathBuf> {
    cfg.mil_bags
        .as_deref()
        .map(|p| cfg.resolve(p))
        .ok_or_else(|| Error::Config("paths.mil_bags is not set (needed to train MIL weights)".into()))
}

pub fn fingerprint_train_mil(cfg: &PipelineConfig) -> Result<String> {
    Ok(hash_parts(&[
        "train-mil".to_string(),
        cfg.hash_keys(&["seed", "mil.lambda", "mil.learning_rate", "mil.epochs", "mil.hidden"]),
        hash_dir(&bags_dir(cfg)?)?,
    ]))
}

/// Train MIL weights on the bags in `paths.mil_bags`. Returns the weights path.
pub fn cmd_train_mil(cfg: &PipelineConfig) -> Result<PathBuf> {
    let bags = load_bags(bags_dir(cfg)?)?;
    let fingerprint = fingerprint_train_mil(cfg)?;
    let (weights, history) = train_mil(&bags, &cfg.mil)?;
    log::info!(
        target: "train-mil",
        "{} bags, hinge {:.4} -> {:.4}",
        bags.len(),
        history.hinge.first().copied().unwrap_or(f64::NAN),
        history.hinge.last().copied().unwrap_or(f64::NAN)
    );
    let dir = stage_dir(cfg, MIL_DIR);
    fresh_dir(&dir)?;
    let path = dir.join(WEIGHTS_FILE);
    weights.save(&path)?;
    let mut loss = String::from("epoch,loss,hinge\n");
    for (e, (t, h)) in history.total.iter().zip(&history.hinge).enumerate() {
        loss.push_str(&format!("{e},{t},{h}\n"));
    }
    write_text(&dir.join("loss.csv"), &loss)?;
    Manifest::describe("train-mil", &cfg.hash(), &fingerprint, &dir)?.write(&dir)?;
    Ok(path)
}

/// `paths.mil_weights` when set, otherwise the trained weights in the output root.
pub fn mil_weights_path(cfg: &PipelineConfig) -> PathBuf {
    match &cfg.mil_weights {
        Some(p) => cfg.resolve(p),
        None => stage_dir(cfg, MIL_DIR).join(WEIGHTS_FILE),
    }
}

fn masks_hash(masks: Option<&[Option<BinaryMask>]>) -> String {
    let Some(masks) = masks else {
        return "no-masks".into();
    };
    let mut bytes = Vec::new();
    for m in masks {
        match m {
            None => bytes.push(2u8),
            Some(m) => bytes.extend(m.labels().iter().map(|&b| u8::from(b))),
        }
    }
    hash_bytes(&bytes)
}

pub fn fingerprint_score(
    cfg: &PipelineConfig,
    stage: &str,
    seq: &FrameSequence,
    weights: &MilWeights,
    masks: Option<&[Option<BinaryMask>]>,
) -> Result<String> {
    Ok(hash_parts(&[
        stage.to_string(),
        cfg.hash_keys(&["mil.segments", "score.", "sequence."]),
        hash_dir(seq.directory())?,
        hash_bytes(serde_json::to_string(weights).expect("weights serialize").as_bytes()),
        masks_hash(masks),
    ]))
}

/// Segment, describe and score `seq`, writing the anomaly graph into
/// `out_dir`. The CPU time of the whole stage goes into the report.
pub fn cmd_score(
    cfg: &PipelineConfig,
    stage: &str,
    seq: &FrameSequence,
    weights: &MilWeights,
    masks: Option<&[Option<BinaryMask>]>,
    out_dir: &Path,
) -> Result<(ScoreSeries, StageReport)> {
    let fingerprint = fingerprint_score(cfg, stage, seq, weights, masks)?;
    fresh_dir(out_dir)?;
    let (series, seconds) = timed_score(cfg.segments, seq, weights, masks, out_dir)?;
    let report = StageReport {
        stage: stage.to_string(),
        input: SequenceStats::new(seq.frame_count(), seq.fps(), seq.size_bytes()?, seconds),
        output: None,
        wall_seconds: seconds,
    };
    log::info!(target: "score", "{stage}: {} frames scored in {seconds:.3} cpu-s", seq.frame_count());
    write_text(
        &out_dir.join(STAGE_FILE),
        &serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    Manifest::describe(stage, &cfg.hash(), &fingerprint, out_dir)?.write(out_dir)?;
    Ok((series, report))
}

/// The measured part of scoring: features, network, graph files.
pub fn timed_score(
    segments: usize,
    seq: &FrameSequence,
    weights: &MilWeights,
    masks: Option<&[Option<BinaryMask>]>,
    out_dir: &Path,
) -> Result<(ScoreSeries, f64)> {
    let start = thread_cpu_seconds();
    let features = video_features(seq, segments, masks)?;
    let series = score_video(&features, weights, out_dir.join(GRAPH_PREFIX))?;
    Ok((series, thread_cpu_seconds() - start))
}

pub fn read_stage_report(dir: &Path) -> Result<StageReport> {
    let path = dir.join(STAGE_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::CorruptFile {
        path,
        reason: e.to_string(),
    })
}

/// Non-timing outcome of a full run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub full_frames: usize,
    pub trimmed_frames: usize,
    pub runs: Vec<(usize, usize)>,
    pub correlation: f64,
}

/// Write `report.txt`, `report.tsv` and `summary.json` into the report dir.
pub fn write_report(cfg: &PipelineConfig, reports: &[StageReport], summary: &RunSummary, fingerprint: &str) -> Result<String> {
    let dir = stage_dir(cfg, REPORT_DIR);
    fresh_dir(&dir)?;
    let table = cmd_report(reports);
    write_text(&dir.join("report.txt"), &table)?;
    write_text(&dir.join("report.tsv"), &report_tsv(reports))?;
    let mut json = serde_json::to_string_pretty(summary).expect("summary serializes");
    json.push('\n');
    write_text(&dir.join("summary.json"), &json)?;
    Manifest::describe("report", &cfg.hash(), fingerprint, &dir)?.write(&dir)?;
    Ok(table)
}

#[derive(Debug, Clone, PartialEq)]
pub struct E2eOutcome {
    pub executed: Vec<String>,
    pub skipped: Vec<String>,
    pub reports: Vec<StageReport>,
    pub summary: RunSummary,
    pub table: String,
}

struct Tracker {
    executed: Vec<String>,
    skipped: Vec<String>,
}

impl Tracker {
    /// Run `stage` unless its directory is current for `fingerprint` and no
    /// upstream stage ran. Returns whether it ran.
    fn step(&mut self, stage: &str, dir: &Path, fingerprint: &str, upstream_ran: bool, run: impl FnOnce() -> Result<()>) -> Result<bool> {
        if !upstream_ran && Manifest::is_current(dir, fingerprint) {
            log::info!(target: "e2e", "{stage}: up to date, skipped");
            self.skipped.push(stage.to_string());
            return Ok(false);
        }
        log::info!(target: "e2e", "{stage}: running");
        run()?;
        self.executed.push(stage.to_string());
        Ok(true)
    }
}

fn scoring_masks(
    cfg: &PipelineConfig,
    seq: &FrameSequence,
    map: Option<&TrimSegmentMap>,
    full_frames: usize,
) -> Result<Option<Vec<Option<BinaryMask>>>> {
    if !cfg.use_masks {
        return Ok(None);
    }
    let all = load_masks(&stage_dir(cfg, MASKS_DIR), full_frames, seq.dims())?;
    Ok(Some(match map {
        None => all,
        Some(map) => (0..map.total_kept())
            .map(|k| map_to_original(map, k).map(|o| all[o].clone()))
            .collect::<Result<_>>()?,
    }))
}

/// Score the full input or the trimmed sequence of an earlier run.
pub fn score_target(cfg: &PipelineConfig, trimmed: bool, weights: &Path) -> Result<(ScoreSeries, StageReport)> {
    let full = load_input(cfg)?;
    let weights = MilWeights::load(weights)?;
    let (stage, seq, masks, dir) = if trimmed {
        let trim_dir = stage_dir(cfg, TRIMMED_DIR);
        let map = TrimSegmentMap::read(trim_dir.join(MAP_FILE_NAME))?;
        let seq = load_sequence(&trim_dir)?.with_fps(cfg.fps);
        let masks = scoring_masks(cfg, &full, Some(&map), full.frame_count())?;
        ("score-trimmed", seq, masks, stage_dir(cfg, SCORES_TRIMMED_DIR))
    } else {
        let masks = scoring_masks(cfg, &full, None, full.frame_count())?;
        ("score-full", full, masks, stage_dir(cfg, SCORES_FULL_DIR))
    };
    cmd_score(cfg, stage, &seq, &weights, masks.as_deref(), &dir)
}

/// train-bg, infer, trim, train-mil, score (full and trimmed), compare and
/// report, skipping stages whose outputs are current.
pub fn cmd_e2e(cfg: &PipelineConfig) -> Result<E2eOutcome> {
    let root = cfg.output_dir();
    let _lock = OutputLock::acquire(&root)?;
    let mut tr = Tracker {
        executed: Vec::new(),
        skipped: Vec::new(),
    };
    let full = load_input(cfg)?;

    let model_dir = stage_dir(cfg, MODEL_DIR);
    let checkpoint = model_dir.join(CHECKPOINT_FILE);
    let ran_bg = tr.step("train-bg", &model_dir, &fingerprint_train_bg(cfg)?, false, || cmd_train_bg(cfg).map(drop))?;

    let mask_dir = stage_dir(cfg, MASKS_DIR);
    let ran_infer = tr.step("infer", &mask_dir, &fingerprint_infer(cfg, &checkpoint)?, ran_bg, || {
        cmd_infer(cfg, &checkpoint).map(drop)
    })?;

    let trim_dir = stage_dir(cfg, TRIMMED_DIR);
    let trim_fp = fingerprint_trim(cfg, &mask_dir)?;
    let ran_trim = tr.step("trim", &trim_dir, &trim_fp, ran_infer, || cmd_trim(cfg, &mask_dir).map(drop))?;
    let trimmed = load_sequence(&trim_dir)?.with_fps(cfg.fps);
    let map = TrimSegmentMap::read(trim_dir.join(MAP_FILE_NAME))?;

    let mut ran_mil = false;
    if cfg.mil_weights.is_none() {
        let mil_dir = stage_dir(cfg, MIL_DIR);
        ran_mil = tr.step("train-mil", &mil_dir, &fingerprint_train_mil(cfg)?, false, || {
            cmd_train_mil(cfg).map(drop)
        })?;
    }
    let weights = MilWeights::load(mil_weights_path(cfg))?;

    let full_masks = scoring_masks(cfg, &full, None, full.frame_count())?;
    let full_dir = stage_dir(cfg, SCORES_FULL_DIR);
    let fp = fingerprint_score(cfg, "score-full", &full, &weights, full_masks.as_deref())?;
    let ran_full = tr.step("score-full", &full_dir, &fp, ran_mil || (cfg.use_masks && ran_infer), || {
        cmd_score(cfg, "score-full", &full, &weights, full_masks.as_deref(), &full_dir).map(drop)
    })?;

    let trimmed_masks = scoring_masks(cfg, &full, Some(&map), full.frame_count())?;
    let trimmed_dir = stage_dir(cfg, SCORES_TRIMMED_DIR);
    let fp = fingerprint_score(cfg, "score-trimmed", &trimmed, &weights, trimmed_masks.as_deref())?;
    let ran_trimmed = tr.step("score-trimmed", &trimmed_dir, &fp, ran_mil || ran_trim, || {
        cmd_score(cfg, "score-trimmed", &trimmed, &weights, trimmed_masks.as_deref(), &trimmed_dir).map(drop)
    })?;

    let full_series = crate::mil::read_scores_csv(full_dir.join(format!("{GRAPH_PREFIX}.csv")))?;
    let trimmed_series = crate::mil::read_scores_csv(trimmed_dir.join(format!("{GRAPH_PREFIX}.csv")))?;
    let correlation = compare_graphs(&full_series, &trimmed_series, &map, full.frame_count())?;
    let reports = vec![read_stage_report(&full_dir)?, read_stage_report(&trimmed_dir)?];
    let summary = RunSummary {
        full_frames: full.frame_count(),
        trimmed_frames: map.total_kept(),
        runs: map.runs().to_vec(),
        correlation,
    };
    let report_dir = stage_dir(cfg, REPORT_DIR);
    let report_fp = hash_parts(&[
        "report".to_string(),
        cfg.hash_keys(&["sequence."]),
        hash_dir(&full_dir)?,
        hash_dir(&trimmed_dir)?,
        hash_dir(&trim_dir)?,
    ]);
    tr.step("report", &report_dir, &report_fp, ran_full || ran_trimmed || ran_trim, || {
        write_report(cfg, &reports, &summary, &report_fp).map(drop)
    })?;
    log::info!(target: "e2e", "graph rank correlation {correlation:.4}");
    Ok(E2eOutcome {
        executed: tr.executed,
        skipped: tr.skipped,
        table: cmd_report(&reports),
        reports,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(frames: usize, fps: f64, bytes: u64, secs: f64) -> StageReport {
        StageReport {
            stage: "score".into(),
            input: SequenceStats::new(frames, fps, bytes, 0.0),
            output: None,
            wall_seconds: secs,
        }
    }

    #[test]
    fn table_rows() {
        let t = cmd_report(&[report(11937, 30.0, 90_500_000, 789.0), report(7470, 30.0, 68_500_000, 540.0)]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines, vec![REPORT_HEADER, "06:37 | 90.5 | 11937 | 789", "04:09 | 68.5 | 7470 | 540"]);
        assert_eq!(cmd_report(&[report(300, 30.0, 1_234_567, 0.4)]).lines().nth(1), Some("00:10 | 1.2 | 300 | 0"));
    }

    #[test]
    fn tsv_rows_are_tab_separated() {
        let t = report_tsv(&[report(8990, 30.05, 104_000_000, 610.0)]);
        assert_eq!(t.lines().nth(1), Some("score\t04:59\t104.0\t8990\t610.000"));
    }
}
