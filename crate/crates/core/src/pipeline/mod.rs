//! Deterministic, resumable orchestration of the whole flow: background
//! model training, mask inference, trimming, anomaly scoring and reporting.

pub mod config;
pub mod manifest;
pub mod stages;

pub use config::PipelineConfig;
pub use manifest::{thread_cpu_seconds, Manifest, OutputLock};
pub use stages::{
    cmd_e2e, cmd_infer, cmd_report, cmd_score, cmd_train_bg, cmd_train_mil, cmd_trim, mil_weights_path,
    read_stage_report, score_target, stage_dir, E2eOutcome, RunSummary, StageReport,
};
