use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use surveil_core::pipeline::manifest::OutputLock;
use surveil_core::pipeline::stages::{CHECKPOINT_FILE, MASKS_DIR, MODEL_DIR, SCORES_FULL_DIR, SCORES_TRIMMED_DIR};
use surveil_core::pipeline::{
    cmd_e2e, cmd_infer, cmd_report, cmd_train_bg, cmd_train_mil, cmd_trim, mil_weights_path, read_stage_report,
    score_target, stage_dir, PipelineConfig,
};
use surveil_core::{synth, Error, Result};

/// Background subtraction, video trimming and anomaly scoring.
#[derive(Parser)]
#[command(name = "surveil", version)]
struct Cli {
    /// Pipeline config file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the background model on the labeled frames.
    TrainBg,
    /// Predict and refine a mask for every frame with enough history.
    Infer {
        /// Checkpoint to load instead of the one in the output root.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Keep frames whose foreground ratio reaches the threshold.
    Trim {
        #[arg(long)]
        masks: Option<PathBuf>,
    },
    /// Train the anomaly scorer on the bags in `paths.mil_bags`.
    TrainMil,
    /// Write the anomaly graph of the full or trimmed sequence.
    Score {
        #[arg(long, value_enum, default_value_t = Target::Full)]
        target: Target,
        #[arg(long)]
        weights: Option<PathBuf>,
    },
    /// Print the timing table of the scoring stages that have run.
    Report,
    /// Run every stage, skipping those whose outputs are current.
    E2e,
    /// Write a synthetic demo scene, labels, bags and config.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 300)]
        frames: usize,
        #[arg(long, default_value_t = 50)]
        window: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    Full,
    Trimmed,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    cfg.apply_overrides(&cli.overrides)?;
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    if let Command::Synth { out, frames, window, seed } = &cli.command {
        synth::write_demo(out, *frames, *window, *seed)?;
        println!("{}", out.join("pipeline.conf").display());
        return Ok(());
    }
    let cfg = load_config(&cli)?;
    if let Command::E2e = cli.command {
        let outcome = cmd_e2e(&cfg)?;
        print!("{}", outcome.table);
        println!("correlation\t{:.6}", outcome.summary.correlation);
        return Ok(());
    }
    let _lock = OutputLock::acquire(&cfg.output_dir())?;
    match cli.command {
        Command::TrainBg => println!("{}", cmd_train_bg(&cfg)?.display()),
        Command::Infer { checkpoint } => {
            let checkpoint = checkpoint.unwrap_or_else(|| stage_dir(&cfg, MODEL_DIR).join(CHECKPOINT_FILE));
            println!("{}", cmd_infer(&cfg, &checkpoint)?.display());
        }
        Command::Trim { masks } => {
            let masks = masks.unwrap_or_else(|| stage_dir(&cfg, MASKS_DIR));
            let (seq, map) = cmd_trim(&cfg, &masks)?;
            println!("{}\t{} frames kept", seq.directory().display(), map.total_kept());
        }
        Command::TrainMil => println!("{}", cmd_train_mil(&cfg)?.display()),
        Command::Score { target, weights } => {
            let weights = weights.unwrap_or_else(|| mil_weights_path(&cfg));
            let (series, report) = score_target(&cfg, matches!(target, Target::Trimmed), &weights)?;
            println!("{}\t{} segments\tmax {:.6}", report.row(), series.len(), series.max());
        }
        Command::Report => {
            let reports: Vec<_> = [SCORES_FULL_DIR, SCORES_TRIMMED_DIR]
                .iter()
                .map(|d| stage_dir(&cfg, d))
                .filter(|d| d.exists())
                .map(|d| read_stage_report(&d))
                .collect::<Result<_>>()?;
            if reports.is_empty() {
                return Err(Error::EmptyDirectory(stage_dir(&cfg, SCORES_FULL_DIR)));
            }
            print!("{}", cmd_report(&reports));
        }
        Command::E2e | Command::Synth { .. } => unreachable!(),
    }
    Ok(())
}

fn init_logging() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format(|buf, record| writeln!(buf, "{} {} {}", record.level(), record.target(), record.args()))
        .init();
}

fn main() -> ExitCode {
    init_logging();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!(target: "surveil", "{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
