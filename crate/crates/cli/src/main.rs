//! `gaitformer`: command-line front end of the forecasting pipeline.
//!
//! Exit codes: 0 success, 2 invalid configuration or arguments, 3 data
//! errors (unreadable or corrupt corpus, cache or checkpoint; split leak),
//! 4 training divergence, 5 I/O failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gaitformer_core::eval::MetricScale;
use gaitformer_core::pipeline::{
    cmd_evaluate, cmd_predict, cmd_prepare, cmd_synth, cmd_train, exit_code, PipelineError,
    RunConfig, Which,
};

#[derive(Parser)]
#[command(name = "gaitformer", version, about = "Joint angle and moment forecasting from sEMG and IMU windows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Forces serial execution.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus.
    Synth(Common),
    /// Envelope, decimate, split, normalize and frame the corpus.
    Prepare(Common),
    /// Train the angle and/or moment network.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "both")]
        which: Which,
        /// Overrides `train.epochs`.
        #[arg(long)]
        epochs: Option<usize>,
        /// Continue from the last checkpoint of a previous run.
        #[arg(long)]
        resume: bool,
    },
    /// Score trained networks on the held-out subject.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "both")]
        which: Which,
        /// normalized (x100) or physical units.
        #[arg(long)]
        scale: Option<MetricScale>,
        /// Also write per-joint trace CSVs.
        #[arg(long)]
        traces: bool,
    },
    /// Forecast one window and print the horizon block.
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "both")]
        which: Which,
        /// 100 Hz CSV with the 35 prepared input columns; its last window is used.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

fn load_config(common: &Common) -> Result<RunConfig, PipelineError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    cfg.deterministic |= common.deterministic;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Synth(common) => {
            let s = cmd_synth(&load_config(&common)?)?;
            println!(
                "{} subjects, {} trials -> {} (corpus {})",
                s.subjects,
                s.trials,
                s.manifest.display(),
                s.config_hash
            );
        }
        Command::Prepare(common) => {
            let s = cmd_prepare(&load_config(&common)?)?;
            println!(
                "frames: train {} / val {} ({}) / test {} ({}); lineage {}",
                s.train_frames,
                s.val_frames,
                s.split.val_subject,
                s.test_frames,
                s.split.test_subject,
                s.lineage
            );
            for t in &s.trials {
                println!(
                    "  {:>5} {}/{}: {} samples, {} frames",
                    t.role, t.subject, t.trial, t.samples, t.frames
                );
            }
        }
        Command::Train {
            common,
            which,
            epochs,
            resume,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            for s in cmd_train(&cfg, which, resume)? {
                println!(
                    "{}: {} epochs, best epoch {} (val mse {}), checkpoint {}",
                    s.network,
                    s.epochs_run,
                    s.best_epoch,
                    s.best_val_mse.map_or("-".into(), |v| format!("{v:.6}")),
                    s.checkpoint.display()
                );
            }
        }
        Command::Evaluate {
            common,
            which,
            scale,
            traces,
        } => {
            let mut cfg = load_config(&common)?;
            cfg.evaluation.traces |= traces;
            let report = cmd_evaluate(&cfg, which, scale)?;
            print!(
                "{}",
                gaitformer_core::eval::render_table(&report.metrics)
            );
        }
        Command::Predict {
            common,
            which,
            input,
        } => {
            let cfg = load_config(&common)?;
            for (family, block) in cmd_predict(&cfg, which, input.as_deref())? {
                println!("# {family}");
                let header: Vec<String> = gaitformer_core::data::schema::JOINTS
                    .iter()
                    .map(|j| format!("{}_{j}", family.quantity()))
                    .collect();
                println!("step,{}", header.join(","));
                for (i, row) in block.rows().into_iter().enumerate() {
                    let cells: Vec<String> = row.iter().map(|v| format!("{v:.4}")).collect();
                    println!("{},{}", i + 1, cells.join(","));
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let level = std::env::var("GAIT_LOG_LEVEL").unwrap_or_else(|_| "info".into());
    env_logger::Builder::new()
        .parse_filters(&level)
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::from(exit_code::OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
