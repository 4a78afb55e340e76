//! Configuration-driven orchestration: synthesize or ingest a corpus,
//! prepare frames, train the two networks, evaluate and predict.
//!
//! Every command reads one [`RunConfig`] and works inside its output
//! directory:
//!
//! ```text
//! <out>/corpus/manifest.json, <subject>/<trial>/{emg,imu,targets}.csv
//! <out>/prepared/frames-<hash>.bin, normalizer.json, summary.json
//! <out>/checkpoints/{angles,moments}.ckpt, {angles,moments}/{best,last}.ckpt
//! <out>/logs/train_{angles,moments}.jsonl
//! <out>/report/report.json, report.txt, traces/*.csv
//! ```

mod commands;
mod config;

pub use commands::{
    cmd_evaluate, cmd_predict, cmd_prepare, cmd_synth, cmd_train, select_eval_window,
    CheckpointInfo, EvaluationReport, PrepareSummary, SynthSummary, TrainSummary, TrialFrames,
};
pub use config::{CorpusSource, EvalSettings, Layout, RunConfig, SplitSpec, Which};

use std::path::PathBuf;

use thiserror::Error;

use crate::data::DataError;
use crate::eval::EvalError;
use crate::nn::NnError;
use crate::optim::OptimError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Process exit codes.
pub mod exit_code {
    pub const OK: i32 = 0;
    pub const VALIDATION: i32 = 2;
    pub const DATA: i32 = 3;
    pub const DIVERGED: i32 = 4;
    pub const IO: i32 = 5;
}

impl PipelineError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use exit_code::*;
        match self {
            Self::Validation(_) | Self::Nn(_) => VALIDATION,
            Self::Io { .. } => IO,
            Self::Data(DataError::Io { .. }) => IO,
            Self::Data(_) => DATA,
            Self::Optim(e) => match e {
                OptimError::Diverged { .. } | OptimError::NonFiniteGradient { .. } => DIVERGED,
                OptimError::Io { .. } => IO,
                OptimError::Config(_) | OptimError::Incompatible(_) | OptimError::Nn(_) => {
                    VALIDATION
                }
                _ => DATA,
            },
            Self::Eval(EvalError::Io { .. }) => IO,
            Self::Eval(_) => DATA,
        }
    }
}
