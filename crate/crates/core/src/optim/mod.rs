//! Adam/AMSGrad, the training loop and checkpoint files.

mod adam;
mod checkpoint;
mod train;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use train::{
    train, EpochRecord, NoopObserver, ResumePoint, TrainConfig, TrainData, TrainEvent, TrainObserver,
    TrainOutcome,
};

use std::path::PathBuf;

use thiserror::Error;

use crate::nn::NnError;

#[derive(Debug, Error)]
pub enum OptimError {
    #[error("non-finite gradient in `{name}`")]
    NonFiniteGradient { name: String },
    #[error("gradient/parameter shape mismatch in `{name}`")]
    GradientShape { name: String },
    #[error("training loss became non-finite at epoch {epoch}, batch {batch}")]
    Diverged {
        epoch: usize,
        batch: usize,
        /// Best checkpoint reached before the failure, if any.
        last_good: Option<Box<Checkpoint>>,
    },
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },
    #[error("cannot resume: {0}")]
    Incompatible(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl OptimError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}
