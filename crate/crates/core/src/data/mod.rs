//! Trials, corpora and the path from raw streams to shuffled training frames.

mod cache;
mod csv_io;
mod frames;
mod manifest;
mod normalize;
pub mod schema;
mod split;
mod synth;
mod trial;

pub use cache::{read_frame_cache, write_frame_cache, FrameCache, FrameCacheHeader};
pub use csv_io::{load_stream, load_trial, write_stream, write_trial, ColumnMap};
pub use frames::{
    frame_count, make_frames, shuffle_frames, sort_frames, Frame, FramingConfig, FramingWarning,
};
pub use manifest::{CorpusManifest, ManifestSubject, ManifestTrial, TrialFiles, MANIFEST_VERSION};
pub use normalize::{fit_normalizer, ChannelRange, Normalizer};
pub use schema::TargetFamily;
pub use split::{split_loso, Split};
pub use synth::{synth_subject, SubjectModel, SynthProfile};
pub use trial::{prepare_raw_trial, RawTrial, SpeedSegment, Trial};

use std::path::PathBuf;

use thiserror::Error;

use crate::dsp::DspError;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: String },
    #[error("{path}: row {row} has {found} cells, expected {expected}")]
    RaggedRow {
        path: PathBuf,
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("{path}: row {row}, column `{column}`: cannot parse `{cell}` as a number")]
    NonNumeric {
        path: PathBuf,
        row: usize,
        column: String,
        cell: String,
    },
    #[error("{path}: row {row}, column `{column}`: non-finite value `{cell}`")]
    NonFinite {
        path: PathBuf,
        row: usize,
        column: String,
        cell: String,
    },
    #[error("{path}: row {row}: sample spacing implies {found_hz:.3} Hz, expected {expected_hz} Hz")]
    RateMismatch {
        path: PathBuf,
        row: usize,
        expected_hz: f64,
        found_hz: f64,
    },
    #[error("{path}: no data rows")]
    EmptyFile { path: PathBuf },
    #[error("channel schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("unknown subject `{0}`")]
    UnknownSubject(String),
    #[error("duplicate subject `{0}`")]
    DuplicateSubject(String),
    #[error("test and validation subject must differ (both `{0}`)")]
    SameTestAndVal(String),
    #[error("invalid synthetic profile: {0}")]
    InvalidProfile(String),
    #[error("invalid framing config: {0}")]
    InvalidFraming(String),
    #[error("split leak: {0}")]
    Leak(String),
    #[error("frame cache: {0}")]
    Cache(String),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl DataError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.into(),
            source,
        }
    }
}
