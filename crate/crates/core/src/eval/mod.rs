//! Two-horizon extraction, agreement metrics and tabular reports.

mod horizons;
mod metrics;
mod report;

pub use horizons::{extract_horizons, Horizon, HorizonRows, HorizonSeries};
pub use metrics::{
    average_ranks, error_metrics, pearson, r_squared, spearman_p_value, spearman_rho,
    ErrorMetrics, MetricScale,
};
pub use report::{build_report, render_table, write_trace_csvs, MetricRow, MetricsReport};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("series lengths differ: {0} vs {1}")]
    Length(usize, usize),
    #[error("need at least {needed} samples, got {found}")]
    TooShort { needed: usize, found: usize },
    #[error("predictions do not align with frames: {0}")]
    Misaligned(String),
    #[error("evaluation frames are not contiguous: {0}")]
    NonContiguous(String),
    #[error("report is missing cells: {}", .0.join(", "))]
    MissingCells(Vec<String>),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}
