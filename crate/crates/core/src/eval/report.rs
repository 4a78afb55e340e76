use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    error_metrics, r_squared, spearman_p_value, spearman_rho, EvalError, Horizon, HorizonSeries,
    MetricScale,
};
use crate::data::schema::JOINTS;
use crate::data::TargetFamily;

/// One cell group of the table: a joint at one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub joint: String,
    pub quantity: String,
    pub horizon: Horizon,
    pub n: usize,
    pub rho: Option<f64>,
    pub rho_p_value: Option<f64>,
    pub r2: Option<f64>,
    pub mae: f64,
    pub rmse: f64,
    pub nrmse: Option<f64>,
    pub scale: MetricScale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scale: MetricScale,
    pub test_subject: Option<String>,
    pub frames: usize,
    pub rows: Vec<MetricRow>,
}

impl MetricsReport {
    pub fn row(&self, quantity: &str, joint: &str, horizon: Horizon) -> Option<&MetricRow> {
        self.rows
            .iter()
            .find(|r| r.quantity == quantity && r.joint == joint && r.horizon == horizon)
    }
}

/// Computes every metric for each series. Every joint × horizon of each
/// family in `families` must be present.
pub fn build_report(
    series: &[HorizonSeries],
    families: &[TargetFamily],
    scale: MetricScale,
    test_subject: Option<&str>,
) -> Result<MetricsReport, EvalError> {
    let present: BTreeSet<(&str, &str, Horizon)> = series
        .iter()
        .map(|s| (s.family.quantity(), s.joint.as_str(), s.horizon))
        .collect();
    let mut missing = Vec::new();
    for family in families {
        for joint in JOINTS {
            for h in Horizon::ALL {
                if !present.contains(&(family.quantity(), joint, h)) {
                    missing.push(format!("{} {joint} {h}", family.quantity()));
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(EvalError::MissingCells(missing));
    }
    let mut rows = Vec::with_capacity(series.len());
    for family in families {
        for h in Horizon::ALL {
            for joint in JOINTS {
                let s = series
                    .iter()
                    .find(|s| s.family == *family && s.joint == joint && s.horizon == h)
                    .expect("presence checked");
                let rho = spearman_rho(&s.truth, &s.pred)?;
                let err = error_metrics(&s.truth, &s.pred, scale)?;
                rows.push(MetricRow {
                    joint: joint.to_string(),
                    quantity: family.quantity().to_string(),
                    horizon: h,
                    n: s.truth.len(),
                    rho,
                    rho_p_value: rho.and_then(|r| spearman_p_value(r, s.truth.len())),
                    r2: r_squared(&s.truth, &s.pred)?,
                    mae: err.mae,
                    rmse: err.rmse,
                    nrmse: err.nrmse,
                    scale,
                });
            }
        }
    }
    let frames = series.first().map_or(0, |s| s.truth.len());
    Ok(MetricsReport {
        scale,
        test_subject: test_subject.map(str::to_string),
        frames,
        rows,
    })
}

fn cell(v: Option<f64>, decimals: usize) -> String {
    v.map_or("-".to_string(), |x| format!("{x:.decimals$}"))
}

/// Aligned text table: one section per quantity, one line per joint, CH and
/// DH metric groups side by side.
pub fn render_table(report: &MetricsReport) -> String {
    let mut out = String::new();
    let unit = match report.scale {
        MetricScale::NormalizedX100 => "MAE, RMSE, nRMSE on the normalized scale x100",
        MetricScale::Physical => "MAE, RMSE in deg or N.m/kg; nRMSE unitless",
    };
    let header_metrics = format!(
        "{:>7} {:>7} {:>8} {:>8} {:>8}",
        "rho", "R2", "MAE", "RMSE", "nRMSE"
    );
    let quantities: Vec<&str> = {
        let mut q: Vec<&str> = report.rows.iter().map(|r| r.quantity.as_str()).collect();
        q.dedup();
        q
    };
    for quantity in quantities {
        let title = if quantity == "angle" {
            "Joint angles"
        } else {
            "Joint moments"
        };
        let _ = writeln!(out, "{title}");
        let _ = writeln!(
            out,
            "{:<9} | {:^41} | {:^41}",
            "joint", "CH (30 ms)", "DH (250 ms)"
        );
        let _ = writeln!(out, "{:<9} | {header_metrics} | {header_metrics}", "");
        for joint in JOINTS {
            let _ = write!(out, "{joint:<9}");
            for h in Horizon::ALL {
                match report.row(quantity, joint, h) {
                    Some(r) => {
                        let _ = write!(
                            out,
                            " | {:>7} {:>7} {:>8.3} {:>8.3} {:>8}",
                            cell(r.rho, 3),
                            cell(r.r2, 3),
                            r.mae,
                            r.rmse,
                            cell(r.nrmse, 3)
                        );
                    }
                    None => {
                        let _ = write!(out, " | {:^41}", "-");
                    }
                }
            }
            out.push('\n');
        }
        out.push('\n');
    }
    let _ = writeln!(
        out,
        "{} frames{}; {unit}",
        report.frames,
        report
            .test_subject
            .as_deref()
            .map_or(String::new(), |s| format!(" of subject {s}"))
    );
    out
}

/// One `time_s,truth,prediction` CSV per series, named
/// `trace_<quantity>_<joint>_<horizon>.csv`.
pub fn write_trace_csvs(
    dir: &Path,
    series: &[HorizonSeries],
    sample_rate_hz: f64,
) -> Result<Vec<PathBuf>, EvalError> {
    std::fs::create_dir_all(dir).map_err(|source| EvalError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut paths = Vec::new();
    for s in series {
        let path = dir.join(format!(
            "trace_{}_{}_{}.csv",
            s.family.quantity(),
            s.joint,
            s.horizon
        ));
        let mut text = String::from("time_s,truth,prediction\n");
        for ((&i, t), p) in s.sample_index.iter().zip(&s.truth).zip(&s.pred) {
            let _ = writeln!(text, "{},{t},{p}", i as f64 / sample_rate_hz);
        }
        std::fs::write(&path, text).map_err(|source| EvalError::Io {
            path: path.clone(),
            source,
        })?;
        paths.push(path);
    }
    Ok(paths)
}
