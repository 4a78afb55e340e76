//! CSV ingestion and export.
//!
//! Every file carries a `time_s` column followed by named channels. Row
//! numbers in errors count data rows from 1 (the header is not counted).

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::schema::{self, PREPARED_RATE_HZ, TIME_COLUMN};
use super::{DataError, Trial};
use crate::dsp::TimeSeriesChannel;

/// Maps canonical column names to the names used in a source file.
/// Columns absent from the map are looked up under their canonical name.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ColumnMap(pub BTreeMap<String, String>);

impl ColumnMap {
    pub fn source_name<'a>(&'a self, canonical: &'a str) -> &'a str {
        self.0.get(canonical).map_or(canonical, String::as_str)
    }

    pub fn from_json_file(path: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| DataError::Manifest(format!("{}: {e}", path.display())))
    }
}

/// Relative tolerance on sample spacing.
const RATE_TOLERANCE: f64 = 0.01;

/// Reads `columns` (canonical names) from a CSV sampled at `expected_rate_hz`.
pub fn load_stream(
    path: &Path,
    columns: &[String],
    expected_rate_hz: f64,
    map: &ColumnMap,
) -> Result<Vec<TimeSeriesChannel>, DataError> {
    let csv_err = |source| DataError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let header = reader.headers().map_err(csv_err)?.clone();
    let locate = |canonical: &str| {
        let name = map.source_name(canonical);
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn {
                path: path.to_path_buf(),
                column: name.to_string(),
            })
    };
    let time_idx = locate(TIME_COLUMN)?;
    let idx: Vec<usize> = columns
        .iter()
        .map(|c| locate(c))
        .collect::<Result<_, _>>()?;

    let mut data: Vec<Vec<f64>> = vec![Vec::new(); columns.len()];
    let mut prev_time: Option<f64> = None;
    let period = 1.0 / expected_rate_hz;
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(csv_err)?;
        if record.len() != header.len() {
            return Err(DataError::RaggedRow {
                path: path.to_path_buf(),
                row,
                found: record.len(),
                expected: header.len(),
            });
        }
        let cell = |col: usize| -> Result<f64, DataError> {
            let raw = &record[col];
            let value: f64 = raw.parse().map_err(|_| DataError::NonNumeric {
                path: path.to_path_buf(),
                row,
                column: header[col].to_string(),
                cell: raw.to_string(),
            })?;
            if !value.is_finite() {
                return Err(DataError::NonFinite {
                    path: path.to_path_buf(),
                    row,
                    column: header[col].to_string(),
                    cell: raw.to_string(),
                });
            }
            Ok(value)
        };
        let t = cell(time_idx)?;
        if let Some(prev) = prev_time {
            let dt = t - prev;
            if (dt - period).abs() > RATE_TOLERANCE * period {
                return Err(DataError::RateMismatch {
                    path: path.to_path_buf(),
                    row,
                    expected_hz: expected_rate_hz,
                    found_hz: 1.0 / dt,
                });
            }
        }
        prev_time = Some(t);
        for (dst, &col) in data.iter_mut().zip(&idx) {
            dst.push(cell(col)?);
        }
    }
    if prev_time.is_none() {
        return Err(DataError::EmptyFile {
            path: path.to_path_buf(),
        });
    }
    Ok(columns
        .iter()
        .zip(data)
        .map(|(name, samples)| TimeSeriesChannel {
            label: name.clone(),
            sample_rate_hz: expected_rate_hz,
            samples,
        })
        .collect())
}

/// Reads a prepared 100 Hz trial with all 47 canonical channels.
pub fn load_trial(
    path: &Path,
    subject_id: &str,
    trial_id: &str,
    map: &ColumnMap,
) -> Result<Trial, DataError> {
    let mut channels = load_stream(path, &schema::trial_columns(), PREPARED_RATE_HZ, map)?;
    let moments = channels.split_off(schema::NUM_INPUTS + schema::NUM_JOINTS);
    let angles = channels.split_off(schema::NUM_INPUTS);
    let trial = Trial {
        subject_id: subject_id.to_string(),
        trial_id: trial_id.to_string(),
        inputs: channels,
        angles,
        moments,
        speed_schedule: Vec::new(),
    };
    trial.validate()?;
    Ok(trial)
}

/// Writes equally sampled channels with a leading `time_s` column.
pub fn write_stream(path: &Path, channels: &[&TimeSeriesChannel]) -> Result<(), DataError> {
    let io = |e| DataError::io(path, e);
    let first = channels
        .first()
        .ok_or_else(|| DataError::SchemaMismatch("no channels to write".into()))?;
    let n = first.len();
    let rate = first.sample_rate_hz;
    if channels
        .iter()
        .any(|c| c.len() != n || c.sample_rate_hz != rate)
    {
        return Err(DataError::SchemaMismatch(
            "channels written to one file must share length and rate".into(),
        ));
    }
    let file = std::fs::File::create(path).map_err(io)?;
    let mut out = std::io::BufWriter::new(file);
    let mut line = String::from(TIME_COLUMN);
    for c in channels {
        line.push(',');
        line.push_str(&c.label);
    }
    writeln!(out, "{line}").map_err(io)?;
    for i in 0..n {
        line.clear();
        line.push_str(&format!("{}", i as f64 / rate));
        for c in channels {
            line.push(',');
            line.push_str(&format!("{}", c.samples[i]));
        }
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn write_trial(path: &Path, trial: &Trial) -> Result<(), DataError> {
    let channels: Vec<&TimeSeriesChannel> = trial.inputs.iter().chain(trial.targets()).collect();
    write_stream(path, &channels)
}
