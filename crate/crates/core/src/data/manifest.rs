use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::schema::{self, EMG_RATE_HZ, IMU_RATE_HZ, PREPARED_RATE_HZ};
use super::{load_stream, load_trial, prepare_raw_trial, ColumnMap, DataError, RawTrial, SpeedSegment, Trial};
use crate::dsp::EnvelopeConfig;

pub const MANIFEST_VERSION: u32 = 1;

/// Where the samples of one trial live, relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrialFiles {
    /// Native-rate streams; envelope extraction and decimation still pending.
    Raw {
        emg: PathBuf,
        imu: PathBuf,
        targets: PathBuf,
        #[serde(default = "default_emg_rate")]
        emg_rate_hz: f64,
        #[serde(default = "default_imu_rate")]
        imu_rate_hz: f64,
        #[serde(default = "default_target_rate")]
        target_rate_hz: f64,
    },
    /// A single 100 Hz file with all 47 canonical channels.
    Prepared { trial: PathBuf },
}

fn default_emg_rate() -> f64 {
    EMG_RATE_HZ
}
fn default_imu_rate() -> f64 {
    IMU_RATE_HZ
}
fn default_target_rate() -> f64 {
    PREPARED_RATE_HZ
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestTrial {
    pub id: String,
    #[serde(default)]
    pub speed_schedule: Vec<SpeedSegment>,
    pub files: TrialFiles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestSubject {
    pub id: String,
    pub trials: Vec<ManifestTrial>,
}

/// Corpus index: subjects → trials → files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub version: u32,
    /// Lineage hash of whatever produced the corpus.
    #[serde(default)]
    pub config_hash: String,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Generation parameters for synthetic corpora.
    #[serde(default)]
    pub generator: Option<serde_json::Value>,
    #[serde(default)]
    pub column_map: ColumnMap,
    pub subjects: Vec<ManifestSubject>,
}

impl CorpusManifest {
    pub fn load(path: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
        let manifest: Self = serde_json::from_str(&text)
            .map_err(|e| DataError::Manifest(format!("{}: {e}", path.display())))?;
        if manifest.version != MANIFEST_VERSION {
            return Err(DataError::Manifest(format!(
                "{}: unsupported version {}",
                path.display(),
                manifest.version
            )));
        }
        Ok(manifest)
    }

    pub fn save(&self, path: &Path) -> Result<(), DataError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text).map_err(|e| DataError::io(path, e))
    }

    pub fn subject_ids(&self) -> Vec<&str> {
        self.subjects.iter().map(|s| s.id.as_str()).collect()
    }

    pub fn subject(&self, id: &str) -> Result<&ManifestSubject, DataError> {
        self.subjects
            .iter()
            .find(|s| s.id == id)
            .ok_or_else(|| DataError::UnknownSubject(id.to_string()))
    }

    pub fn load_raw(
        &self,
        base_dir: &Path,
        subject: &str,
        trial: &ManifestTrial,
    ) -> Result<Option<RawTrial>, DataError> {
        let TrialFiles::Raw {
            emg,
            imu,
            targets,
            emg_rate_hz,
            imu_rate_hz,
            target_rate_hz,
        } = &trial.files
        else {
            return Ok(None);
        };
        let map = &self.column_map;
        let emg = load_stream(&base_dir.join(emg), &schema::emg_columns(), *emg_rate_hz, map)?;
        let imu = load_stream(&base_dir.join(imu), &schema::imu_columns(), *imu_rate_hz, map)?;
        let mut angles = load_stream(
            &base_dir.join(targets),
            &schema::target_columns(),
            *target_rate_hz,
            map,
        )?;
        let moments = angles.split_off(schema::NUM_JOINTS);
        Ok(Some(RawTrial {
            subject_id: subject.to_string(),
            trial_id: trial.id.clone(),
            emg,
            imu,
            angles,
            moments,
            speed_schedule: trial.speed_schedule.clone(),
        }))
    }

    /// Loads one trial and brings it to the prepared 100 Hz form.
    pub fn load_prepared(
        &self,
        base_dir: &Path,
        subject: &str,
        trial: &ManifestTrial,
        envelope: &EnvelopeConfig,
    ) -> Result<Trial, DataError> {
        match &trial.files {
            TrialFiles::Prepared { trial: file } => {
                let mut t = load_trial(&base_dir.join(file), subject, &trial.id, &self.column_map)?;
                t.speed_schedule = trial.speed_schedule.clone();
                Ok(t)
            }
            TrialFiles::Raw { .. } => {
                let raw = self
                    .load_raw(base_dir, subject, trial)?
                    .expect("raw variant yields a raw trial");
                prepare_raw_trial(&raw, envelope)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shape() {
        let m = CorpusManifest {
            version: MANIFEST_VERSION,
            config_hash: "abc".into(),
            seed: Some(1),
            generator: None,
            column_map: ColumnMap::default(),
            subjects: vec![ManifestSubject {
                id: "S01".into(),
                trials: vec![ManifestTrial {
                    id: "T01".into(),
                    speed_schedule: vec![SpeedSegment { start_s: 0.0, speed_mps: 1.0 }],
                    files: TrialFiles::Prepared {
                        trial: "S01/T01.csv".into(),
                    },
                }],
            }],
        };
        let v = serde_json::to_value(&m).unwrap();
        assert_eq!(v["subjects"][0]["trials"][0]["files"]["kind"], "prepared");
        let back: CorpusManifest = serde_json::from_value(v).unwrap();
        assert_eq!(back, m);
        assert!(m.subject("S02").is_err());
    }
}
