use serde::{Deserialize, Serialize};

use super::schema::{self, NUM_EMG, NUM_IMU, NUM_JOINTS, PREPARED_RATE_HZ};
use super::DataError;
use crate::dsp::{decimate, emg_envelope_with, EnvelopeConfig, TimeSeriesChannel};

/// Treadmill speed from `start_s` onwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedSegment {
    pub start_s: f64,
    pub speed_mps: f64,
}

/// One prepared trial: every channel at 100 Hz and of equal length, in
/// canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub subject_id: String,
    pub trial_id: String,
    /// 11 sEMG envelopes then 24 IMU channels.
    pub inputs: Vec<TimeSeriesChannel>,
    /// 6 joint angles (degrees).
    pub angles: Vec<TimeSeriesChannel>,
    /// 6 joint moments (N·m/kg).
    pub moments: Vec<TimeSeriesChannel>,
    pub speed_schedule: Vec<SpeedSegment>,
}

impl Trial {
    pub fn len(&self) -> usize {
        self.inputs.first().map_or(0, TimeSeriesChannel::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.inputs
            .first()
            .map_or(PREPARED_RATE_HZ, |c| c.sample_rate_hz)
    }

    /// Angles followed by moments.
    pub fn targets(&self) -> impl Iterator<Item = &TimeSeriesChannel> {
        self.angles.iter().chain(self.moments.iter())
    }

    pub(crate) fn targets_mut(&mut self) -> impl Iterator<Item = &mut TimeSeriesChannel> {
        self.angles.iter_mut().chain(self.moments.iter_mut())
    }

    fn all_channels(&self) -> impl Iterator<Item = &TimeSeriesChannel> {
        self.inputs.iter().chain(self.targets())
    }

    /// Checks channel counts, equal lengths and the common 100 Hz rate.
    pub fn validate(&self) -> Result<(), DataError> {
        if self.inputs.len() != schema::NUM_INPUTS
            || self.angles.len() != NUM_JOINTS
            || self.moments.len() != NUM_JOINTS
        {
            return Err(DataError::SchemaMismatch(format!(
                "trial {}/{} has {} inputs, {} angles, {} moments",
                self.subject_id,
                self.trial_id,
                self.inputs.len(),
                self.angles.len(),
                self.moments.len()
            )));
        }
        let n = self.len();
        for ch in self.all_channels() {
            if ch.len() != n {
                return Err(DataError::SchemaMismatch(format!(
                    "channel `{}` has {} samples, expected {n}",
                    ch.label,
                    ch.len()
                )));
            }
            if (ch.sample_rate_hz - PREPARED_RATE_HZ).abs() > 1e-9 {
                return Err(DataError::SchemaMismatch(format!(
                    "channel `{}` sampled at {} Hz, expected {PREPARED_RATE_HZ} Hz",
                    ch.label, ch.sample_rate_hz
                )));
            }
        }
        Ok(())
    }
}

/// Sensor streams at their native rates, before envelope extraction and
/// rate harmonization.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTrial {
    pub subject_id: String,
    pub trial_id: String,
    /// 11 raw sEMG channels (typically 1000 Hz).
    pub emg: Vec<TimeSeriesChannel>,
    /// 24 IMU channels (typically 200 Hz).
    pub imu: Vec<TimeSeriesChannel>,
    pub angles: Vec<TimeSeriesChannel>,
    pub moments: Vec<TimeSeriesChannel>,
    pub speed_schedule: Vec<SpeedSegment>,
}

fn to_prepared_rate(ch: &TimeSeriesChannel) -> Result<TimeSeriesChannel, DataError> {
    if (ch.sample_rate_hz - PREPARED_RATE_HZ).abs() < 1e-9 {
        Ok(ch.clone())
    } else {
        Ok(decimate(ch, PREPARED_RATE_HZ)?)
    }
}

/// Envelope extraction on sEMG, decimation of every stream to 100 Hz, and
/// truncation to the shortest resulting stream.
pub fn prepare_raw_trial(raw: &RawTrial, envelope: &EnvelopeConfig) -> Result<Trial, DataError> {
    if raw.emg.len() != NUM_EMG || raw.imu.len() != NUM_IMU {
        return Err(DataError::SchemaMismatch(format!(
            "raw trial {}/{} has {} sEMG and {} IMU channels",
            raw.subject_id,
            raw.trial_id,
            raw.emg.len(),
            raw.imu.len()
        )));
    }
    let mut inputs = Vec::with_capacity(schema::NUM_INPUTS);
    for ch in &raw.emg {
        inputs.push(to_prepared_rate(&emg_envelope_with(ch, envelope)?)?);
    }
    for ch in &raw.imu {
        inputs.push(to_prepared_rate(ch)?);
    }
    let mut angles = raw
        .angles
        .iter()
        .map(to_prepared_rate)
        .collect::<Result<Vec<_>, _>>()?;
    let mut moments = raw
        .moments
        .iter()
        .map(to_prepared_rate)
        .collect::<Result<Vec<_>, _>>()?;

    let n = inputs
        .iter()
        .chain(angles.iter())
        .chain(moments.iter())
        .map(TimeSeriesChannel::len)
        .min()
        .unwrap_or(0);
    for ch in inputs
        .iter_mut()
        .chain(angles.iter_mut())
        .chain(moments.iter_mut())
    {
        ch.samples.truncate(n);
    }
    let trial = Trial {
        subject_id: raw.subject_id.clone(),
        trial_id: raw.trial_id.clone(),
        inputs,
        angles,
        moments,
        speed_schedule: raw.speed_schedule.clone(),
    };
    trial.validate()?;
    Ok(trial)
}
