use serde::{Deserialize, Serialize};

use super::DspError;

/// A uniformly sampled scalar signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesChannel {
    pub label: String,
    pub sample_rate_hz: f64,
    pub samples: Vec<f64>,
}

impl TimeSeriesChannel {
    pub fn new(
        label: impl Into<String>,
        sample_rate_hz: f64,
        samples: Vec<f64>,
    ) -> Result<Self, DspError> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(DspError::InvalidSampleRate(sample_rate_hz));
        }
        Ok(Self {
            label: label.into(),
            sample_rate_hz,
            samples,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    /// Index of the first NaN/Inf sample, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.samples.iter().position(|v| !v.is_finite())
    }

    /// Same label and rate, new samples.
    pub(crate) fn with_samples(&self, samples: Vec<f64>) -> Self {
        Self {
            label: self.label.clone(),
            sample_rate_hz: self.sample_rate_hz,
            samples,
        }
    }
}
