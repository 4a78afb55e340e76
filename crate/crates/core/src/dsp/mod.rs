//! Causal signal conditioning for the sensor streams.
//!
//! Butterworth designs are realized as cascades of normalized biquads
//! (bilinear transform with frequency prewarping). Every filter in this
//! module is causal and starts from a zeroed state so the same code path
//! serves offline preparation and sample-by-sample streaming.

mod butterworth;
mod channel;
mod envelope;

pub use butterworth::{design_butterworth, Biquad, BiquadCascade, FilterKind, FilterState};
pub use channel::TimeSeriesChannel;
pub use envelope::{decimate, emg_envelope, emg_envelope_with, filter_causal, rectify, EnvelopeConfig};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DspError {
    #[error("cutoff {cutoff_hz} Hz must lie strictly between 0 and Nyquist ({nyquist_hz} Hz)")]
    CutoffOutOfRange { cutoff_hz: f64, nyquist_hz: f64 },
    #[error("filter order must be a positive even integer, got {0}")]
    InvalidOrder(usize),
    #[error("sample rate must be positive and finite, got {0}")]
    InvalidSampleRate(f64),
    #[error("channel `{label}` has a non-finite sample at index {index}")]
    NonFinite { label: String, index: usize },
    #[error("channel `{0}` is empty")]
    Empty(String),
    #[error("rate ratio {from_hz} Hz -> {to_hz} Hz is not a positive integer")]
    NonIntegerRatio { from_hz: f64, to_hz: f64 },
}
