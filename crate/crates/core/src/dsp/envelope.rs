use serde::{Deserialize, Serialize};

use super::{design_butterworth, BiquadCascade, DspError, FilterKind, TimeSeriesChannel};

/// Runs `cascade` over `channel` from a zeroed state.
///
/// Output sample `n` depends on input samples `0..=n` only.
pub fn filter_causal(
    cascade: &BiquadCascade,
    channel: &TimeSeriesChannel,
) -> Result<TimeSeriesChannel, DspError> {
    if channel.is_empty() {
        return Err(DspError::Empty(channel.label.clone()));
    }
    if let Some(index) = channel.first_non_finite() {
        return Err(DspError::NonFinite {
            label: channel.label.clone(),
            index,
        });
    }
    let mut state = cascade.new_state();
    let out = channel
        .samples
        .iter()
        .map(|&x| cascade.process_sample(&mut state, x))
        .collect();
    Ok(channel.with_samples(out))
}

/// Full-wave rectification.
pub fn rectify(channel: &TimeSeriesChannel) -> TimeSeriesChannel {
    channel.with_samples(channel.samples.iter().map(|v| v.abs()).collect())
}

/// Parameters of the high-pass / rectify / low-pass envelope chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeConfig {
    pub highpass_hz: f64,
    pub lowpass_hz: f64,
    pub order: usize,
}

impl Default for EnvelopeConfig {
    fn default() -> Self {
        Self {
            highpass_hz: 25.0,
            lowpass_hz: 6.0,
            order: 2,
        }
    }
}

/// sEMG envelope with the default 25 Hz high-pass and 6 Hz low-pass.
pub fn emg_envelope(raw: &TimeSeriesChannel) -> Result<TimeSeriesChannel, DspError> {
    emg_envelope_with(raw, &EnvelopeConfig::default())
}

pub fn emg_envelope_with(
    raw: &TimeSeriesChannel,
    cfg: &EnvelopeConfig,
) -> Result<TimeSeriesChannel, DspError> {
    let hp = design_butterworth(cfg.order, cfg.highpass_hz, raw.sample_rate_hz, FilterKind::Highpass)?;
    let lp = design_butterworth(cfg.order, cfg.lowpass_hz, raw.sample_rate_hz, FilterKind::Lowpass)?;
    let detrended = filter_causal(&hp, raw)?;
    filter_causal(&lp, &rectify(&detrended))
}

/// Anti-alias cutoff as a fraction of the output rate.
const ANTI_ALIAS_FRACTION: f64 = 0.4;

/// Integer-ratio downsampling behind a causal order-2 Butterworth guard
/// filter at `0.4 * target_rate_hz`. Keeps samples `0, M, 2M, ...`.
pub fn decimate(
    channel: &TimeSeriesChannel,
    target_rate_hz: f64,
) -> Result<TimeSeriesChannel, DspError> {
    let ratio = integer_ratio(channel.sample_rate_hz, target_rate_hz)?;
    let guard = design_butterworth(
        2,
        ANTI_ALIAS_FRACTION * target_rate_hz,
        channel.sample_rate_hz,
        FilterKind::Lowpass,
    )?;
    let smoothed = filter_causal(&guard, channel)?;
    Ok(TimeSeriesChannel {
        label: channel.label.clone(),
        sample_rate_hz: target_rate_hz,
        samples: smoothed.samples.into_iter().step_by(ratio).collect(),
    })
}

fn integer_ratio(from_hz: f64, to_hz: f64) -> Result<usize, DspError> {
    if !(to_hz.is_finite() && to_hz > 0.0) {
        return Err(DspError::InvalidSampleRate(to_hz));
    }
    let ratio = from_hz / to_hz;
    let rounded = ratio.round();
    if rounded < 1.0 || (ratio - rounded).abs() > 1e-9 * ratio.max(1.0) {
        return Err(DspError::NonIntegerRatio { from_hz, to_hz });
    }
    Ok(rounded as usize)
}
