use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::schema::{TargetFamily, NUM_INPUTS, NUM_TARGETS};
use super::{DataError, Trial};

/// Sliding-window geometry, in samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct FramingConfig {
    pub window_len: usize,
    pub horizon_len: usize,
    pub stride: usize,
    /// Leading samples skipped to let causal filters settle.
    pub burn_in: usize,
}

impl Default for FramingConfig {
    fn default() -> Self {
        Self {
            window_len: 125,
            horizon_len: 25,
            stride: 4,
            burn_in: 0,
        }
    }
}

impl FramingConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.window_len == 0 || self.horizon_len == 0 || self.stride == 0 {
            return Err(DataError::InvalidFraming(format!(
                "window_len, horizon_len and stride must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    /// Shortest trial that yields one frame.
    pub fn min_len(&self) -> usize {
        self.burn_in + self.window_len + self.horizon_len
    }
}

/// Closed-form number of frames for a trial of `n` samples.
pub fn frame_count(n: usize, cfg: &FramingConfig) -> usize {
    if n < cfg.min_len() {
        0
    } else {
        (n - cfg.min_len()) / cfg.stride + 1
    }
}

/// One training example.
///
/// `inputs` covers samples `[start, start + window_len)` of all 35 input
/// channels; `targets` covers `[start + window_len, start + window_len +
/// horizon_len)` of all 12 target channels (angles then moments).
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub inputs: Array2<f32>,
    pub targets: Array2<f32>,
    pub subject_id: String,
    pub trial_id: String,
    pub start_index: usize,
}

impl Frame {
    /// The six target columns predicted by one network.
    pub fn family_targets(&self, family: TargetFamily) -> ArrayView2<'_, f32> {
        self.targets
            .slice(ndarray::s![.., family.target_range()])
    }

    fn sort_key(&self) -> (&str, &str, usize) {
        (&self.subject_id, &self.trial_id, self.start_index)
    }
}

/// Emitted instead of an error when a trial is too short to frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FramingWarning {
    pub subject_id: String,
    pub trial_id: String,
    pub len: usize,
    pub required: usize,
}

/// Cuts a (normalized) trial into frames ordered by start index.
pub fn make_frames(
    trial: &Trial,
    cfg: &FramingConfig,
) -> Result<(Vec<Frame>, Option<FramingWarning>), DataError> {
    cfg.validate()?;
    let n = trial.len();
    let count = frame_count(n, cfg);
    if count == 0 {
        let warning = FramingWarning {
            subject_id: trial.subject_id.clone(),
            trial_id: trial.trial_id.clone(),
            len: n,
            required: cfg.min_len(),
        };
        log::warn!(
            "trial {}/{} has {} samples, {} required; no frames emitted",
            warning.subject_id,
            warning.trial_id,
            warning.len,
            warning.required
        );
        return Ok((Vec::new(), Some(warning)));
    }
    let inputs: Vec<&[f64]> = trial.inputs.iter().map(|c| c.samples.as_slice()).collect();
    let targets: Vec<&[f64]> = trial.targets().map(|c| c.samples.as_slice()).collect();
    debug_assert_eq!(inputs.len(), NUM_INPUTS);
    debug_assert_eq!(targets.len(), NUM_TARGETS);

    let frames = (0..count)
        .map(|k| {
            let start = cfg.burn_in + k * cfg.stride;
            let horizon_start = start + cfg.window_len;
            Frame {
                inputs: Array2::from_shape_fn((cfg.window_len, inputs.len()), |(t, c)| {
                    inputs[c][start + t] as f32
                }),
                targets: Array2::from_shape_fn((cfg.horizon_len, targets.len()), |(t, c)| {
                    targets[c][horizon_start + t] as f32
                }),
                subject_id: trial.subject_id.clone(),
                trial_id: trial.trial_id.clone(),
                start_index: start,
            }
        })
        .collect();
    Ok((frames, None))
}

/// Seeded Fisher–Yates permutation of the frames.
pub fn shuffle_frames(mut frames: Vec<Frame>, seed: u64) -> Vec<Frame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    frames.shuffle(&mut rng);
    frames
}

/// Orders frames by provenance (subject, trial, start index).
pub fn sort_frames(frames: &mut [Frame]) {
    frames.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::TimeSeriesChannel;
    use proptest::prelude::*;

    /// Channel value encodes (channel, sample) so frames can be checked exactly.
    pub(crate) fn ramp_trial(n: usize) -> Trial {
        let ch = |c: usize| {
            TimeSeriesChannel::new(
                format!("c{c}"),
                100.0,
                (0..n).map(|i| (c * 10_000 + i) as f64).collect(),
            )
            .unwrap()
        };
        Trial {
            subject_id: "S01".into(),
            trial_id: "T01".into(),
            inputs: (0..35).map(ch).collect(),
            angles: (35..41).map(ch).collect(),
            moments: (41..47).map(ch).collect(),
            speed_schedule: vec![],
        }
    }

    fn enumerate_starts(n: usize, cfg: &FramingConfig) -> Vec<usize> {
        let mut starts = Vec::new();
        let mut t = cfg.burn_in;
        while t + cfg.window_len + cfg.horizon_len <= n {
            starts.push(t);
            t += cfg.stride;
        }
        starts
    }

    #[test]
    fn default_counts() {
        let cfg = FramingConfig::default();
        assert_eq!(frame_count(150, &cfg), 1);
        assert_eq!(frame_count(149, &cfg), 0);
        assert_eq!(frame_count(200, &cfg), 13);
        assert_eq!(frame_count(1000, &cfg), 213);
        assert_eq!(enumerate_starts(200, &cfg).len(), 13);
        assert_eq!(enumerate_starts(1000, &cfg).len(), 213);
    }

    #[test]
    fn minimal_trial_gives_one_frame_at_zero() {
        let (frames, warn) = make_frames(&ramp_trial(150), &FramingConfig::default()).unwrap();
        assert!(warn.is_none());
        assert_eq!(frames.len(), 1);
        assert_eq!(frames[0].start_index, 0);
        assert_eq!(frames[0].inputs.dim(), (125, 35));
        assert_eq!(frames[0].targets.dim(), (25, 12));
    }

    #[test]
    fn short_trial_warns() {
        let (frames, warn) = make_frames(&ramp_trial(100), &FramingConfig::default()).unwrap();
        assert!(frames.is_empty());
        assert_eq!(warn.unwrap().required, 150);
    }

    #[test]
    fn target_block_follows_window() {
        let cfg = FramingConfig {
            burn_in: 3,
            ..Default::default()
        };
        let (frames, _) = make_frames(&ramp_trial(300), &cfg).unwrap();
        for f in &frames {
            let last_input = f.inputs[[cfg.window_len - 1, 0]] as usize;
            let first_target = f.targets[[0, 0]] as usize - 35 * 10_000;
            assert_eq!(last_input, f.start_index + cfg.window_len - 1);
            assert_eq!(first_target, last_input + 1);
        }
        assert_eq!(frames[0].start_index, 3);
        assert_eq!(frames[1].start_index, 7);
    }

    #[test]
    fn shuffle_is_deterministic_permutation() {
        let (frames, _) = make_frames(&ramp_trial(400), &FramingConfig::default()).unwrap();
        let a = shuffle_frames(frames.clone(), 11);
        let b = shuffle_frames(frames.clone(), 11);
        assert_eq!(a, b);
        assert_ne!(a, frames);
        let mut sorted = a;
        sort_frames(&mut sorted);
        assert_eq!(sorted, frames);
        assert!(shuffle_frames(Vec::new(), 3).is_empty());
    }

    #[test]
    fn zero_stride_rejected() {
        let cfg = FramingConfig {
            stride: 0,
            ..Default::default()
        };
        assert!(make_frames(&ramp_trial(200), &cfg).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn closed_form_matches_enumeration(
            n in 0usize..2000,
            window_len in 1usize..200,
            horizon_len in 1usize..60,
            stride in 1usize..20,
            burn_in in 0usize..100,
        ) {
            let cfg = FramingConfig { window_len, horizon_len, stride, burn_in };
            prop_assert_eq!(frame_count(n, &cfg), enumerate_starts(n, &cfg).len());
        }
    }
}
