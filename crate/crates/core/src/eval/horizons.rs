use ndarray::ArrayView3;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::data::schema::JOINTS;
use crate::data::{Frame, TargetFamily};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Horizon {
    /// Close horizon, 30 ms ahead.
    CH,
    /// Distant horizon, 250 ms ahead.
    DH,
}

impl Horizon {
    pub const ALL: [Horizon; 2] = [Horizon::CH, Horizon::DH];
}

impl std::fmt::Display for Horizon {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Horizon::CH => "CH",
            Horizon::DH => "DH",
        })
    }
}

/// Zero-based rows of the predicted block read out for each horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct HorizonRows {
    pub close: usize,
    pub distant: usize,
}

impl Default for HorizonRows {
    fn default() -> Self {
        Self {
            close: 2,
            distant: 24,
        }
    }
}

impl HorizonRows {
    pub fn row(&self, h: Horizon) -> usize {
        match h {
            Horizon::CH => self.close,
            Horizon::DH => self.distant,
        }
    }
}

/// Truth and prediction of one joint at one horizon over consecutive frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonSeries {
    pub joint: String,
    pub family: TargetFamily,
    pub horizon: Horizon,
    /// Sample index (within the trial) each value refers to.
    pub sample_index: Vec<usize>,
    pub truth: Vec<f64>,
    pub pred: Vec<f64>,
}

/// Reads the close and distant rows of every frame's target and predicted
/// blocks. `preds` is `[frames, horizon_len, 6]` for `family`.
pub fn extract_horizons(
    family: TargetFamily,
    frames: &[Frame],
    preds: ArrayView3<'_, f32>,
    rows: HorizonRows,
) -> Result<Vec<HorizonSeries>, EvalError> {
    let (n, h, k) = preds.dim();
    if n != frames.len() {
        return Err(EvalError::Misaligned(format!(
            "{} prediction blocks for {} frames",
            n,
            frames.len()
        )));
    }
    if k != JOINTS.len() {
        return Err(EvalError::Misaligned(format!(
            "prediction blocks have {k} channels, expected {}",
            JOINTS.len()
        )));
    }
    if rows.close >= h || rows.distant >= h {
        return Err(EvalError::Misaligned(format!(
            "horizon rows {}/{} outside a {h}-row block",
            rows.close, rows.distant
        )));
    }
    if let Some(first) = frames.first() {
        let step = frames.get(1).map(|f| f.start_index.wrapping_sub(first.start_index));
        for (i, pair) in frames.windows(2).enumerate() {
            let (a, b) = (&pair[0], &pair[1]);
            if a.subject_id != b.subject_id || a.trial_id != b.trial_id {
                return Err(EvalError::NonContiguous(format!(
                    "frame {} is from {}/{}, frame {} from {}/{}",
                    i,
                    a.subject_id,
                    a.trial_id,
                    i + 1,
                    b.subject_id,
                    b.trial_id
                )));
            }
            if b.start_index <= a.start_index || Some(b.start_index - a.start_index) != step {
                return Err(EvalError::NonContiguous(format!(
                    "start index {} follows {}",
                    b.start_index, a.start_index
                )));
            }
        }
    }
    let mut out = Vec::with_capacity(2 * k);
    for horizon in Horizon::ALL {
        let row = rows.row(horizon);
        for (j, joint) in JOINTS.iter().enumerate() {
            let truth = frames
                .iter()
                .map(|f| f.family_targets(family)[[row, j]] as f64)
                .collect();
            let pred = (0..n).map(|i| preds[[i, row, j]] as f64).collect();
            let sample_index = frames
                .iter()
                .map(|f| f.start_index + f.inputs.nrows() + row)
                .collect();
            out.push(HorizonSeries {
                joint: joint.to_string(),
                family,
                horizon,
                sample_index,
                truth,
                pred,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{Array2, Array3};

    fn frames(n: usize, stride: usize) -> Vec<Frame> {
        (0..n)
            .map(|i| Frame {
                inputs: Array2::zeros((125, 35)),
                targets: Array2::from_shape_fn((25, 12), |(r, _)| r as f32),
                subject_id: "s1".into(),
                trial_id: "t0".into(),
                start_index: i * stride,
            })
            .collect()
    }

    #[test]
    fn index_probe_reads_rows_two_and_twenty_four() {
        let f = frames(4, 1);
        let preds = Array3::from_shape_fn((4, 25, 6), |(_, r, _)| r as f32);
        let s = extract_horizons(TargetFamily::Angles, &f, preds.view(), HorizonRows::default())
            .unwrap();
        assert_eq!(s.len(), 12);
        for series in &s {
            let expect = match series.horizon {
                Horizon::CH => 2.0,
                Horizon::DH => 24.0,
            };
            assert!(series.truth.iter().chain(&series.pred).all(|&v| v == expect));
        }
        assert_eq!(s[0].sample_index, vec![127, 128, 129, 130]);
    }

    #[test]
    fn series_length_equals_frame_count() {
        for n in [1, 1000] {
            let f = frames(n, 1);
            let preds = Array3::zeros((n, 25, 6));
            let s = extract_horizons(TargetFamily::Moments, &f, preds.view(), HorizonRows::default())
                .unwrap();
            assert!(s.iter().all(|x| x.truth.len() == n && x.pred.len() == n));
        }
    }

    #[test]
    fn misaligned_and_gapped_inputs_are_rejected() {
        let f = frames(3, 1);
        let preds = Array3::zeros((2, 25, 6));
        assert!(matches!(
            extract_horizons(TargetFamily::Angles, &f, preds.view(), HorizonRows::default()),
            Err(EvalError::Misaligned(_))
        ));
        let mut f = frames(3, 1);
        f[2].start_index = 7;
        let preds = Array3::zeros((3, 25, 6));
        assert!(matches!(
            extract_horizons(TargetFamily::Angles, &f, preds.view(), HorizonRows::default()),
            Err(EvalError::NonContiguous(_))
        ));
    }
}
