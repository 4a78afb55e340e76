use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::schema::{TargetFamily, NUM_INPUTS, NUM_TARGETS};
use super::{DataError, Trial};
use crate::dsp::TimeSeriesChannel;

/// Below this range a channel is treated as constant.
pub const DEGENERATE_RANGE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelRange {
    pub min: f64,
    pub max: f64,
    pub degenerate: bool,
}

impl ChannelRange {
    fn empty() -> Self {
        Self {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            degenerate: true,
        }
    }

    fn absorb(&mut self, samples: &[f64]) {
        for &v in samples {
            self.min = self.min.min(v);
            self.max = self.max.max(v);
        }
    }

    fn finish(&mut self) {
        self.degenerate = !(self.max - self.min >= DEGENERATE_RANGE);
    }

    /// `(x - min) / (max - min)`; constant channels map to 0.5. No clipping.
    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        if self.degenerate {
            0.5
        } else {
            (x - self.min) / (self.max - self.min)
        }
    }

    #[inline]
    pub fn invert(&self, y: f64) -> f64 {
        if self.degenerate {
            self.min
        } else {
            y * (self.max - self.min) + self.min
        }
    }
}

/// Per-channel min-max ranges for the 35 inputs and 12 targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub inputs: Vec<ChannelRange>,
    pub targets: Vec<ChannelRange>,
}

/// Pooled extrema over the given (training) trials.
pub fn fit_normalizer(trials: &[&Trial]) -> Result<Normalizer, DataError> {
    if trials.is_empty() {
        return Err(DataError::SchemaMismatch(
            "cannot fit a normalizer on an empty training set".into(),
        ));
    }
    let mut inputs = vec![ChannelRange::empty(); NUM_INPUTS];
    let mut targets = vec![ChannelRange::empty(); NUM_TARGETS];
    for trial in trials {
        check_schema(trial)?;
        for (r, ch) in inputs.iter_mut().zip(&trial.inputs) {
            r.absorb(&ch.samples);
        }
        for (r, ch) in targets.iter_mut().zip(trial.targets()) {
            r.absorb(&ch.samples);
        }
    }
    inputs.iter_mut().chain(targets.iter_mut()).for_each(ChannelRange::finish);
    Ok(Normalizer { inputs, targets })
}

fn check_schema(trial: &Trial) -> Result<(), DataError> {
    if trial.inputs.len() != NUM_INPUTS || trial.targets().count() != NUM_TARGETS {
        return Err(DataError::SchemaMismatch(format!(
            "trial {}/{} does not follow the 35-input / 12-target schema",
            trial.subject_id, trial.trial_id
        )));
    }
    Ok(())
}

fn map_channel(ch: &mut TimeSeriesChannel, range: &ChannelRange) {
    ch.samples.iter_mut().for_each(|v| *v = range.apply(*v));
}

impl Normalizer {
    /// Normalized copy of `trial`.
    pub fn apply(&self, trial: &Trial) -> Result<Trial, DataError> {
        check_schema(trial)?;
        let mut out = trial.clone();
        for (ch, r) in out.inputs.iter_mut().zip(&self.inputs) {
            map_channel(ch, r);
        }
        for (ch, r) in out.targets_mut().zip(&self.targets) {
            map_channel(ch, r);
        }
        Ok(out)
    }

    /// Ranges of the six target channels predicted by one network.
    pub fn family_ranges(&self, family: TargetFamily) -> &[ChannelRange] {
        &self.targets[family.target_range()]
    }

    /// Maps a normalized `horizon × 6` block of one family back to physical units.
    pub fn invert_family(
        &self,
        family: TargetFamily,
        block: ArrayView2<'_, f64>,
    ) -> Result<Array2<f64>, DataError> {
        let ranges = self.family_ranges(family);
        if block.ncols() != ranges.len() {
            return Err(DataError::SchemaMismatch(format!(
                "block has {} columns, {family} has {}",
                block.ncols(),
                ranges.len()
            )));
        }
        let mut out = block.to_owned();
        for (mut col, r) in out.columns_mut().into_iter().zip(ranges) {
            col.mapv_inplace(|v| r.invert(v));
        }
        Ok(out)
    }

    pub fn apply_family(
        &self,
        family: TargetFamily,
        block: ArrayView2<'_, f64>,
    ) -> Result<Array2<f64>, DataError> {
        let ranges = self.family_ranges(family);
        if block.ncols() != ranges.len() {
            return Err(DataError::SchemaMismatch(format!(
                "block has {} columns, {family} has {}",
                block.ncols(),
                ranges.len()
            )));
        }
        let mut out = block.to_owned();
        for (mut col, r) in out.columns_mut().into_iter().zip(ranges) {
            col.mapv_inplace(|v| r.apply(v));
        }
        Ok(out)
    }
}
