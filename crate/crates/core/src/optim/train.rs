//! Mini-batch training with per-epoch validation and best-model selection.

use std::path::PathBuf;
use std::time::Instant;

use ndarray::{s, Array3, ArrayView3};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{save_checkpoint, AdamConfig, AdamState, Checkpoint, OptimError};
use crate::data::{Frame, Normalizer, TargetFamily};
use crate::nn::{
    mae_metric, model_backward, model_forward, mse_loss, mse_loss_grad, BlockMasks, ModelConfig,
    ModelParams,
};
use crate::util::{config_hash, derive_seed};

const STREAM_INIT: u64 = 1;
const STREAM_SHUFFLE: u64 = 2;
const STREAM_DROPOUT: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    /// Global-norm gradient clipping threshold.
    pub clip_grad_norm: Option<f64>,
    /// Learning rate multiplier applied once per completed epoch.
    pub lr_decay: f64,
    pub eval_batch_size: usize,
    /// Emit an info log line every this many epochs.
    pub report_every: usize,
    /// Stop as soon as the validation MSE falls below this value.
    pub stop_below_val_mse: Option<f64>,
    /// When set, `best.ckpt` and `last.ckpt` are written here every epoch.
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 40,
            batch_size: 128,
            seed: 0,
            adam: AdamConfig::default(),
            clip_grad_norm: None,
            lr_decay: 1.0,
            eval_batch_size: 256,
            report_every: 1,
            stop_below_val_mse: None,
            checkpoint_dir: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), OptimError> {
        if self.epochs == 0 || self.batch_size == 0 || self.eval_batch_size == 0 {
            return Err(OptimError::Config(
                "epochs, batch_size and eval_batch_size must be at least 1".into(),
            ));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(OptimError::Config(format!(
                "lr_decay must lie in (0, 1], got {}",
                self.lr_decay
            )));
        }
        if matches!(self.clip_grad_norm, Some(c) if !(c > 0.0)) {
            return Err(OptimError::Config("clip_grad_norm must be positive".into()));
        }
        self.adam.validate()
    }

    /// Hash of every setting that changes the optimization trajectory. The
    /// epoch budget, stopping rule and output location are excluded so a run
    /// can be extended by resuming.
    pub fn trajectory_hash(&self, family: TargetFamily, model: &ModelConfig) -> String {
        config_hash(&(
            family,
            model,
            self.batch_size,
            self.seed,
            &self.adam,
            self.clip_grad_norm,
            self.lr_decay,
        ))
    }
}

/// Frames plus the provenance stored alongside the trained weights.
pub struct TrainData<'a> {
    pub train: &'a [Frame],
    /// May be empty, in which case selection falls back to training loss.
    pub val: &'a [Frame],
    pub normalizer: Option<&'a Normalizer>,
    pub lineage: &'a str,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub train_mae: f64,
    pub val_mse: Option<f64>,
    pub wall_time_s: f64,
}

#[derive(Debug)]
pub enum TrainEvent<'a> {
    OptimizerStep { epoch: usize, batch: usize, loss: f64 },
    ValidationStart { epoch: usize },
    ValidationBatch { epoch: usize, batch: usize },
    ValidationEnd { epoch: usize, val_mse: f64 },
    EpochEnd(&'a EpochRecord),
}

pub trait TrainObserver {
    fn on_event(&mut self, event: &TrainEvent<'_>);
}

pub struct NoopObserver;

impl TrainObserver for NoopObserver {
    fn on_event(&mut self, _: &TrainEvent<'_>) {}
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Lowest validation loss seen (training loss when there is no validation set).
    pub best: Checkpoint,
    pub last: Checkpoint,
    pub history: Vec<EpochRecord>,
    pub stopped_early: bool,
}

/// Stacked frames: inputs `[N, W, C]`, family targets `[N, H, 6]`.
fn stack(frames: &[Frame], family: TargetFamily) -> (Array3<f32>, Array3<f32>) {
    let (w, c) = frames[0].inputs.dim();
    let h = frames[0].targets.nrows();
    let k = family.target_range().len();
    let mut x = Array3::<f32>::zeros((frames.len(), w, c));
    let mut y = Array3::<f32>::zeros((frames.len(), h, k));
    for (i, f) in frames.iter().enumerate() {
        x.slice_mut(s![i, .., ..]).assign(&f.inputs);
        y.slice_mut(s![i, .., ..]).assign(&f.family_targets(family));
    }
    (x, y)
}

fn gather(src: &Array3<f32>, idx: &[usize]) -> Array3<f32> {
    let (_, a, b) = src.dim();
    let mut out = Array3::<f32>::zeros((idx.len(), a, b));
    for (o, &i) in idx.iter().enumerate() {
        out.slice_mut(s![o, .., ..]).assign(&src.slice(s![i, .., ..]));
    }
    out
}

fn clip_global_norm(grads: &mut ModelParams<f32>, max_norm: f64) {
    let sq: f64 = grads
        .tensors()
        .iter()
        .flat_map(|(_, t)| t.iter().map(|&v| (v as f64) * (v as f64)).collect::<Vec<_>>())
        .sum();
    let norm = sq.sqrt();
    if norm > max_norm {
        let k = (max_norm / norm) as f32;
        for (_, mut t) in grads.tensors_mut() {
            t.mapv_inplace(|v| v * k);
        }
    }
}

/// Eval-mode MSE over a stacked set, in chunks.
fn evaluate_mse(
    cfg: &ModelConfig,
    params: &ModelParams<f32>,
    x: ArrayView3<'_, f32>,
    y: ArrayView3<'_, f32>,
    chunk: usize,
    mut on_batch: impl FnMut(usize),
) -> Result<f64, OptimError> {
    let n = x.shape()[0];
    let mut sum = 0.0;
    for (b, start) in (0..n).step_by(chunk).enumerate() {
        let end = (start + chunk).min(n);
        let (out, _) = model_forward(cfg, params, x.slice(s![start..end, .., ..]), None)?;
        let mse = mse_loss(out.view(), y.slice(s![start..end, .., ..]))? as f64;
        sum += mse * (end - start) as f64;
        on_batch(b);
    }
    Ok(sum / n as f64)
}

/// Where a resumed run continues from.
pub struct ResumePoint {
    pub last: Checkpoint,
    pub best: Checkpoint,
}

pub fn train(
    family: TargetFamily,
    model: &ModelConfig,
    data: &TrainData<'_>,
    cfg: &TrainConfig,
    resume: Option<ResumePoint>,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome, OptimError> {
    cfg.validate()?;
    model.validate()?;
    if data.train.is_empty() {
        return Err(OptimError::EmptyTrainingSet);
    }
    let trajectory = cfg.trajectory_hash(family, model);
    let (x_train, y_train) = stack(data.train, family);
    let val = (!data.val.is_empty()).then(|| stack(data.val, family));
    let n = data.train.len();

    let (mut params, mut opt, start_epoch, mut best) = match resume {
        Some(r) => {
            if r.last.train_config_hash != trajectory || r.last.model_config != *model {
                return Err(OptimError::Incompatible(format!(
                    "checkpoint was produced with settings hash {}, current settings hash {}",
                    r.last.train_config_hash, trajectory
                )));
            }
            if r.last.lineage != data.lineage {
                return Err(OptimError::Incompatible(format!(
                    "checkpoint was trained on data {}, current data is {}",
                    r.last.lineage, data.lineage
                )));
            }
            (r.last.params, r.last.optimizer, r.last.epoch, Some(r.best))
        }
        None => {
            let init_seed = derive_seed(cfg.seed, &[STREAM_INIT, family as u64]);
            let p = ModelParams::<f32>::init(model, init_seed);
            let state = AdamState::new(p.param_count());
            (p, state, 0, None)
        }
    };

    let snapshot = |params: &ModelParams<f32>, opt: &AdamState<f32>, epoch, best_val| Checkpoint {
        family,
        model_config: *model,
        params: params.clone(),
        optimizer: opt.clone(),
        adam: cfg.adam,
        normalizer: data.normalizer.cloned(),
        train_config_hash: trajectory.clone(),
        epoch,
        best_val_loss: best_val,
        lineage: data.lineage.to_string(),
    };

    let mut history = Vec::new();
    let mut stopped_early = false;
    let mut order: Vec<usize> = (0..n).collect();
    let mut last = None;
    for epoch in start_epoch..cfg.epochs {
        let clock = Instant::now();
        let lr = cfg.adam.lr * cfg.lr_decay.powi(epoch as i32);
        order.sort_unstable();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(
            cfg.seed,
            &[STREAM_SHUFFLE, epoch as u64],
        )));
        let (mut se, mut ae) = (0.0, 0.0);
        for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
            let x = gather(&x_train, idx);
            let y = gather(&y_train, idx);
            let seeds: Vec<u64> = (0..idx.len())
                .map(|k| {
                    let ordinal = (batch * cfg.batch_size + k) as u64;
                    derive_seed(cfg.seed, &[STREAM_DROPOUT, epoch as u64, ordinal])
                })
                .collect();
            let masks = (model.dropout_rate > 0.0).then(|| BlockMasks::draw(model, &seeds));
            let (out, cache) = model_forward(model, &params, x.view(), masks.as_ref())?;
            let loss = mse_loss(out.view(), y.view())? as f64;
            if !loss.is_finite() {
                return Err(OptimError::Diverged {
                    epoch: epoch + 1,
                    batch,
                    last_good: best.map(Box::new),
                });
            }
            se += loss * idx.len() as f64;
            ae += mae_metric(out.view(), y.view())? as f64 * idx.len() as f64;
            let d = mse_loss_grad(out.view(), y.view())?;
            let mut grads = model_backward(model, &params, &cache, d.view())?;
            if let Some(c) = cfg.clip_grad_norm {
                clip_global_norm(&mut grads, c);
            }
            opt.step_model(&cfg.adam, lr, &mut params, &grads)?;
            observer.on_event(&TrainEvent::OptimizerStep {
                epoch: epoch + 1,
                batch,
                loss,
            });
        }
        let train_mse = se / n as f64;
        let train_mae = ae / n as f64;

        let val_mse = match &val {
            Some((xv, yv)) => {
                observer.on_event(&TrainEvent::ValidationStart { epoch: epoch + 1 });
                let v = evaluate_mse(
                    model,
                    &params,
                    xv.view(),
                    yv.view(),
                    cfg.eval_batch_size,
                    |b| {
                        observer.on_event(&TrainEvent::ValidationBatch {
                            epoch: epoch + 1,
                            batch: b,
                        })
                    },
                )?;
                observer.on_event(&TrainEvent::ValidationEnd {
                    epoch: epoch + 1,
                    val_mse: v,
                });
                Some(v)
            }
            None => None,
        };
        if !train_mse.is_finite() || matches!(val_mse, Some(v) if !v.is_finite()) {
            return Err(OptimError::Diverged {
                epoch: epoch + 1,
                batch: order.len().div_ceil(cfg.batch_size),
                last_good: best.map(Box::new),
            });
        }
        let score = val_mse.unwrap_or(train_mse);
        let improved = best
            .as_ref()
            .and_then(|b| b.best_val_loss)
            .is_none_or(|b| score < b);
        let best_val = if improved {
            Some(score)
        } else {
            best.as_ref().and_then(|b| b.best_val_loss)
        };
        let current = snapshot(&params, &opt, epoch + 1, best_val);
        if improved {
            best = Some(current.clone());
        }
        if let Some(dir) = &cfg.checkpoint_dir {
            if improved {
                save_checkpoint(&current, &dir.join("best.ckpt"))?;
            }
            save_checkpoint(&current, &dir.join("last.ckpt"))?;
        }
        let record = EpochRecord {
            epoch: epoch + 1,
            train_mse,
            train_mae,
            val_mse,
            wall_time_s: clock.elapsed().as_secs_f64(),
        };
        if cfg.report_every > 0 && (epoch + 1) % cfg.report_every == 0 {
            log::info!(
                "{} epoch {}/{}: train mse {:.5} mae {:.5}, val mse {}, {:.1}s",
                family,
                epoch + 1,
                cfg.epochs,
                train_mse,
                train_mae,
                val_mse.map_or("-".to_string(), |v| format!("{v:.5}")),
                record.wall_time_s
            );
        }
        observer.on_event(&TrainEvent::EpochEnd(&record));
        history.push(record);
        last = Some(current);
        if matches!((cfg.stop_below_val_mse, val_mse), (Some(t), Some(v)) if v < t) {
            stopped_early = true;
            break;
        }
    }
    let last = match last {
        Some(l) => l,
        // resumed at or past the epoch budget
        None => snapshot(&params, &opt, start_epoch, best.as_ref().and_then(|b| b.best_val_loss)),
    };
    let best = best.unwrap_or_else(|| last.clone());
    Ok(TrainOutcome {
        best,
        last,
        history,
        stopped_early,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn toy_frames(n: usize, seed: u64) -> Vec<Frame> {
        let cfg = ModelConfig::desk();
        (0..n)
            .map(|i| {
                let phase = i as f32 * 0.37 + seed as f32;
                Frame {
                    inputs: Array2::from_shape_fn((cfg.window_len, 3), |(t, c)| {
                        ((t as f32 * 0.3 + phase) * (c + 1) as f32).sin()
                    }),
                    targets: Array2::from_shape_fn((cfg.horizon_len, 12), |(t, c)| {
                        0.5 + 0.4 * ((t as f32 * 0.3 + phase + cfg.window_len as f32 * 0.3) + c as f32).sin()
                    }),
                    subject_id: "s".into(),
                    trial_id: "t".into(),
                    start_index: i,
                }
            })
            .collect()
    }

    struct Recorder(Vec<String>);

    impl TrainObserver for Recorder {
        fn on_event(&mut self, e: &TrainEvent<'_>) {
            self.0.push(
                match e {
                    TrainEvent::OptimizerStep { .. } => "step",
                    TrainEvent::ValidationStart { .. } => "val-start",
                    TrainEvent::ValidationBatch { .. } => "val-batch",
                    TrainEvent::ValidationEnd { .. } => "val-end",
                    TrainEvent::EpochEnd(_) => "epoch",
                }
                .to_string(),
            );
        }
    }

    fn desk() -> ModelConfig {
        ModelConfig {
            output_channels: 6,
            ..ModelConfig::desk()
        }
    }

    #[test]
    fn one_step_per_epoch_when_batch_covers_corpus() {
        let frames = toy_frames(10, 0);
        let data = TrainData {
            train: &frames,
            val: &frames[..3],
            normalizer: None,
            lineage: "x",
        };
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 64,
            ..TrainConfig::default()
        };
        let mut rec = Recorder(Vec::new());
        train(TargetFamily::Angles, &desk(), &data, &cfg, None, &mut rec).unwrap();
        let steps = rec.0.iter().filter(|e| *e == "step").count();
        assert_eq!(steps, 3);
    }

    #[test]
    fn validation_never_interleaves_with_updates() {
        let frames = toy_frames(12, 1);
        let data = TrainData {
            train: &frames,
            val: &frames[..5],
            normalizer: None,
            lineage: "x",
        };
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 4,
            eval_batch_size: 2,
            ..TrainConfig::default()
        };
        let mut rec = Recorder(Vec::new());
        train(TargetFamily::Angles, &desk(), &data, &cfg, None, &mut rec).unwrap();
        let mut inside = false;
        for e in &rec.0 {
            match e.as_str() {
                "val-start" => inside = true,
                "val-end" => inside = false,
                "step" => assert!(!inside, "optimizer step during validation"),
                _ => {}
            }
        }
        assert_eq!(rec.0.iter().filter(|e| *e == "val-batch").count(), 6);
    }

    #[test]
    fn empty_training_set_is_an_error() {
        let data = TrainData {
            train: &[],
            val: &[],
            normalizer: None,
            lineage: "x",
        };
        let r = train(
            TargetFamily::Angles,
            &desk(),
            &data,
            &TrainConfig::default(),
            None,
            &mut NoopObserver,
        );
        assert!(matches!(r, Err(OptimError::EmptyTrainingSet)));
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        let frames = toy_frames(16, 2);
        let data = TrainData {
            train: &frames,
            val: &frames[..4],
            normalizer: None,
            lineage: "x",
        };
        let full_cfg = TrainConfig {
            epochs: 4,
            batch_size: 5,
            ..TrainConfig::default()
        };
        let full = train(TargetFamily::Moments, &desk(), &data, &full_cfg, None, &mut NoopObserver)
            .unwrap();
        let half_cfg = TrainConfig {
            epochs: 2,
            ..full_cfg.clone()
        };
        let half = train(TargetFamily::Moments, &desk(), &data, &half_cfg, None, &mut NoopObserver)
            .unwrap();
        let resumed = train(
            TargetFamily::Moments,
            &desk(),
            &data,
            &full_cfg,
            Some(ResumePoint {
                last: half.last,
                best: half.best,
            }),
            &mut NoopObserver,
        )
        .unwrap();
        assert_eq!(resumed.last.params, full.last.params);
        assert_eq!(resumed.best, full.best);
    }

    #[test]
    fn resume_with_other_settings_is_refused() {
        let frames = toy_frames(8, 3);
        let data = TrainData {
            train: &frames,
            val: &[],
            normalizer: None,
            lineage: "x",
        };
        let cfg = TrainConfig {
            epochs: 1,
            batch_size: 4,
            ..TrainConfig::default()
        };
        let out = train(TargetFamily::Angles, &desk(), &data, &cfg, None, &mut NoopObserver).unwrap();
        let other = TrainConfig {
            epochs: 2,
            batch_size: 3,
            ..cfg
        };
        let r = train(
            TargetFamily::Angles,
            &desk(),
            &data,
            &other,
            Some(ResumePoint {
                last: out.last,
                best: out.best,
            }),
            &mut NoopObserver,
        );
        assert!(matches!(r, Err(OptimError::Incompatible(_))));
    }

    #[test]
    fn exploding_learning_rate_reports_divergence() {
        let frames = toy_frames(8, 4);
        let data = TrainData {
            train: &frames,
            val: &frames[..2],
            normalizer: None,
            lineage: "x",
        };
        let cfg = TrainConfig {
            epochs: 50,
            batch_size: 4,
            adam: AdamConfig {
                lr: 1e30,
                ..AdamConfig::default()
            },
            ..TrainConfig::default()
        };
        let r = train(TargetFamily::Angles, &desk(), &data, &cfg, None, &mut NoopObserver);
        assert!(
            matches!(r, Err(OptimError::Diverged { .. }) | Err(OptimError::NonFiniteGradient { .. })),
            "{r:?}"
        );
    }
}
