use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array2, Array3, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{CorpusSource, RunConfig, Which};
use super::PipelineError;
use crate::data::schema::{self, JOINTS, PREPARED_RATE_HZ};
use crate::data::{
    fit_normalizer, load_stream, make_frames, read_frame_cache, shuffle_frames, split_loso,
    synth_subject, write_frame_cache, write_stream, ColumnMap, CorpusManifest, DataError, Frame,
    FrameCache, ManifestSubject, ManifestTrial, Normalizer, Split, TargetFamily, Trial, TrialFiles,
};
use crate::eval::{
    build_report, extract_horizons, render_table, write_trace_csvs, HorizonSeries, MetricScale,
    MetricsReport,
};
use crate::nn::predict;
use crate::optim::{
    load_checkpoint, save_checkpoint, train, Checkpoint, EpochRecord, OptimError, ResumePoint,
    TrainData, TrainEvent, TrainObserver,
};
use crate::util::derive_seed;

const STREAM_SYNTH: u64 = 10;
const STREAM_SHUFFLE: u64 = 11;
const STREAM_EVAL_WINDOW: u64 = 12;
const PREDICT_CHUNK: usize = 256;

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    }
    let text = serde_json::to_string_pretty(value).expect("artifact serializes");
    fs::write(path, text + "\n").map_err(|e| PipelineError::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, PipelineError> {
    let text = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| DataError::Manifest(format!("{}: {e}", path.display())).into())
}

fn create_dir(dir: &Path) -> Result<(), PipelineError> {
    fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSummary {
    pub manifest: PathBuf,
    pub subjects: usize,
    pub trials: usize,
    pub config_hash: String,
}

/// Generates the synthetic corpus into `<out>/corpus`.
pub fn cmd_synth(cfg: &RunConfig) -> Result<SynthSummary, PipelineError> {
    cfg.validate()?;
    let CorpusSource::Synthetic { subjects, profile } = &cfg.corpus else {
        return Err(PipelineError::Validation(
            "the corpus is an external manifest; there is nothing to synthesize".into(),
        ));
    };
    let layout = cfg.layout();
    let dir = layout.corpus_dir();
    create_dir(&dir)?;
    let mut manifest_subjects = Vec::with_capacity(*subjects);
    let mut trials = 0;
    for i in 1..=*subjects {
        let id = format!("S{i:02}");
        let raws = synth_subject(profile, &id, derive_seed(cfg.seed, &[STREAM_SYNTH, i as u64]))?;
        let mut entries = Vec::with_capacity(raws.len());
        for raw in raws {
            let rel = PathBuf::from(&id).join(&raw.trial_id);
            create_dir(&dir.join(&rel))?;
            let emg: Vec<_> = raw.emg.iter().collect();
            let imu: Vec<_> = raw.imu.iter().collect();
            let targets: Vec<_> = raw.angles.iter().chain(&raw.moments).collect();
            write_stream(&dir.join(rel.join("emg.csv")), &emg)?;
            write_stream(&dir.join(rel.join("imu.csv")), &imu)?;
            write_stream(&dir.join(rel.join("targets.csv")), &targets)?;
            entries.push(ManifestTrial {
                id: raw.trial_id.clone(),
                speed_schedule: raw.speed_schedule.clone(),
                files: TrialFiles::Raw {
                    emg: rel.join("emg.csv"),
                    imu: rel.join("imu.csv"),
                    targets: rel.join("targets.csv"),
                    emg_rate_hz: profile.emg_rate_hz,
                    imu_rate_hz: profile.imu_rate_hz,
                    target_rate_hz: profile.target_rate_hz,
                },
            });
            trials += 1;
        }
        manifest_subjects.push(ManifestSubject {
            id,
            trials: entries,
        });
    }
    let config_hash = cfg.corpus_hash()?;
    let manifest = CorpusManifest {
        version: crate::data::MANIFEST_VERSION,
        config_hash: config_hash.clone(),
        seed: Some(cfg.seed),
        generator: Some(serde_json::to_value(&cfg.corpus).expect("profile serializes")),
        column_map: ColumnMap::default(),
        subjects: manifest_subjects,
    };
    let path = layout.manifest();
    manifest.save(&path)?;
    log::info!("wrote {trials} trials of {subjects} subjects to {}", dir.display());
    Ok(SynthSummary {
        manifest: path,
        subjects: *subjects,
        trials,
        config_hash,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFrames {
    pub subject: String,
    pub trial: String,
    pub role: String,
    pub samples: usize,
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepareSummary {
    pub lineage: String,
    pub seed: u64,
    pub corpus_hash: String,
    pub cache_file: String,
    pub cache_digest: String,
    pub split: Split,
    pub train_frames: usize,
    pub val_frames: usize,
    pub test_frames: usize,
    pub trials: Vec<TrialFrames>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NormalizerFile {
    lineage: String,
    seed: u64,
    normalizer: Normalizer,
}

fn manifest_path(cfg: &RunConfig) -> PathBuf {
    match &cfg.corpus {
        CorpusSource::Synthetic { .. } => cfg.layout().manifest(),
        CorpusSource::Manifest { path } => path.clone(),
    }
}

/// Loads every trial, splits by subject, fits the normalizer on training
/// subjects, frames all trials and writes the frame cache.
pub fn cmd_prepare(cfg: &RunConfig) -> Result<PrepareSummary, PipelineError> {
    cfg.validate()?;
    let layout = cfg.layout();
    let mpath = manifest_path(cfg);
    if !mpath.is_file() {
        return Err(DataError::Manifest(format!(
            "{} not found (run `synth` first)",
            mpath.display()
        ))
        .into());
    }
    let manifest = CorpusManifest::load(&mpath)?;
    let corpus_hash = cfg.corpus_hash()?;
    if matches!(cfg.corpus, CorpusSource::Synthetic { .. }) && manifest.config_hash != corpus_hash {
        return Err(PipelineError::Validation(format!(
            "corpus at {} was generated with settings {}, current settings are {} (rerun `synth`)",
            mpath.display(),
            manifest.config_hash,
            corpus_hash
        )));
    }
    let ids = manifest.subject_ids();
    if ids.len() < 3 {
        return Err(PipelineError::Validation(format!(
            "leave-one-subject-out needs at least 3 subjects, the corpus has {}",
            ids.len()
        )));
    }
    let test_id = cfg.split.test.clone().unwrap_or_else(|| ids[ids.len() - 1].to_string());
    let val_id = cfg.split.val.clone().unwrap_or_else(|| ids[ids.len() - 2].to_string());
    let split = split_loso(&ids, &test_id, &val_id)?;

    let base = mpath.parent().unwrap_or(Path::new("."));
    let mut trials: Vec<Trial> = Vec::new();
    for subject in &manifest.subjects {
        for trial in &subject.trials {
            let t = manifest.load_prepared(base, &subject.id, trial, &cfg.envelope)?;
            t.validate()?;
            trials.push(t);
        }
    }
    let train_trials: Vec<&Trial> = trials
        .iter()
        .filter(|t| split.is_train(&t.subject_id))
        .collect();
    let normalizer = fit_normalizer(&train_trials)?;

    let eval_framing = cfg.eval_framing();
    let (mut train_frames, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    let mut per_trial = Vec::new();
    for trial in &trials {
        let role = split.role(&trial.subject_id).expect("every subject has a role");
        let normalized = normalizer.apply(trial)?;
        let framing = if role == "test" { &eval_framing } else { &cfg.framing };
        let (frames, _) = make_frames(&normalized, framing)?;
        per_trial.push(TrialFrames {
            subject: trial.subject_id.clone(),
            trial: trial.trial_id.clone(),
            role: role.to_string(),
            samples: trial.len(),
            frames: frames.len(),
        });
        match role {
            "train" => train_frames.extend(frames),
            "val" => val.extend(frames),
            _ => test.extend(frames),
        }
    }
    let train_frames = shuffle_frames(train_frames, derive_seed(cfg.seed, &[STREAM_SHUFFLE]));
    split.check_no_leak(&train_frames, &val, &test)?;
    if train_frames.is_empty() {
        return Err(DataError::SchemaMismatch("no training frames could be cut".into()).into());
    }

    let lineage = cfg.prepared_hash()?;
    create_dir(&layout.prepared_dir())?;
    let cache_path = layout.cache(&lineage);
    let cache = FrameCache {
        config_hash: lineage.clone(),
        seed: cfg.seed,
        train: train_frames,
        val,
        test,
    };
    let cache_digest = write_frame_cache(&cache_path, &cache)?;
    write_json(
        &layout.normalizer(),
        &NormalizerFile {
            lineage: lineage.clone(),
            seed: cfg.seed,
            normalizer,
        },
    )?;
    let summary = PrepareSummary {
        lineage,
        seed: cfg.seed,
        corpus_hash,
        cache_file: cache_path
            .file_name()
            .expect("cache path has a file name")
            .to_string_lossy()
            .into_owned(),
        cache_digest,
        split,
        train_frames: cache.train.len(),
        val_frames: cache.val.len(),
        test_frames: cache.test.len(),
        trials: per_trial,
    };
    write_json(&layout.summary(), &summary)?;
    Ok(summary)
}

struct Prepared {
    summary: PrepareSummary,
    cache: FrameCache,
    normalizer: Normalizer,
}

fn load_prepared(cfg: &RunConfig) -> Result<Prepared, PipelineError> {
    let layout = cfg.layout();
    let spath = layout.summary();
    if !spath.is_file() {
        return Err(DataError::Cache(format!(
            "{} not found (run `prepare` first)",
            spath.display()
        ))
        .into());
    }
    let summary: PrepareSummary = read_json(&spath)?;
    let expected = cfg.prepared_hash()?;
    if summary.lineage != expected {
        return Err(PipelineError::Validation(format!(
            "prepared data has lineage {}, the current configuration implies {} (rerun `prepare`)",
            summary.lineage, expected
        )));
    }
    let cache = read_frame_cache(&layout.prepared_dir().join(&summary.cache_file))?;
    if cache.config_hash != summary.lineage {
        return Err(DataError::Cache("frame cache lineage does not match its summary".into()).into());
    }
    let norm: NormalizerFile = read_json(&layout.normalizer())?;
    if norm.lineage != summary.lineage {
        return Err(DataError::Cache("normalizer lineage does not match the frame cache".into()).into());
    }
    Ok(Prepared {
        summary,
        cache,
        normalizer: norm.normalizer,
    })
}

/// Appends one JSON line per finished epoch.
struct JsonlLog {
    family: TargetFamily,
    out: BufWriter<fs::File>,
    failed: Option<std::io::Error>,
}

#[derive(Serialize)]
struct LogLine<'a> {
    network: TargetFamily,
    #[serde(flatten)]
    record: &'a EpochRecord,
}

impl TrainObserver for JsonlLog {
    fn on_event(&mut self, event: &TrainEvent<'_>) {
        if let TrainEvent::EpochEnd(record) = event {
            let line = serde_json::to_string(&LogLine {
                network: self.family,
                record,
            })
            .expect("record serializes");
            if let Err(e) = writeln!(self.out, "{line}").and_then(|_| self.out.flush()) {
                self.failed.get_or_insert(e);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub network: TargetFamily,
    pub checkpoint: PathBuf,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_mse: Option<f64>,
    pub final_train_mse: Option<f64>,
    pub stopped_early: bool,
    pub history: Vec<EpochRecord>,
}

/// Trains the selected networks on the prepared frames and writes their
/// best-validation checkpoints.
pub fn cmd_train(
    cfg: &RunConfig,
    which: Which,
    resume: bool,
) -> Result<Vec<TrainSummary>, PipelineError> {
    cfg.validate()?;
    let prepared = load_prepared(cfg)?;
    let layout = cfg.layout();
    let mut out = Vec::new();
    for family in which.families() {
        let tc = cfg.train_config(family);
        let model = cfg.model(family);
        let resume_point = if resume {
            let dir = layout.work_dir(family);
            let last = load_checkpoint(&dir.join("last.ckpt"))?;
            if last.model_config != *model {
                return Err(OptimError::Incompatible(format!(
                    "{family} checkpoint was built for a different model configuration"
                ))
                .into());
            }
            let best = load_checkpoint(&dir.join("best.ckpt"))?;
            Some(ResumePoint { last, best })
        } else {
            None
        };
        let log_path = layout.train_log(family);
        create_dir(log_path.parent().expect("log dir"))?;
        let file = fs::OpenOptions::new()
            .create(true)
            .write(true)
            .append(resume)
            .truncate(!resume)
            .open(&log_path)
            .map_err(|e| PipelineError::io(&log_path, e))?;
        let mut log = JsonlLog {
            family,
            out: BufWriter::new(file),
            failed: None,
        };
        let data = TrainData {
            train: &prepared.cache.train,
            val: &prepared.cache.val,
            normalizer: Some(&prepared.normalizer),
            lineage: &prepared.summary.lineage,
        };
        log::info!(
            "training {family} network on {} frames ({} validation)",
            data.train.len(),
            data.val.len()
        );
        let outcome = train(family, model, &data, &tc, resume_point, &mut log)?;
        if let Some(e) = log.failed {
            return Err(PipelineError::io(&log_path, e));
        }
        let path = layout.checkpoint(family);
        save_checkpoint(&outcome.best, &path)?;
        out.push(TrainSummary {
            network: family,
            checkpoint: path,
            epochs_run: outcome.history.len(),
            best_epoch: outcome.best.epoch,
            best_val_mse: outcome.best.best_val_loss,
            final_train_mse: outcome.history.last().map(|r| r.train_mse),
            stopped_early: outcome.stopped_early,
            history: outcome.history,
        });
    }
    Ok(out)
}

/// Picks the scored run of test frames: a seeded trial of the test subject
/// and a seeded start inside it. Returns a range into `frames`, which must
/// hold trials in contiguous blocks.
pub fn select_eval_window(frames: &[Frame], len: usize, seed: u64) -> std::ops::Range<usize> {
    let mut blocks: Vec<std::ops::Range<usize>> = Vec::new();
    for (i, f) in frames.iter().enumerate() {
        match blocks.last_mut() {
            Some(b) if frames[b.start].trial_id == f.trial_id
                && frames[b.start].subject_id == f.subject_id =>
            {
                b.end = i + 1
            }
            _ => blocks.push(i..i + 1),
        }
    }
    if blocks.is_empty() {
        return 0..0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[STREAM_EVAL_WINDOW]));
    let block = blocks[rng.gen_range(0..blocks.len())].clone();
    if block.len() <= len {
        if block.len() < len {
            log::warn!(
                "test trial has {} frames, fewer than the {len} requested; scoring all of them",
                block.len()
            );
        }
        return block;
    }
    let start = block.start + rng.gen_range(0..=block.len() - len);
    start..start + len
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointInfo {
    pub epoch: usize,
    pub best_val_mse: Option<f64>,
    pub settings_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub lineage: String,
    pub seed: u64,
    pub trial: String,
    pub first_sample: usize,
    pub checkpoints: BTreeMap<String, CheckpointInfo>,
    pub metrics: MetricsReport,
}

fn load_family_checkpoint(
    cfg: &RunConfig,
    family: TargetFamily,
    lineage: &str,
) -> Result<Checkpoint, PipelineError> {
    let path = cfg.layout().checkpoint(family);
    let cp = load_checkpoint(&path)?;
    if cp.family != family {
        return Err(PipelineError::Validation(format!(
            "{} holds a {} network",
            path.display(),
            cp.family
        )));
    }
    if cp.lineage != lineage {
        return Err(PipelineError::Validation(format!(
            "{} was trained on data {}, the prepared data is {}",
            path.display(),
            cp.lineage,
            lineage
        )));
    }
    if cp.model_config != *cfg.model(family) {
        return Err(PipelineError::Validation(format!(
            "{} was built for a different model_{family} configuration",
            path.display()
        )));
    }
    Ok(cp)
}

/// Scores the selected networks on a contiguous run of test-subject frames
/// and writes `report.json` and `report.txt` (plus traces if configured).
pub fn cmd_evaluate(
    cfg: &RunConfig,
    which: Which,
    scale: Option<MetricScale>,
) -> Result<EvaluationReport, PipelineError> {
    cfg.validate()?;
    let prepared = load_prepared(cfg)?;
    let lineage = prepared.summary.lineage.clone();
    let families = which.families();
    let checkpoints: Vec<(TargetFamily, Checkpoint)> = families
        .iter()
        .map(|&f| load_family_checkpoint(cfg, f, &lineage).map(|c| (f, c)))
        .collect::<Result<_, _>>()?;
    let scale = scale.unwrap_or(cfg.scale);
    let range = select_eval_window(&prepared.cache.test, cfg.evaluation.frames, cfg.seed);
    let frames = &prepared.cache.test[range];
    if frames.is_empty() {
        return Err(DataError::SchemaMismatch("the test subject yielded no frames".into()).into());
    }
    let (w, c) = frames[0].inputs.dim();
    let mut x = Array3::<f32>::zeros((frames.len(), w, c));
    for (mut slot, f) in x.axis_iter_mut(Axis(0)).zip(frames) {
        slot.assign(&f.inputs);
    }
    let mut series: Vec<HorizonSeries> = Vec::new();
    let mut infos = BTreeMap::new();
    for (family, cp) in &checkpoints {
        let preds = predict(&cp.model_config, &cp.params, x.view(), PREDICT_CHUNK)?;
        let mut s = extract_horizons(*family, frames, preds.view(), cfg.evaluation.rows)?;
        if scale == MetricScale::Physical {
            let ranges = prepared.normalizer.family_ranges(*family);
            for item in &mut s {
                let j = JOINTS.iter().position(|&n| n == item.joint).expect("known joint");
                for v in item.truth.iter_mut().chain(item.pred.iter_mut()) {
                    *v = ranges[j].invert(*v);
                }
            }
        }
        series.extend(s);
        infos.insert(
            family.name().to_string(),
            CheckpointInfo {
                epoch: cp.epoch,
                best_val_mse: cp.best_val_loss,
                settings_hash: cp.train_config_hash.clone(),
            },
        );
    }
    let metrics = build_report(
        &series,
        &families,
        scale,
        Some(&prepared.summary.split.test_subject),
    )?;
    let report = EvaluationReport {
        lineage,
        seed: cfg.seed,
        trial: frames[0].trial_id.clone(),
        first_sample: frames[0].start_index,
        checkpoints: infos,
        metrics,
    };
    let dir = cfg.layout().report_dir();
    write_json(&dir.join("report.json"), &report)?;
    let table = render_table(&report.metrics);
    fs::write(dir.join("report.txt"), &table).map_err(|e| PipelineError::io(dir.join("report.txt"), e))?;
    if cfg.evaluation.traces {
        write_trace_csvs(&dir.join("traces"), &series, PREPARED_RATE_HZ)?;
    }
    Ok(report)
}

/// Forecasts one window. With `input`, the last `window_len` rows of a
/// 100 Hz CSV holding the 35 prepared input columns are used; otherwise the
/// first prepared test frame. Returns physical-unit blocks per network.
pub fn cmd_predict(
    cfg: &RunConfig,
    which: Which,
    input: Option<&Path>,
) -> Result<Vec<(TargetFamily, Array2<f64>)>, PipelineError> {
    cfg.validate()?;
    let layout = cfg.layout();
    let mut out = Vec::new();
    let mut fallback: Option<Array2<f32>> = None;
    for family in which.families() {
        let cp = load_checkpoint(&layout.checkpoint(family))?;
        if cp.model_config != *cfg.model(family) {
            return Err(PipelineError::Validation(format!(
                "{family} checkpoint was built for a different model configuration"
            )));
        }
        let normalizer = cp.normalizer.clone().ok_or_else(|| {
            PipelineError::Validation(format!("{family} checkpoint carries no normalizer"))
        })?;
        let window = cp.model_config.window_len;
        let x: Array2<f32> = match input {
            Some(path) => {
                let channels = load_stream(
                    path,
                    &schema::input_columns(),
                    PREPARED_RATE_HZ,
                    &ColumnMap::default(),
                )?;
                let n = channels[0].len();
                if n < window {
                    return Err(DataError::SchemaMismatch(format!(
                        "{} has {n} rows, a window needs {window}",
                        path.display()
                    ))
                    .into());
                }
                Array2::from_shape_fn((window, channels.len()), |(t, c)| {
                    normalizer.inputs[c].apply(channels[c].samples[n - window + t]) as f32
                })
            }
            None => {
                if fallback.is_none() {
                    let prepared = load_prepared(cfg)?;
                    let f = prepared.cache.test.first().ok_or_else(|| {
                        DataError::SchemaMismatch("the prepared cache holds no test frames".into())
                    })?;
                    fallback = Some(f.inputs.clone());
                }
                fallback.clone().expect("set above")
            }
        };
        let batch = x.insert_axis(Axis(0));
        let y = predict(&cp.model_config, &cp.params, batch.view(), 1)?;
        let block = y.index_axis(Axis(0), 0).mapv(f64::from);
        out.push((family, normalizer.invert_family(family, block.view())?));
    }
    Ok(out)
}
