use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::data::schema::{NUM_INPUTS, NUM_JOINTS};
use crate::data::{FramingConfig, SynthProfile, TargetFamily};
use crate::dsp::EnvelopeConfig;
use crate::eval::{HorizonRows, MetricScale};
use crate::nn::ModelConfig;
use crate::optim::TrainConfig;
use crate::util::config_hash;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusSource {
    /// Generated by `synth` into `<out>/corpus`.
    Synthetic {
        subjects: usize,
        #[serde(default)]
        profile: SynthProfile,
    },
    /// An existing corpus; relative paths resolve against the config file.
    Manifest { path: PathBuf },
}

impl Default for CorpusSource {
    fn default() -> Self {
        Self::Synthetic {
            subjects: 8,
            profile: SynthProfile::default(),
        }
    }
}

/// Held-out subjects. Unset ids default to the last (test) and second to
/// last (validation) subject in manifest order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub test: Option<String>,
    pub val: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSettings {
    /// Length of the contiguous run of test frames that is scored.
    pub frames: usize,
    /// Frame stride used for the test subject.
    pub stride: usize,
    pub rows: HorizonRows,
    /// Also write per-joint truth/prediction CSVs.
    pub traces: bool,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            frames: 1000,
            stride: 1,
            rows: HorizonRows::default(),
            traces: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Angles,
    Moments,
    Both,
}

impl Which {
    pub fn families(self) -> Vec<TargetFamily> {
        match self {
            Which::Angles => vec![TargetFamily::Angles],
            Which::Moments => vec![TargetFamily::Moments],
            Which::Both => TargetFamily::ALL.to_vec(),
        }
    }
}

impl std::str::FromStr for Which {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "angles" => Ok(Which::Angles),
            "moments" => Ok(Which::Moments),
            "both" => Ok(Which::Both),
            other => Err(format!("unknown network `{other}` (angles|moments|both)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub corpus: CorpusSource,
    pub envelope: EnvelopeConfig,
    pub framing: FramingConfig,
    pub split: SplitSpec,
    pub model_angles: ModelConfig,
    pub model_moments: ModelConfig,
    /// Its `seed` and `checkpoint_dir` are overridden by the run.
    pub train: TrainConfig,
    pub evaluation: EvalSettings,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub scale: MetricScale,
    /// Serial execution. Every code path is currently serial, so this is
    /// recorded but changes nothing.
    pub deterministic: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            corpus: CorpusSource::default(),
            envelope: EnvelopeConfig::default(),
            framing: FramingConfig::default(),
            split: SplitSpec::default(),
            model_angles: ModelConfig::default(),
            model_moments: ModelConfig::default(),
            train: TrainConfig::default(),
            evaluation: EvalSettings::default(),
            seed: 0,
            output_dir: PathBuf::from("out"),
            scale: MetricScale::default(),
            deterministic: true,
        }
    }
}

impl RunConfig {
    /// Reads a JSON config; a relative manifest path is resolved against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| PipelineError::Validation(format!("{}: {e}", path.display())))?;
        if let CorpusSource::Manifest { path: m } = &mut cfg.corpus {
            if m.is_relative() {
                if let Some(dir) = path.parent() {
                    *m = dir.join(&*m);
                }
            }
        }
        Ok(cfg)
    }

    pub fn model(&self, family: TargetFamily) -> &ModelConfig {
        match family {
            TargetFamily::Angles => &self.model_angles,
            TargetFamily::Moments => &self.model_moments,
        }
    }

    pub fn layout(&self) -> Layout {
        Layout {
            root: self.output_dir.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Validation(m));
        match &self.corpus {
            CorpusSource::Synthetic { subjects, profile } => {
                if *subjects == 0 {
                    return bad("empty corpus: synthetic subject count is 0".into());
                }
                profile
                    .validate()
                    .map_err(|e| PipelineError::Validation(e.to_string()))?;
            }
            CorpusSource::Manifest { path } => {
                if !path.is_file() {
                    return bad(format!("corpus manifest {} does not exist", path.display()));
                }
            }
        }
        for framing in [self.framing, self.eval_framing()] {
            framing
                .validate()
                .map_err(|e| PipelineError::Validation(e.to_string()))?;
        }
        for family in TargetFamily::ALL {
            let m = self.model(family);
            m.validate()
                .map_err(|e| PipelineError::Validation(format!("model_{family}: {e}")))?;
            let checks = [
                ("window_len", m.window_len, self.framing.window_len),
                ("horizon_len", m.horizon_len, self.framing.horizon_len),
                ("input_channels", m.input_channels, NUM_INPUTS),
                ("output_channels", m.output_channels, NUM_JOINTS),
            ];
            for (name, got, want) in checks {
                if got != want {
                    return bad(format!("model_{family}.{name} is {got}, expected {want}"));
                }
            }
        }
        let rows = self.evaluation.rows;
        if rows.close >= self.framing.horizon_len || rows.distant >= self.framing.horizon_len {
            return bad(format!(
                "evaluation rows {}/{} exceed horizon_len {}",
                rows.close, rows.distant, self.framing.horizon_len
            ));
        }
        if self.evaluation.frames == 0 {
            return bad("evaluation.frames must be at least 1".into());
        }
        self.train.validate()?;
        Ok(())
    }

    pub fn eval_framing(&self) -> FramingConfig {
        FramingConfig {
            stride: self.evaluation.stride,
            ..self.framing
        }
    }

    /// Lineage of the corpus: generation settings for synthetic corpora,
    /// the manifest bytes otherwise.
    pub fn corpus_hash(&self) -> Result<String, PipelineError> {
        match &self.corpus {
            CorpusSource::Synthetic { .. } => Ok(config_hash(&(&self.corpus, self.seed))),
            CorpusSource::Manifest { path } => {
                let bytes = std::fs::read(path).map_err(|e| PipelineError::io(path, e))?;
                Ok(crate::util::short_digest(&bytes))
            }
        }
    }

    /// Lineage of the prepared frames.
    pub fn prepared_hash(&self) -> Result<String, PipelineError> {
        Ok(config_hash(&(
            self.corpus_hash()?,
            &self.envelope,
            &self.framing,
            &self.split,
            self.evaluation.stride,
            self.seed,
        )))
    }

    /// Training settings as used for one run.
    pub fn train_config(&self, family: TargetFamily) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            checkpoint_dir: Some(self.layout().work_dir(family)),
            ..self.train.clone()
        }
    }
}

/// Paths inside the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn corpus_dir(&self) -> PathBuf {
        self.root.join("corpus")
    }
    pub fn manifest(&self) -> PathBuf {
        self.corpus_dir().join("manifest.json")
    }
    pub fn prepared_dir(&self) -> PathBuf {
        self.root.join("prepared")
    }
    pub fn cache(&self, hash: &str) -> PathBuf {
        self.prepared_dir().join(format!("frames-{hash}.bin"))
    }
    pub fn normalizer(&self) -> PathBuf {
        self.prepared_dir().join("normalizer.json")
    }
    pub fn summary(&self) -> PathBuf {
        self.prepared_dir().join("summary.json")
    }
    pub fn checkpoint(&self, family: TargetFamily) -> PathBuf {
        self.root.join("checkpoints").join(format!("{family}.ckpt"))
    }
    pub fn work_dir(&self, family: TargetFamily) -> PathBuf {
        self.root.join("checkpoints").join(family.name())
    }
    pub fn train_log(&self, family: TargetFamily) -> PathBuf {
        self.root.join("logs").join(format!("train_{family}.jsonl"))
    }
    pub fn report_dir(&self) -> PathBuf {
        self.root.join("report")
    }
}
