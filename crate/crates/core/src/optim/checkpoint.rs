//! Checkpoint files.
//!
//! Layout: `GAITCKPT` magic, u32 LE format version, u32 LE header length,
//! JSON header, then little-endian f32 payload (parameters in canonical
//! tensor order, followed by the Adam `m`, `v` and `v_max` buffers), then a
//! SHA-256 of every preceding byte.

use std::fs;
use std::io::Write;
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{AdamConfig, AdamState, OptimError};
use crate::data::{Normalizer, TargetFamily};
use crate::nn::{ModelConfig, ModelParams};
use crate::util::config_hash;

const MAGIC: &[u8; 8] = b"GAITCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub family: TargetFamily,
    pub model_config: ModelConfig,
    pub params: ModelParams<f32>,
    pub optimizer: AdamState<f32>,
    pub adam: AdamConfig,
    pub normalizer: Option<Normalizer>,
    /// Hash of the training settings that must match to resume.
    pub train_config_hash: String,
    /// Number of completed epochs.
    pub epoch: usize,
    pub best_val_loss: Option<f64>,
    /// Hash of the prepared data the network was trained on.
    pub lineage: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    family: TargetFamily,
    model_config: ModelConfig,
    model_config_hash: String,
    train_config_hash: String,
    epoch: usize,
    best_val_loss: Option<f64>,
    adam: AdamConfig,
    optimizer_step: u64,
    normalizer: Option<Normalizer>,
    lineage: String,
    tensors: Vec<TensorEntry>,
}

fn put_f32s(buf: &mut Vec<u8>, values: impl Iterator<Item = f32>) {
    let mut word = [0u8; 4];
    for v in values {
        LittleEndian::write_f32(&mut word, v);
        buf.extend_from_slice(&word);
    }
}

fn encode(cp: &Checkpoint) -> Vec<u8> {
    let header = Header {
        family: cp.family,
        model_config: cp.model_config,
        model_config_hash: config_hash(&cp.model_config),
        train_config_hash: cp.train_config_hash.clone(),
        epoch: cp.epoch,
        best_val_loss: cp.best_val_loss,
        adam: cp.adam,
        optimizer_step: cp.optimizer.step,
        normalizer: cp.normalizer.clone(),
        lineage: cp.lineage.clone(),
        tensors: cp
            .params
            .tensors()
            .into_iter()
            .map(|(name, t)| TensorEntry {
                name,
                shape: t.shape().to_vec(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut buf = Vec::with_capacity(16 + json.len() + cp.params.param_count() * 16 + 32);
    buf.extend_from_slice(MAGIC);
    let mut word = [0u8; 4];
    LittleEndian::write_u32(&mut word, CHECKPOINT_VERSION);
    buf.extend_from_slice(&word);
    LittleEndian::write_u32(&mut word, json.len() as u32);
    buf.extend_from_slice(&word);
    buf.extend_from_slice(&json);
    put_f32s(&mut buf, cp.params.to_flat().into_iter());
    for state in [&cp.optimizer.m, &cp.optimizer.v, &cp.optimizer.v_max] {
        put_f32s(&mut buf, state.iter().copied());
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    buf
}

/// Writes to a sibling temporary file and renames it into place.
pub fn save_checkpoint(cp: &Checkpoint, path: &Path) -> Result<(), OptimError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| OptimError::io(dir, e))?;
    }
    let tmp = path.with_extension("ckpt.tmp");
    let bytes = encode(cp);
    let mut f = fs::File::create(&tmp).map_err(|e| OptimError::io(&tmp, e))?;
    f.write_all(&bytes).map_err(|e| OptimError::io(&tmp, e))?;
    f.sync_all().map_err(|e| OptimError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| OptimError::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, OptimError> {
    let bytes = fs::read(path).map_err(|e| OptimError::io(path, e))?;
    decode(&bytes).map_err(|reason| OptimError::Checkpoint {
        path: path.to_path_buf(),
        reason,
    })
}

fn decode(bytes: &[u8]) -> Result<Checkpoint, String> {
    if bytes.len() < 16 + DIGEST_LEN || &bytes[..8] != MAGIC {
        return Err("not a checkpoint file (bad magic or too short)".into());
    }
    let version = LittleEndian::read_u32(&bytes[8..12]);
    if version != CHECKPOINT_VERSION {
        return Err(format!(
            "unsupported format version {version} (expected {CHECKPOINT_VERSION})"
        ));
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(body).as_slice() != digest {
        return Err("checksum mismatch (file truncated or corrupted)".into());
    }
    let header_len = LittleEndian::read_u32(&body[12..16]) as usize;
    let json = body
        .get(16..16 + header_len)
        .ok_or("header extends past end of file")?;
    let header: Header =
        serde_json::from_slice(json).map_err(|e| format!("unreadable header: {e}"))?;
    header
        .model_config
        .validate()
        .map_err(|e| e.to_string())?;
    if header.model_config_hash != config_hash(&header.model_config) {
        return Err("model config hash does not match its config".into());
    }
    let mut params = ModelParams::<f32>::zeros(&header.model_config);
    let expected: Vec<(String, Vec<usize>)> = params
        .tensors()
        .into_iter()
        .map(|(n, t)| (n, t.shape().to_vec()))
        .collect();
    let listed: Vec<(String, Vec<usize>)> = header
        .tensors
        .iter()
        .map(|t| (t.name.clone(), t.shape.clone()))
        .collect();
    if expected != listed {
        return Err("tensor table does not match the model config".into());
    }
    let n = params.param_count();
    let payload = &body[16 + header_len..];
    if payload.len() != 4 * 4 * n {
        return Err(format!(
            "payload holds {} bytes, expected {}",
            payload.len(),
            16 * n
        ));
    }
    let read = |k: usize| -> Vec<f32> {
        payload[4 * n * k..4 * n * (k + 1)]
            .chunks_exact(4)
            .map(LittleEndian::read_f32)
            .collect()
    };
    params.assign_flat(&read(0));
    let optimizer = AdamState {
        step: header.optimizer_step,
        m: read(1),
        v: read(2),
        v_max: read(3),
    };
    Ok(Checkpoint {
        family: header.family,
        model_config: header.model_config,
        params,
        optimizer,
        adam: header.adam,
        normalizer: header.normalizer,
        train_config_hash: header.train_config_hash,
        epoch: header.epoch,
        best_val_loss: header.best_val_loss,
        lineage: header.lineage,
    })
}
