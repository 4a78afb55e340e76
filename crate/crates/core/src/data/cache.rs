//! Binary cache of prepared frames.
//!
//! Layout: `GAITFRM1` magic, u32 LE header length, JSON header, then for
//! every frame its input block followed by its target block as row-major
//! little-endian f32, then a SHA-256 of all preceding bytes.

use std::io::Write;
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{DataError, Frame};

const MAGIC: &[u8; 8] = b"GAITFRM1";
pub const CACHE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMeta {
    pub subject_id: String,
    pub trial_id: String,
    pub start_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameCacheHeader {
    pub version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub window_len: usize,
    pub horizon_len: usize,
    pub input_channels: usize,
    pub target_channels: usize,
    pub train: Vec<FrameMeta>,
    pub val: Vec<FrameMeta>,
    pub test: Vec<FrameMeta>,
}

/// Frames of one prepared corpus, split by role. Train frames are stored
/// already shuffled; val/test frames in temporal order.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameCache {
    pub config_hash: String,
    pub seed: u64,
    pub train: Vec<Frame>,
    pub val: Vec<Frame>,
    pub test: Vec<Frame>,
}

fn meta(frames: &[Frame]) -> Vec<FrameMeta> {
    frames
        .iter()
        .map(|f| FrameMeta {
            subject_id: f.subject_id.clone(),
            trial_id: f.trial_id.clone(),
            start_index: f.start_index,
        })
        .collect()
}

/// Serializes the cache and returns the digest of the written bytes.
pub fn write_frame_cache(path: &Path, cache: &FrameCache) -> Result<String, DataError> {
    let all = || cache.train.iter().chain(&cache.val).chain(&cache.test);
    let (window_len, input_channels, horizon_len, target_channels) = all()
        .next()
        .map(|f| (f.inputs.nrows(), f.inputs.ncols(), f.targets.nrows(), f.targets.ncols()))
        .unwrap_or((0, 0, 0, 0));
    if all().any(|f| {
        f.inputs.dim() != (window_len, input_channels) || f.targets.dim() != (horizon_len, target_channels)
    }) {
        return Err(DataError::Cache("frames have inconsistent shapes".into()));
    }
    let header = FrameCacheHeader {
        version: CACHE_VERSION,
        config_hash: cache.config_hash.clone(),
        seed: cache.seed,
        window_len,
        horizon_len,
        input_channels,
        target_channels,
        train: meta(&cache.train),
        val: meta(&cache.val),
        test: meta(&cache.test),
    };
    let header_bytes = serde_json::to_vec(&header).expect("header serializes");
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(header_bytes.len() as u32).to_le_bytes());
    buf.extend_from_slice(&header_bytes);
    for f in all() {
        for v in f.inputs.iter().chain(f.targets.iter()) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    let mut file = std::fs::File::create(path).map_err(|e| DataError::io(path, e))?;
    file.write_all(&buf).map_err(|e| DataError::io(path, e))?;
    Ok(hex::encode(&digest[..8]))
}

pub fn read_frame_cache(path: &Path) -> Result<FrameCache, DataError> {
    let bytes = std::fs::read(path).map_err(|e| DataError::io(path, e))?;
    let corrupt = |msg: &str| DataError::Cache(format!("{}: {msg}", path.display()));
    if bytes.len() < MAGIC.len() + 4 + 32 || &bytes[..8] != MAGIC {
        return Err(corrupt("not a frame cache"));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(corrupt("checksum mismatch (truncated or corrupted)"));
    }
    let header_len = LittleEndian::read_u32(&body[8..12]) as usize;
    let header_end = 12 + header_len;
    if body.len() < header_end {
        return Err(corrupt("header overruns file"));
    }
    let header: FrameCacheHeader = serde_json::from_slice(&body[12..header_end])
        .map_err(|e| corrupt(&format!("bad header: {e}")))?;
    if header.version != CACHE_VERSION {
        return Err(corrupt(&format!("unsupported version {}", header.version)));
    }
    let in_len = header.window_len * header.input_channels;
    let tg_len = header.horizon_len * header.target_channels;
    let total = header.train.len() + header.val.len() + header.test.len();
    let payload = &body[header_end..];
    if payload.len() != total * (in_len + tg_len) * 4 {
        return Err(corrupt("payload size does not match header"));
    }
    let mut values = vec![0f32; payload.len() / 4];
    LittleEndian::read_f32_into(payload, &mut values);
    let mut chunks = values.chunks_exact(in_len + tg_len);
    let mut take = |metas: &[FrameMeta]| -> Vec<Frame> {
        metas
            .iter()
            .map(|m| {
                let chunk = chunks.next().expect("payload length checked");
                Frame {
                    inputs: Array2::from_shape_vec(
                        (header.window_len, header.input_channels),
                        chunk[..in_len].to_vec(),
                    )
                    .expect("shape checked"),
                    targets: Array2::from_shape_vec(
                        (header.horizon_len, header.target_channels),
                        chunk[in_len..].to_vec(),
                    )
                    .expect("shape checked"),
                    subject_id: m.subject_id.clone(),
                    trial_id: m.trial_id.clone(),
                    start_index: m.start_index,
                }
            })
            .collect()
    };
    let train = take(&header.train);
    let val = take(&header.val);
    let test = take(&header.test);
    Ok(FrameCache {
        config_hash: header.config_hash,
        seed: header.seed,
        train,
        val,
        test,
    })
}
