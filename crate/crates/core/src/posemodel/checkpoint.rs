//! `.tpck` layout: `TPCK`, u32 version, u64 header length (all little-endian),
//! a JSON header, then every tensor as little-endian f64 in table order.

use super::{ModelConfig, ModelError, PoseModel};
use crate::numerics::Tensor;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

pub const TPCK_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"TPCK";
const PREAMBLE: u64 = 16;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub epoch: usize,
    pub best_metric: Option<f64>,
    pub seed: u64,
    #[serde(default)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    /// Byte offset into the blob.
    offset: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    tensors: Vec<TensorEntry>,
    metadata: CheckpointMeta,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: PoseModel,
    pub meta: CheckpointMeta,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ModelError + '_ {
    move |source| ModelError::Io { file: path.to_path_buf(), source }
}

pub fn save_checkpoint(model: &PoseModel, meta: &CheckpointMeta, path: &Path) -> Result<(), ModelError> {
    let mut tensors = Vec::new();
    let mut offset = 0u64;
    for (_, name, t) in model.params.iter() {
        tensors.push(TensorEntry { name: name.to_string(), shape: t.shape().to_vec(), offset });
        offset += 8 * t.len() as u64;
    }
    let header = serde_json::to_vec(&Header { config: model.config.clone(), tensors, metadata: meta.clone() })
        .map_err(|e| ModelError::CorruptHeader { file: path.to_path_buf(), reason: e.to_string() })?;
    let mut out = Vec::with_capacity(PREAMBLE as usize + header.len() + offset as usize);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&TPCK_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for (_, _, t) in model.params.iter() {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, out).map_err(io_err(path))
}

/// Loads a checkpoint. Parameters come back trainable; callers freeze as needed.
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, ModelError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let file = path.to_path_buf();
    let truncated = |needed: u64, what: &str| ModelError::Truncated {
        file: file.clone(),
        offset: bytes.len() as u64,
        needed,
        what: what.to_string(),
    };
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(ModelError::BadMagic { file: file.clone() });
    }
    if (bytes.len() as u64) < PREAMBLE {
        return Err(truncated(PREAMBLE, "preamble"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != TPCK_VERSION {
        return Err(ModelError::VersionMismatch { file, found: version, expected: TPCK_VERSION });
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let blob_start = PREAMBLE.checked_add(header_len).ok_or_else(|| truncated(u64::MAX, "header"))?;
    if (bytes.len() as u64) < blob_start {
        return Err(truncated(blob_start, "header"));
    }
    let header: Header = serde_json::from_slice(&bytes[PREAMBLE as usize..blob_start as usize])
        .map_err(|e| ModelError::CorruptHeader { file: file.clone(), reason: e.to_string() })?;
    let (encoder, decoder) = PoseModel::architectures(&header.config)?;

    let mut expected: HashMap<String, Vec<usize>> = HashMap::new();
    let mut probe = crate::numerics::ParamStore::new();
    encoder.init_params(&mut probe, 0)?;
    decoder.init_params(&mut probe, 0)?;
    for (_, name, t) in probe.iter() {
        expected.insert(name.to_string(), t.shape().to_vec());
    }

    let mut seen = HashSet::new();
    let mut params = crate::numerics::ParamStore::new();
    for e in &header.tensors {
        let Some(shape) = expected.get(&e.name) else {
            return Err(ModelError::UnknownParameter { file, name: e.name.clone() });
        };
        if shape != &e.shape || !seen.insert(e.name.clone()) {
            return Err(ModelError::Config(format!(
                "{}: parameter `{}` has shape {:?}, architecture expects {:?}",
                file.display(),
                e.name,
                e.shape,
                shape
            )));
        }
        let n = e.shape.iter().product::<usize>() as u64;
        let start = blob_start + e.offset;
        let end = start + 8 * n;
        if (bytes.len() as u64) < end {
            return Err(truncated(end, &format!("tensor `{}`", e.name)));
        }
        let data = bytes[start as usize..end as usize]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        params.insert(&e.name, Tensor::new(&e.shape, data)?)?;
    }
    if let Some(name) = probe.iter().map(|(_, n, _)| n).find(|n| !seen.contains(*n)) {
        return Err(ModelError::MissingParameter { file, name: name.to_string() });
    }
    // Restore architecture order so digests and re-saves are stable.
    let mut ordered = crate::numerics::ParamStore::new();
    for (_, name, _) in probe.iter() {
        let t = params.by_name(name).unwrap();
        ordered.insert(name, Tensor::new(t.shape(), t.data().to_vec())?)?;
    }
    Ok(Checkpoint {
        model: PoseModel { config: header.config, encoder, decoder, params: ordered },
        meta: header.metadata,
    })
}

/// Loads and rejects a checkpoint whose config differs from `expected`.
pub fn load_checkpoint_expecting(path: &Path, expected: &ModelConfig) -> Result<Checkpoint, ModelError> {
    let ck = load_checkpoint(path)?;
    if &ck.model.config != expected {
        return Err(ModelError::Config(format!(
            "{}: checkpoint config does not match (latent_channels {} vs {})",
            path.display(),
            ck.model.config.encoder.latent_channels(),
            expected.encoder.latent_channels()
        )));
    }
    Ok(ck)
}
