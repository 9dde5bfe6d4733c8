//! Binary checkpoint: an 8-byte little-endian header length, a JSON header
//! naming every tensor with its shape and byte offset, then the raw
//! little-endian f64 payload.

use std::fs::File;
use std::io::{BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FusionModel, ModelConfig, ModelError};
use crate::tensor::{ParamStore, Tensor};

pub const CHECKPOINT_MAGIC: &str = "YLDM";
pub const CHECKPOINT_VERSION: u32 = 1;

// Headers beyond this are treated as garbage rather than allocated.
const MAX_HEADER: u64 = 64 << 20;

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    config: ModelConfig,
    tensors: Vec<TensorEntry>,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: u64,
}

pub fn save_checkpoint(model: &FusionModel, path: &Path) -> Result<(), ModelError> {
    let mut offset = 0u64;
    let tensors = model
        .params()
        .iter()
        .map(|(_, name, t)| {
            let e = TensorEntry {
                name: name.to_string(),
                shape: t.shape().to_vec(),
                offset,
            };
            offset += 8 * t.len() as u64;
            e
        })
        .collect();
    let header = Header {
        format: CHECKPOINT_MAGIC.into(),
        version: CHECKPOINT_VERSION,
        config: model.config().clone(),
        tensors,
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    for (_, _, t) in model.params().iter() {
        for v in t.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<FusionModel, ModelError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 8 {
        return Err(ModelError::BadMagic(
            "file shorter than header length".into(),
        ));
    }
    let hlen = u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes"));
    if hlen > MAX_HEADER || 8 + hlen > bytes.len() as u64 {
        return Err(ModelError::BadMagic(format!(
            "implausible header length {hlen}"
        )));
    }
    let hlen = hlen as usize;
    let value: serde_json::Value = serde_json::from_slice(&bytes[8..8 + hlen])
        .map_err(|e| ModelError::BadMagic(format!("header is not JSON: {e}")))?;
    if value.get("format").and_then(|f| f.as_str()) != Some(CHECKPOINT_MAGIC) {
        return Err(ModelError::BadMagic("missing format tag".into()));
    }
    let version = value
        .get("version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| ModelError::BadMagic("missing version".into()))?;
    if version != u64::from(CHECKPOINT_VERSION) {
        return Err(ModelError::VersionMismatch(version as u32));
    }
    let header: Header = serde_json::from_value(value)
        .map_err(|e| ModelError::BadMagic(format!("malformed header: {e}")))?;

    let payload = &bytes[8 + hlen..];
    let mut store = ParamStore::new();
    for e in header.tensors {
        let n: usize = e.shape.iter().product();
        let start = e.offset as usize;
        let end = start
            .checked_add(8 * n)
            .filter(|&end| end <= payload.len())
            .ok_or_else(|| {
                std::io::Error::new(
                    ErrorKind::UnexpectedEof,
                    format!("payload truncated in tensor {}", e.name),
                )
            })?;
        let data = payload[start..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let t = Tensor::new(e.shape, data)
            .map_err(|err| ModelError::ShapeMismatch(format!("{}: {err}", e.name)))?;
        store.add(e.name, t);
    }
    FusionModel::from_params(header.config, store)
}

/// Loads a checkpoint and insists it was written for `expected`.
pub fn load_checkpoint_for(path: &Path, expected: &ModelConfig) -> Result<FusionModel, ModelError> {
    let model = load_checkpoint(path)?;
    if model.config() != expected {
        return Err(ModelError::ShapeMismatch(format!(
            "checkpoint config {:?} differs from expected {:?}",
            model.config(),
            expected
        )));
    }
    Ok(model)
}
