//! Binary container of named `f64` tensors.
//!
//! Layout: the 8-byte magic `STBCKPT1`, a little-endian `u64` header length,
//! a JSON header, then every tensor's values (row-major, little-endian) in
//! header order.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autograd::Mat;
use crate::params::ParamStore;
use crate::ModelError;

const MAGIC: &[u8; 8] = b"STBCKPT1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: [usize; 2],
    pub frozen: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub tensors: Vec<TensorEntry>,
    /// Free-form metadata such as the model configuration.
    #[serde(default)]
    pub meta: serde_json::Value,
}

pub fn encode_checkpoint(store: &ParamStore, meta: serde_json::Value) -> Vec<u8> {
    let tensors = store
        .iter()
        .map(|(name, p)| TensorEntry {
            name: name.to_string(),
            shape: [p.value.nrows(), p.value.ncols()],
            frozen: p.frozen,
        })
        .collect();
    let header = serde_json::to_vec(&CheckpointHeader { tensors, meta }).expect("header serialises");
    let mut out = Vec::with_capacity(16 + header.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for (_, p) in store.iter() {
        for x in p.value.iter() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(ParamStore, serde_json::Value), String> {
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err("bad magic".into());
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body_start = 16usize.checked_add(header_len).filter(|&e| e <= bytes.len()).ok_or("truncated header")?;
    let header: CheckpointHeader = serde_json::from_slice(&bytes[16..body_start]).map_err(|e| e.to_string())?;
    let mut cursor = body_start;
    let mut store = ParamStore::new();
    for entry in header.tensors {
        let [r, c] = entry.shape;
        let n = r.checked_mul(c).ok_or("shape overflow")?;
        let end = n
            .checked_mul(8)
            .and_then(|b| cursor.checked_add(b))
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| format!("truncated data for {}", entry.name))?;
        let values = bytes[cursor..end]
            .chunks_exact(8)
            .map(|ch| f64::from_le_bytes(ch.try_into().expect("8 bytes")))
            .collect();
        cursor = end;
        let value = Mat::from_shape_vec((r, c), values).map_err(|e| e.to_string())?;
        store.insert(entry.name, value, entry.frozen);
    }
    if cursor != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - cursor));
    }
    Ok((store, header.meta))
}

pub fn save_checkpoint(path: &Path, store: &ParamStore, meta: serde_json::Value) -> Result<(), ModelError> {
    let err = |e: std::io::Error| ModelError::Checkpoint {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut f = fs::File::create(path).map_err(err)?;
    f.write_all(&encode_checkpoint(store, meta)).map_err(err)
}

pub fn load_checkpoint(path: &Path) -> Result<(ParamStore, serde_json::Value), ModelError> {
    let err = |message: String| ModelError::Checkpoint {
        path: path.display().to_string(),
        message,
    };
    let bytes = fs::read(path).map_err(|e| err(e.to_string()))?;
    decode_checkpoint(&bytes).map_err(err)
}
