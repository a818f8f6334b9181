//! Checkpoint file layout:
//!
//! ```text
//! "RMXT" | u32 version | u32 metadata length | UTF-8 JSON metadata | f32 payloads
//! ```
//!
//! All integers and floats are little-endian. The metadata carries the
//! architecture and a tensor manifest (name, shape, byte offset into the
//! payload section). Optimizer moments, when present, are stored as extra
//! tensors prefixed `adam.`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{MaskNetParams, ModelArch};
use crate::error::{Error, Result};
use crate::optim::{AdamState, ParamTensors};
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"RMXT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AdamMeta {
    step: u64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Metadata {
    arch: ModelArch,
    tensors: Vec<TensorEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    adam: Option<AdamMeta>,
}

pub fn save_checkpoint<T: Scalar>(params: &MaskNetParams<T>, path: impl AsRef<Path>) -> Result<()> {
    save_checkpoint_with_state(params, None, path)
}

/// Writes parameters (cast to `f32`) and, optionally, the optimizer state.
pub fn save_checkpoint_with_state<T: Scalar>(
    params: &MaskNetParams<T>,
    adam: Option<&AdamState<T>>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut names = params.tensor_names();
    let mut shapes = params.tensor_shapes();
    let mut payloads: Vec<&[T]> = params.tensors();
    if let Some(state) = adam {
        for (kind, moments) in [("m", &state.first), ("v", &state.second)] {
            for ((name, shape), data) in params
                .tensor_names()
                .into_iter()
                .zip(params.tensor_shapes())
                .zip(moments)
            {
                names.push(format!("adam.{kind}.{name}"));
                shapes.push(shape);
                payloads.push(data);
            }
        }
    }
    let mut offset = 0;
    let tensors = names
        .into_iter()
        .zip(shapes)
        .zip(&payloads)
        .map(|((name, shape), data)| {
            let entry = TensorEntry { name, shape, offset };
            offset += data.len() * 4;
            entry
        })
        .collect();
    let meta = Metadata {
        arch: params.arch,
        tensors,
        adam: adam.map(|s| AdamMeta {
            step: s.step,
            beta1: s.beta1,
            beta2: s.beta2,
            eps: s.eps,
        }),
    };
    let json = serde_json::to_vec(&meta)?;
    let mut bytes = Vec::with_capacity(12 + json.len() + offset);
    bytes.extend_from_slice(CHECKPOINT_MAGIC);
    bytes.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(json.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&json);
    for data in payloads {
        for v in data {
            bytes.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<MaskNetParams<f32>> {
    load_checkpoint_with_state(path).map(|(p, _)| p)
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptCheckpoint(msg.into())
}

fn read_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
        .ok_or_else(|| corrupt("truncated header"))
}

pub fn load_checkpoint_with_state(path: impl AsRef<Path>) -> Result<(MaskNetParams<f32>, Option<AdamState<f32>>)> {
    let bytes = fs::read(path)?;
    if bytes.len() < 4 {
        return Err(corrupt("truncated header"));
    }
    if &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::NotACheckpoint);
    }
    let version = read_u32(&bytes, 4)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::CheckpointVersion(version));
    }
    let meta_len = read_u32(&bytes, 8)? as usize;
    let meta_bytes = bytes
        .get(12..12 + meta_len)
        .ok_or_else(|| corrupt("truncated metadata"))?;
    let meta: Metadata = serde_json::from_slice(meta_bytes).map_err(|e| corrupt(format!("bad metadata: {e}")))?;
    let payload = &bytes[12 + meta_len..];

    let mut params = MaskNetParams::<f32>::zeros(meta.arch).map_err(|e| corrupt(format!("bad architecture: {e}")))?;
    let expected_names = params.tensor_names();
    let expected_shapes = params.tensor_shapes();
    let n = expected_names.len();
    let with_adam = meta.adam.is_some();
    let expected_count = if with_adam { 3 * n } else { n };
    if meta.tensors.len() != expected_count {
        return Err(corrupt(format!(
            "manifest lists {} tensors, architecture needs {expected_count}",
            meta.tensors.len()
        )));
    }

    let read_tensor = |entry: &TensorEntry, name: &str, shape: &[usize]| -> Result<Vec<f32>> {
        if entry.name != name || entry.shape != shape {
            return Err(corrupt(format!(
                "tensor {} {:?} does not match expected {name} {shape:?}",
                entry.name, entry.shape
            )));
        }
        let len: usize = shape.iter().product();
        let raw = payload
            .get(entry.offset..entry.offset + 4 * len)
            .ok_or_else(|| corrupt(format!("payload of {name} is truncated")))?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect())
    };

    for ((dst, entry), (name, shape)) in params
        .tensors_mut()
        .into_iter()
        .zip(&meta.tensors)
        .zip(expected_names.iter().zip(&expected_shapes))
    {
        dst.copy_from_slice(&read_tensor(entry, name, shape)?);
    }

    let adam = match meta.adam {
        None => None,
        Some(am) => {
            let mut state = AdamState::new(&params);
            state.step = am.step;
            state.beta1 = am.beta1;
            state.beta2 = am.beta2;
            state.eps = am.eps;
            for (k, (kind, moments)) in [("m", &mut state.first), ("v", &mut state.second)]
                .into_iter()
                .enumerate()
            {
                for (i, (name, shape)) in expected_names.iter().zip(&expected_shapes).enumerate() {
                    let entry = &meta.tensors[n * (k + 1) + i];
                    moments[i] = read_tensor(entry, &format!("adam.{kind}.{name}"), shape)?;
                }
            }
            Some(state)
        }
    };
    Ok((params, adam))
}
