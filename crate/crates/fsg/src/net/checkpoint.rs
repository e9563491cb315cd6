//! Network persistence: magic bytes `FSG1`, a little-endian u32 header
//! length, a JSON manifest of `{layer, tensor, shape, dtype, byte_offset}`
//! records, then the raw little-endian f32 blobs, contiguous and in
//! manifest order. Round trips are bit-exact.
//!
//! The input mode travels as a one-element pseudo-tensor under
//! `meta/input_mode`, so the file format stays a flat tensor archive.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{FsgError, FsgResult};
use crate::tensor::Tensor;

use super::{build_network, InputMode, Network, NetworkConfig};

const MAGIC: &[u8; 4] = b"FSG1";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ManifestEntry {
    layer: String,
    tensor: String,
    shape: Vec<usize>,
    dtype: String,
    byte_offset: u64,
}

/// Serializes every registry tensor plus the input-mode pseudo-tensor.
pub fn save_checkpoint(net: &Network, path: &Path) -> FsgResult<()> {
    let mut manifest = Vec::new();
    let mut payload: Vec<u8> = Vec::new();
    for (layer, tensor, idx) in net.entries() {
        let t = &net.params[idx];
        manifest.push(ManifestEntry {
            layer,
            tensor: tensor.to_string(),
            shape: t.shape().to_vec(),
            dtype: "f32".into(),
            byte_offset: payload.len() as u64,
        });
        for v in t.data() {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    manifest.push(ManifestEntry {
        layer: "meta".into(),
        tensor: "input_mode".into(),
        shape: vec![1, 1, 1, 1],
        dtype: "f32".into(),
        byte_offset: payload.len() as u64,
    });
    payload.extend_from_slice(&net.mode.code().to_le_bytes());

    let header = serde_json::to_vec(&manifest)?;
    let mut buf = Vec::with_capacity(8 + header.len() + payload.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(header.len() as u32).to_le_bytes());
    buf.extend_from_slice(&header);
    buf.extend_from_slice(&payload);
    fs::write(path, buf).map_err(|e| FsgError::io(path.display(), e))
}

/// Reads `count` f32 values starting at `offset` into the payload region.
fn read_blob(payload: &[u8], offset: u64, count: usize) -> FsgResult<Vec<f32>> {
    let start = usize::try_from(offset)
        .ok()
        .ok_or_else(|| FsgError::format("checkpoint", "tensor offset overflows usize"))?;
    let bytes = count
        .checked_mul(4)
        .and_then(|b| b.checked_add(start))
        .ok_or_else(|| FsgError::format("checkpoint", "tensor extent overflows usize"))?;
    if payload.len() < bytes {
        return Err(FsgError::CheckpointTruncated {
            expected: bytes,
            got: payload.len(),
        });
    }
    Ok(payload[start..bytes]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

/// Loads a checkpoint into a network built from `config`'s layer table.
/// The manifest must cover every registry tensor with matching shapes.
pub fn load_checkpoint_with(path: &Path, config: &NetworkConfig) -> FsgResult<Network> {
    let bytes = fs::read(path).map_err(|e| FsgError::io(path.display(), e))?;
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(FsgError::CheckpointBadMagic);
    }
    if bytes.len() < 8 {
        return Err(FsgError::CheckpointTruncated {
            expected: 8,
            got: bytes.len(),
        });
    }
    let hlen = u32::from_le_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]) as usize;
    if bytes.len() < 8 + hlen {
        return Err(FsgError::CheckpointTruncated {
            expected: 8 + hlen,
            got: bytes.len(),
        });
    }
    let manifest: Vec<ManifestEntry> = serde_json::from_slice(&bytes[8..8 + hlen])?;
    let payload = &bytes[8 + hlen..];

    let find = |layer: &str, tensor: &str| {
        manifest
            .iter()
            .find(|m| m.layer == layer && m.tensor == tensor)
            .ok_or_else(|| {
                FsgError::format("checkpoint", format!("manifest is missing {layer}/{tensor}"))
            })
    };

    let mut net = build_network(config, InputMode::Fsg)?;
    for (layer, tensor, idx) in net.entries() {
        let entry = find(&layer, tensor)?;
        if entry.dtype != "f32" {
            return Err(FsgError::format(
                "checkpoint",
                format!("{layer}/{tensor}: unsupported dtype {:?}", entry.dtype),
            ));
        }
        let wanted = net.params[idx].shape();
        if entry.shape.as_slice() != wanted.as_slice() {
            return Err(FsgError::CheckpointShape {
                layer,
                tensor: tensor.to_string(),
                manifest: entry.shape.clone(),
                wanted: wanted.to_vec(),
            });
        }
        let data = read_blob(payload, entry.byte_offset, wanted.iter().product())?;
        net.params[idx] = Tensor::new(wanted, data)?;
    }

    let meta = find("meta", "input_mode")?;
    let code = read_blob(payload, meta.byte_offset, 1)?[0];
    net.mode = InputMode::from_code(code)?;
    Ok(net)
}

/// [`load_checkpoint_with`] against the default layer table — the form the
/// CLI uses, since production checkpoints all share one architecture.
pub fn load_checkpoint(path: &Path) -> FsgResult<Network> {
    load_checkpoint_with(path, &NetworkConfig::default())
}
