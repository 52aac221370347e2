//! Parameter checkpoints: a flat little-endian `f64` array plus a JSON shape manifest.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mlp::{Dense, Mlp};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerShape {
    pub inputs: usize,
    pub outputs: usize,
    /// Offset of the weight block in the flat array; biases follow immediately.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeManifest {
    pub layers: Vec<LayerShape>,
    pub total: usize,
    pub dtype: String,
}

impl ShapeManifest {
    pub fn of(net: &Mlp) -> Self {
        let mut offset = 0;
        let layers = net
            .layers()
            .iter()
            .map(|l| {
                let shape = LayerShape {
                    inputs: l.inputs,
                    outputs: l.outputs,
                    offset,
                };
                offset += l.weights.len() + l.biases.len();
                shape
            })
            .collect();
        Self {
            layers,
            total: offset,
            dtype: "f64le".into(),
        }
    }
}

/// Writes `<stem>.bin` and `<stem>.json` next to each other.
pub fn save(net: &Mlp, stem: &Path) -> Result<()> {
    let bin = stem.with_extension("bin");
    let json = stem.with_extension("json");
    let bytes: Vec<u8> = net.flat_params().iter().flat_map(|p| p.to_le_bytes()).collect();
    fs::write(&bin, bytes).map_err(|e| Error::io(&bin, e))?;
    let manifest = serde_json::to_string_pretty(&ShapeManifest::of(net))?;
    fs::write(&json, manifest).map_err(|e| Error::io(&json, e))?;
    Ok(())
}

pub fn load(stem: &Path) -> Result<Mlp> {
    let bin = stem.with_extension("bin");
    let json = stem.with_extension("json");
    let text = fs::read_to_string(&json).map_err(|e| Error::io(&json, e))?;
    let manifest: ShapeManifest = serde_json::from_str(&text)?;
    let bytes = fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
    if bytes.len() != manifest.total * 8 {
        return Err(Error::DimensionMismatch {
            expected: manifest.total * 8,
            got: bytes.len(),
        });
    }
    let flat: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let layers = manifest
        .layers
        .iter()
        .map(|s| {
            let nw = s.inputs * s.outputs;
            let end = s.offset + nw + s.outputs;
            if end > flat.len() {
                return Err(Error::InvalidConfig("manifest layer runs past the parameter array".into()));
            }
            Ok(Dense {
                inputs: s.inputs,
                outputs: s.outputs,
                weights: flat[s.offset..s.offset + nw].to_vec(),
                biases: flat[s.offset + nw..end].to_vec(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Mlp::from_layers(layers)
}
