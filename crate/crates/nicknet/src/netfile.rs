//! Network files: JSON with a format version, layer sizes, and per layer
//! the scale, row-major weights and thresholds.
//!
//! Reals are written in shortest round-trip form, so loading a saved
//! network reproduces every value bit for bit.

use std::fs;
use std::path::Path;

use nicknet_core::ann::{Layer, NetworkSpec};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    format_version: u32,
    layer_sizes: Vec<usize>,
    input_scale: f64,
    layers: Vec<LayerFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerFile {
    scale: f64,
    weights: Vec<f64>,
    thresholds: Vec<f64>,
}

pub fn to_json(net: &NetworkSpec) -> String {
    let file = NetworkFile {
        format_version: FORMAT_VERSION,
        layer_sizes: net.layer_sizes(),
        input_scale: net.input_scale,
        layers: net
            .layers
            .iter()
            .map(|l| LayerFile {
                scale: l.scale,
                weights: l.weights.clone(),
                thresholds: l.thresholds.clone(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("network serializes")
}

pub fn from_json(text: &str) -> Result<NetworkSpec> {
    let file: NetworkFile =
        serde_json::from_str(text).map_err(|e| Error::Format(format!("network file: {e}")))?;
    if file.format_version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "network file: format_version {} is not supported (expected {FORMAT_VERSION})",
            file.format_version
        )));
    }
    if file.layer_sizes.len() != file.layers.len() + 1 {
        return Err(Error::Consistency(format!(
            "network file: {} layer sizes for {} layers",
            file.layer_sizes.len(),
            file.layers.len()
        )));
    }
    let layers = file
        .layers
        .into_iter()
        .zip(file.layer_sizes.windows(2))
        .map(|(l, w)| Layer {
            inputs: w[0],
            outputs: w[1],
            weights: l.weights,
            thresholds: l.thresholds,
            scale: l.scale,
        })
        .collect();
    Ok(NetworkSpec::new(layers, file.input_scale)?)
}

pub fn save(net: &NetworkSpec, path: &Path) -> Result<()> {
    fs::write(path, to_json(net) + "\n").map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<NetworkSpec> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text)
}
