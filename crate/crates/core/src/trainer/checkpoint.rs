//! Versioned JSON checkpoints.
//!
//! Numbers are written in shortest round-trip decimal form, so loading a
//! checkpoint restores every parameter and moment bit for bit, and saving
//! it again produces the same bytes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, TrainingHistory};
use crate::error::{Error, Result};
use crate::network::{Activation, LayerSpec, NetworkParams};
use crate::optimizer::AdamState;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Complete training state.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub version: u32,
    pub config: ExperimentConfig,
    pub params: NetworkParams,
    pub adam: AdamState,
    /// Completed epochs.
    pub epoch: usize,
    /// Position of the resampling generator, in 32-bit words.
    pub rng_word_pos: u128,
    pub history: TrainingHistory,
    /// Raw `(interior, boundary)` losses since the last logged epoch.
    pub window: Vec<(f64, f64)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerFile {
    inputs: usize,
    outputs: usize,
    activation: Activation,
    /// Row-major, `outputs × inputs`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    input_dim: usize,
    layers: Vec<LayerFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointFile {
    version: u32,
    config: ExperimentConfig,
    epoch: usize,
    rng_word_pos: u128,
    network: NetworkFile,
    adam: AdamState,
    history: TrainingHistory,
    window: Vec<(f64, f64)>,
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        let p = &self.params;
        let layers = (0..p.num_layers())
            .map(|l| {
                let v = p.layer(l);
                LayerFile {
                    inputs: v.inputs,
                    outputs: v.outputs,
                    activation: v.activation,
                    weights: v.weights.to_vec(),
                    bias: v.bias.to_vec(),
                }
            })
            .collect();
        let file = CheckpointFile {
            version: self.version,
            config: self.config.clone(),
            epoch: self.epoch,
            rng_word_pos: self.rng_word_pos,
            network: NetworkFile {
                input_dim: p.input_dim(),
                layers,
            },
            adam: self.adam.clone(),
            history: self.history.clone(),
            window: self.window.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("checkpoint serializes");
        s.push('\n');
        s
    }

    /// Parses checkpoint text; `origin` names the source in errors.
    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let malformed = |message: String| Error::Malformed {
            path: origin.to_path_buf(),
            message,
        };
        let tree: serde_json::Value = serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
        let version = tree
            .get("version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| malformed("missing integer `version` field".into()))?;
        if version != u64::from(CHECKPOINT_VERSION) {
            return Err(Error::Version {
                found: u32::try_from(version).unwrap_or(u32::MAX),
                expected: CHECKPOINT_VERSION,
            });
        }
        let file: CheckpointFile = serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
        file.config.validate()?;
        let layers: Vec<_> = file
            .network
            .layers
            .into_iter()
            .map(|l| (LayerSpec::new(l.outputs, l.activation), l.weights, l.bias))
            .collect();
        let params = NetworkParams::from_layers(file.network.input_dim, &layers)
            .map_err(|e| malformed(format!("network: {e}")))?;
        if params.num_params() != file.adam.m.len() || file.adam.m.len() != file.adam.v.len() {
            return Err(malformed("optimizer moments do not match the network size".into()));
        }
        Ok(Checkpoint {
            version: file.version,
            config: file.config,
            params,
            adam: file.adam,
            epoch: file.epoch,
            rng_word_pos: file.rng_word_pos,
            history: file.history,
            window: file.window,
        })
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    std::fs::write(path, ckpt.to_json()).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_json(&text, path)
}
