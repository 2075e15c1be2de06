//! JSON run configuration. Unknown keys are rejected everywhere so a typo in
//! an experiment file fails loudly instead of silently using a default.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use imle_core::{ImleConfig, IndexStructure, Optimizer, OutputActivation};

use crate::CliError;

/// Fixed stream ids, so every command is a pure function of (config, seed).
pub mod streams {
    pub const DATA: u64 = 1;
    pub const NET_INIT: u64 = 2;
    pub const TRAIN: u64 = 3;
    pub const SAMPLE: u64 = 4;
    pub const EVAL: u64 = 5;
    pub const INTERPOLATE: u64 = 6;
    pub const VERIFY: u64 = 7;
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub data: DataSection,
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
    /// Checkpoint cadence in outer iterations; 0 disables periodic
    /// checkpoints (the final checkpoint is always written).
    #[serde(default)]
    pub checkpoint_every: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataSection {
    Ring {
        k: usize,
        radius: f64,
        std: f64,
        n: usize,
    },
    Idx {
        path: String,
    },
    Csv {
        path: String,
        #[serde(default)]
        has_header: bool,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// Named preset; overridden by any explicit field below.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer_sizes: Option<Vec<usize>>,
    /// "sigmoid" or "identity".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_activation: Option<String>,
    /// Height and width for rasterizing samples as images.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_shape: Option<[usize; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples_per_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outer_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minibatch_size: Option<usize>,
    /// "sgd" or "adam".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<String>,
    /// "vp-tree" or "brute".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index_structure: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stale_matching: Option<bool>,
}

/// Resolved model architecture.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub layer_sizes: Vec<usize>,
    pub output_activation: OutputActivation,
    pub image_shape: Option<[usize; 2]>,
}

pub fn load_run_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("bad config {}: {e}", path.display())))
}

pub fn parse_output_activation(name: &str) -> Result<OutputActivation, CliError> {
    match name {
        "sigmoid" => Ok(OutputActivation::Sigmoid),
        "identity" => Ok(OutputActivation::Identity),
        other => Err(CliError::Config(format!(
            "unknown output_activation {other:?} (expected \"sigmoid\" or \"identity\")"
        ))),
    }
}

pub fn parse_optimizer(name: &str) -> Result<Optimizer, CliError> {
    match name {
        "sgd" => Ok(Optimizer::Sgd),
        "adam" => Ok(Optimizer::Adam),
        other => Err(CliError::Config(format!(
            "unknown optimizer {other:?} (expected \"sgd\" or \"adam\")"
        ))),
    }
}

pub fn parse_index_structure(name: &str) -> Result<IndexStructure, CliError> {
    match name {
        "vp-tree" => Ok(IndexStructure::VpTree),
        "brute" => Ok(IndexStructure::Brute),
        other => Err(CliError::Config(format!(
            "unknown index_structure {other:?} (expected \"vp-tree\" or \"brute\")"
        ))),
    }
}

/// Named architectures. The paper-scale MNIST net is the canonical preset;
/// the desk presets are sized for minutes-scale runs.
fn preset(name: &str, data_dim: usize) -> Result<ModelSpec, CliError> {
    match name {
        "mnist-paper" => Ok(ModelSpec {
            layer_sizes: vec![100, 1200, 1200, 784],
            output_activation: OutputActivation::Sigmoid,
            image_shape: Some([28, 28]),
        }),
        "mnist-desk" => Ok(ModelSpec {
            layer_sizes: vec![16, 128, 128, 784],
            output_activation: OutputActivation::Sigmoid,
            image_shape: Some([28, 28]),
        }),
        "ring-desk" => Ok(ModelSpec {
            layer_sizes: vec![4, 32, 32, 2],
            output_activation: OutputActivation::Identity,
            image_shape: None,
        }),
        "desk" => Ok(ModelSpec {
            layer_sizes: vec![16, 64, 64, data_dim],
            output_activation: OutputActivation::Sigmoid,
            image_shape: None,
        }),
        other => Err(CliError::Config(format!(
            "unknown model preset {other:?} (known: mnist-paper, mnist-desk, ring-desk, desk)"
        ))),
    }
}

impl ModelSection {
    pub fn resolve(&self, data_dim: usize) -> Result<ModelSpec, CliError> {
        let mut spec = match &self.preset {
            Some(name) => preset(name, data_dim)?,
            None => ModelSpec {
                layer_sizes: Vec::new(),
                output_activation: OutputActivation::Sigmoid,
                image_shape: None,
            },
        };
        if let Some(sizes) = &self.layer_sizes {
            spec.layer_sizes = sizes.clone();
        }
        if let Some(act) = &self.output_activation {
            spec.output_activation = parse_output_activation(act)?;
        }
        if let Some(shape) = self.image_shape {
            spec.image_shape = Some(shape);
        }
        if spec.layer_sizes.len() < 2 {
            return Err(CliError::Config(
                "model needs a preset or an explicit layer_sizes list (input, hidden.., output)"
                    .into(),
            ));
        }
        let out = *spec.layer_sizes.last().unwrap();
        if out != data_dim {
            return Err(CliError::Config(format!(
                "model output dim {out} does not match data dim {data_dim}"
            )));
        }
        if let Some([h, w]) = spec.image_shape
            && h * w != data_dim
        {
            return Err(CliError::Config(format!(
                "image_shape {h}x{w} does not cover data dim {data_dim}"
            )));
        }
        Ok(spec)
    }
}

impl TrainSection {
    pub fn resolve(&self, n: usize, seed: u64) -> Result<ImleConfig, CliError> {
        let mut cfg = ImleConfig::desk_defaults(n, seed);
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
            // dependent defaults follow unless explicitly pinned below
            cfg.samples_per_iter = 4 * v;
            cfg.minibatch_size = cfg.minibatch_size.min(v);
        }
        if let Some(v) = self.samples_per_iter {
            cfg.samples_per_iter = v;
        }
        if let Some(v) = self.outer_iters {
            cfg.outer_iters = v;
        }
        if let Some(v) = self.inner_iters {
            cfg.inner_iters = v;
        }
        if let Some(v) = self.learning_rate {
            cfg.learning_rate = v;
        }
        if let Some(v) = self.minibatch_size {
            cfg.minibatch_size = v;
        }
        if let Some(name) = &self.optimizer {
            cfg.optimizer = parse_optimizer(name)?;
        }
        if let Some(name) = &self.index_structure {
            cfg.index_structure = parse_index_structure(name)?;
        }
        if let Some(v) = self.stale_matching {
            cfg.stale_matching = v;
        }
        Ok(cfg)
    }
}
