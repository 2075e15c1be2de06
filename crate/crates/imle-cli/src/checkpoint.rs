//! Binary checkpoint format, owned by this repo and tested bit-exactly.
//!
//! Layout:
//! - bytes 0..4   magic `IMLE`
//! - bytes 4..8   format version, u32 little-endian (currently 1)
//! - bytes 8..16  metadata byte length, u64 little-endian
//! - metadata     UTF-8 JSON ([`CheckpointMeta`])
//! - parameters   f64 little-endian, per layer weights row-major then
//!   biases, layers from input to output

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use imle_core::{GeneratorNet, Mat64, OutputActivation, Vec64};

use crate::config::RunConfig;
use crate::CliError;

pub const MAGIC: [u8; 4] = *b"IMLE";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub layer_sizes: Vec<usize>,
    pub hidden_activation: String,
    pub output_activation: String,
    pub seed: u64,
    pub outer_iter: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_shape: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_echo: Option<RunConfig>,
}

impl CheckpointMeta {
    pub fn for_net(net: &GeneratorNet, seed: u64, outer_iter: usize) -> Self {
        Self {
            layer_sizes: net.layer_sizes().to_vec(),
            hidden_activation: "relu".to_string(),
            output_activation: net.output_activation().name().to_string(),
            seed,
            outer_iter,
            image_shape: None,
            config_echo: None,
        }
    }
}

pub fn save_checkpoint(
    path: &Path,
    net: &GeneratorNet,
    meta: &CheckpointMeta,
) -> Result<(), CliError> {
    if meta.layer_sizes != net.layer_sizes() {
        return Err(CliError::Config(format!(
            "checkpoint metadata layer_sizes {:?} do not match the net {:?}",
            meta.layer_sizes,
            net.layer_sizes()
        )));
    }
    let meta_bytes = serde_json::to_vec(meta)
        .map_err(|e| CliError::Runtime(format!("cannot serialize checkpoint metadata: {e}")))?;
    let params = net.params_flat();
    let mut bytes = Vec::with_capacity(16 + meta_bytes.len() + 8 * params.dim());
    bytes.extend_from_slice(&MAGIC);
    bytes.extend_from_slice(&VERSION.to_le_bytes());
    bytes.extend_from_slice(&(meta_bytes.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&meta_bytes);
    for v in &params {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes)
        .map_err(|e| CliError::Runtime(format!("cannot write checkpoint {}: {e}", path.display())))
}

pub fn load_checkpoint(path: &Path) -> Result<(GeneratorNet, CheckpointMeta), CliError> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::Config(format!("cannot read checkpoint {}: {e}", path.display())))?;
    decode_checkpoint(&bytes)
        .map_err(|msg| CliError::Config(format!("bad checkpoint {}: {msg}", path.display())))
}

fn decode_checkpoint(bytes: &[u8]) -> Result<(GeneratorNet, CheckpointMeta), String> {
    if bytes.len() < 16 {
        return Err(format!("file too short ({} bytes)", bytes.len()));
    }
    if bytes[0..4] != MAGIC {
        return Err(format!("bad magic {:?}", &bytes[0..4]));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(format!("unsupported format version {version}"));
    }
    let meta_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let blob_start = 16usize
        .checked_add(meta_len)
        .filter(|&end| end <= bytes.len())
        .ok_or_else(|| format!("metadata length {meta_len} exceeds file size {}", bytes.len()))?;
    let meta: CheckpointMeta = serde_json::from_slice(&bytes[16..blob_start])
        .map_err(|e| format!("metadata does not parse: {e}"))?;

    if meta.layer_sizes.len() < 2 {
        return Err("metadata must list at least input and output layer sizes".into());
    }
    let output_activation = match meta.output_activation.as_str() {
        "sigmoid" => OutputActivation::Sigmoid,
        "identity" => OutputActivation::Identity,
        other => return Err(format!("unknown output activation {other:?}")),
    };
    if meta.hidden_activation != "relu" {
        return Err(format!(
            "unknown hidden activation {:?}",
            meta.hidden_activation
        ));
    }
    let param_count: usize = meta
        .layer_sizes
        .windows(2)
        .map(|w| w[0] * w[1] + w[1])
        .sum();
    let blob = &bytes[blob_start..];
    if blob.len() != 8 * param_count {
        return Err(format!(
            "parameter blob is {} bytes, metadata implies {} (= 8 x {param_count})",
            blob.len(),
            8 * param_count
        ));
    }
    let mut values = blob
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for w in meta.layer_sizes.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let wdata: Vec<f64> = values.by_ref().take(fan_in * fan_out).collect();
        let weight =
            Mat64::new(fan_out, fan_in, wdata).map_err(|e| format!("invalid weight block: {e}"))?;
        let bdata: Vec<f64> = values.by_ref().take(fan_out).collect();
        let bias = Vec64::new(bdata).map_err(|e| format!("invalid bias block: {e}"))?;
        weights.push(weight);
        biases.push(bias);
    }
    let net = GeneratorNet::from_parts(&meta.layer_sizes, weights, biases, output_activation)
        .map_err(|e| format!("cannot rebuild net: {e}"))?;
    Ok((net, meta))
}
