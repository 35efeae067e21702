use serde::{Deserialize, Serialize};

use super::DlrmConfig;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamCount {
    /// Σ rows × dim over tables.
    pub embedding: u64,
    /// Σ (fan_in + 1) × fan_out over every linear layer.
    pub nonembedding: u64,
    pub total: u64,
}

/// Flops per example. Linear layers cost `2 × fan_in × fan_out`, a dot
/// product of width `d` costs `2d`, embedding lookups and pooling are free,
/// and a training step costs three forward passes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlopCount {
    pub forward_per_example: u64,
    pub train_per_example: u64,
}

pub fn count_params(config: &DlrmConfig) -> Result<ParamCount> {
    config.validate()?;
    let embedding = config.tables.iter().map(|t| t.rows as u64 * t.dim as u64).sum();
    let nonembedding = config
        .bottom_layer_shapes()
        .into_iter()
        .chain(config.overarch_layer_shapes())
        .map(|(fan_in, fan_out)| (fan_in as u64 + 1) * fan_out as u64)
        .sum();
    Ok(ParamCount { embedding, nonembedding, total: embedding + nonembedding })
}

pub fn count_flops(config: &DlrmConfig) -> Result<FlopCount> {
    config.validate()?;
    let linear: u64 = config
        .bottom_layer_shapes()
        .into_iter()
        .chain(config.overarch_layer_shapes())
        .map(|(fan_in, fan_out)| 2 * fan_in as u64 * fan_out as u64)
        .sum();
    let dots = 2 * config.dot_pairs() as u64 * config.bottom_output_width() as u64;
    let forward = linear + dots;
    Ok(FlopCount { forward_per_example: forward, train_per_example: 3 * forward })
}
