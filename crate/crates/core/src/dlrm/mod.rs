//! DLRM-style CTR model: embedding tables pooled by summation, a bottom MLP
//! over dense features, a concat (optionally plus pairwise-dot) interaction,
//! and an overarch MLP producing one logit.
//!
//! Hidden layers use ReLU, including the bottom output. Parameters and flops
//! are counted exactly from the config; see [`count_params`] and
//! [`count_flops`] for the conventions.

mod accounting;
mod config;
mod kernels;
mod model;
mod scaling;

pub use accounting::{count_flops, count_params, FlopCount, ParamCount};
pub use config::{DlrmConfig, Interaction, ScaleTag, TableConfig};
pub use model::{
    build_model, log_loss, EmbeddingTable, Gradients, IndexPolicy, Linear, LinearGrad, Model, OptimizerConfig,
    RowGrads, PROB_EPS,
};
pub use scaling::{apply_scaling, Scheme};
