//! Minimal trainable networks of linear layers.

mod data;
mod layer;
pub(crate) mod model;
mod train;

pub use data::{Dataset, Split, Targets};
pub use layer::{Activation, FactorizedLinear, Layer, LinearLayer};
pub use model::{Gradients, LayerGradient, LossHead, Metric, NetModel, Stage, WeightGrad};
pub use train::{train, Optimizer, TrainConfig, DIVERGENCE_LIMIT};

#[cfg(test)]
mod tests;
