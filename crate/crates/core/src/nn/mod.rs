//! Minimal dense-network engine.

pub mod adam;
pub mod mlp;
pub mod normalize;
pub mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use mlp::{Activation, Mlp, Trace};
pub use normalize::{Normalizer, NormalizerMode};
pub use train::{fit, mse, FitReport, TrainConfig};
