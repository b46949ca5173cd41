//! Physics-embedded springback network: ES-NET pre-exploration, SP-NET
//! pretraining, assembly and composite-loss fine-tuning.

pub mod loss;
pub mod net;
pub mod stages;

pub use loss::{
    composite_gradients, composite_loss, composite_step, dynamic_weight, dynamic_weight_from_deviation,
    gradients_at, CompositeLossConfig, PeOptimizer, PeSample, StepLosses, ZAggregation,
};
pub use net::{load_json, save_json, theory_map, EsNet, ModelProvenance, PeNet, PeTrace, Prediction, SpNet};
pub use stages::{
    finetune, finetune_split, pe_rmse, pe_samples, pre_explore_esnet, prepare_spnet, pretrain_spnet,
    pretrain_spnet_split, rmse, scratch_penet, sp_rmse, BpNet, FinetuneReport, PreExploreReport, PretrainReport,
    TheoryDesign,
};
