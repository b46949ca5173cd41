//! Synthetic ground truth: elastic-plastic bending springback, Latin
//! hypercube designs and the two datasets (single-layer and BMT).

pub mod bending;
pub mod dataset;
pub mod lhs;

pub use bending::{
    elastic_stiffness, loading_moment, springback_angle, Layer, MaterialSpec, ProcessFactor, ProcessParams,
    QuadratureGrid, SpringbackModel, TubeGeometry,
};
pub use dataset::{
    generate_bmt, generate_datasets, generate_single, split_dataset, write_datasets, Dataset, GeneratorConfig,
    Provenance, Range, Sample, SamplingBounds,
};
pub use lhs::lhs_sample;
