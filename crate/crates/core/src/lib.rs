//! Meta-path importance learning over heterogeneous information networks.
//!
//! The pipeline: build a typed graph (texts, users, entities) from
//! record-oriented social data, enumerate the schema-valid meta-path space,
//! construct per-path features by chained row-normalized adjacency products,
//! then alternate between training a classifier on sampled path subsets and
//! updating a non-parametric importance distribution over paths from
//! per-path validation accuracy. The learned ranking selects a small set of
//! influential paths for final evaluation.

pub mod backbone;
pub mod config;
pub mod dense;
pub mod error;
pub mod hin;
pub mod importance;
pub mod metapath;
pub mod metrics;
pub mod sampling;
pub mod sparse;
pub mod stats;
pub mod theory;
pub mod trainer;

mod seeding;

pub use backbone::{BackboneModel, FeatureDims, ModelConfig};
pub use dense::Mat;
pub use error::{Error, Result};
pub use hin::{
    build_graph, build_node_features, generate_synthetic, load_corpus, preprocess_text,
    write_corpus, EdgeType, EmbedderKind, EmbedderSpec, HeteroGraph, NodeType, RawRecord,
    SyntheticSpec,
};
pub use importance::{ImportanceVector, NormMode};
pub use metapath::{
    construct_all, construct_features, dense_oracle, MetaPath, MetaPathCatalog,
    MetaPathFeatureSet,
};
pub use sampling::{SamplerState, SamplerStrategy};
pub use seeding::{derive_seed, derive_seed_indexed};
pub use sparse::CsrMatrix;
pub use trainer::{
    ablate, hop_scaling_bench, restore_result, resume, run, RunConfig, SplitIndices, TrainResult,
};
