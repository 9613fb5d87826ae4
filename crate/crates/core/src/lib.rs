//! Training-free visual place recognition on top of dense self-supervised
//! ViT features.
//!
//! The crate covers everything downstream of the network:
//!
//! - [`feature_store`]: the `.anyf` feature-map format, dataset manifests
//!   and descriptor sets.
//! - [`aggregation`]: GAP / GMP / GeM pooling and hard / soft VLAD.
//! - [`vocabulary`]: seeded k-means vocabularies, including per-domain
//!   assembly from several datasets.
//! - [`projection`]: PCA fitting, whitening and 2-D domain scatter export.
//! - [`retrieval`]: exact nearest-neighbour ranking and Recall@K.
//! - [`cluster_viz`]: per-pixel cluster-assignment label images.
//! - [`experiments`]: aggregation and vocabulary comparison harnesses.
//! - [`cli`]: the `anyloc` command-line front end.
//!
//! Runnable walkthroughs of each capability live in `examples/`.

pub mod aggregation;
pub mod cli;
pub mod cluster_viz;
pub mod error;
pub mod experiments;
pub mod feature_store;
pub mod models;
pub mod projection;
pub mod retrieval;
pub mod synthetic;
pub mod vocabulary;

mod linalg;

pub use error::{Error, Result};
pub use feature_store::{
    read_feature_map, write_feature_map, DatasetManifest, DescriptorSet, FeatureDir, FeatureMap, FeatureSource,
    Fingerprint, GtMode, InMemoryFeatures, Role,
};
