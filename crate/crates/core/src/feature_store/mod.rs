//! On-disk and in-memory representations every other module consumes:
//! dense feature maps (`.anyf`), dataset manifests and descriptor sets.

mod descriptors;
mod feature_map;
mod manifest;
mod source;

pub(crate) use descriptors::Cursor;
pub use descriptors::{DescriptorSet, Fingerprint, DESCRIPTOR_FORMAT_VERSION, DESCRIPTOR_MAGIC};
pub use feature_map::{
    read_feature_map, write_feature_map, FeatureMap, FEATURE_EXTENSION, FEATURE_FORMAT_VERSION, FEATURE_HEADER_LEN,
    FEATURE_MAGIC,
};
pub use manifest::{load_manifest, DatasetManifest, GtMode, ManifestEntry, Role, MANIFEST_FORMAT_VERSION};
pub use source::{Dataset, FeatureDir, FeatureSource, InMemoryFeatures, MANIFEST_FILE};
