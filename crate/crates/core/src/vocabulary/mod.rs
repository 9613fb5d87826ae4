//! VLAD vocabularies: k-means over database features, optionally pooled
//! across several datasets of one domain.

mod assembly;
mod kmeans;
mod presets;
mod vocab;

pub use assembly::{build_vocabulary, VocabAssembly, VocabPart, VocabularyBuild, DEFAULT_SAMPLE_CAP, DEFAULT_SEED};
pub use kmeans::{kmeans, KMeansParams, KMeansResult};
pub use presets::{domain_vocab_presets, preset, Domain, DomainRecipe, RecipePart};
pub use vocab::{VocabSource, Vocabulary, VOCAB_FORMAT_VERSION, VOCAB_MAGIC};
