//! Exact nearest-neighbour retrieval and Recall@K evaluation.

mod cache;
mod evaluate;
mod rank;
mod report;

pub use cache::{cache_key, DescriptorCache, CACHE_DIR_ENV};
pub use evaluate::{describe, evaluate, evaluate_descriptors, score, EvalOptions, Evaluation, DEFAULT_K_VALUES};
pub use rank::{rank, Match, Metric, RankedQuery, Ranking};
pub use report::{recall_at_k, QueryResult, RetrievalReport};
