use rayon::prelude::*;

use super::cache::{cache_key, DescriptorCache};
use super::rank::{rank, Metric};
use super::report::{recall_at_k, RetrievalReport};
use crate::aggregation::AggregationMethod;
use crate::error::{Error, Result};
use crate::feature_store::{DatasetManifest, DescriptorSet, FeatureSource};
use crate::projection::{fit_pca_with, project_with, PcaConfig, PcaModel};

pub const DEFAULT_K_VALUES: [usize; 3] = [1, 5, 10];

const BATCH: usize = 256;

/// Everything after aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    /// Fitted on the database descriptors only.
    pub pca: Option<PcaConfig>,
    pub renormalize: bool,
    pub metric: Metric,
    pub k_values: Vec<usize>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            pca: None,
            renormalize: true,
            metric: Metric::Cosine,
            k_values: DEFAULT_K_VALUES.to_vec(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: RetrievalReport,
    /// Database and query descriptors as ranked (after any projection).
    pub database: DescriptorSet,
    pub queries: DescriptorSet,
    pub pca: Option<PcaModel>,
}

/// Aggregates the given images, in order, reusing cached descriptors.
pub fn describe(
    ids: &[&str],
    features: &dyn FeatureSource,
    method: &AggregationMethod,
    cache: Option<&DescriptorCache>,
) -> Result<DescriptorSet> {
    method.validate()?;
    let tag = method.method_tag();
    let fingerprint = method.vocab_fingerprint();
    let mut set: Option<DescriptorSet> = None;
    let mut first: Option<(String, usize)> = None;
    for chunk in ids.chunks(BATCH) {
        let results: Vec<Result<(usize, std::sync::Arc<Vec<f32>>)>> = chunk
            .par_iter()
            .map(|id| {
                let map = features.load(id)?;
                method.check_feature_dim(&map)?;
                let key = cache.map(|_| cache_key(&tag, fingerprint, map.content_hash()));
                if let (Some(c), Some(k)) = (cache, &key) {
                    if let Some(v) = c.get(k) {
                        return Ok((map.dim(), v));
                    }
                }
                let values = method.aggregate(&map)?.values;
                match (cache, &key) {
                    (Some(c), Some(k)) => Ok((map.dim(), c.put(k, values)?)),
                    _ => Ok((map.dim(), std::sync::Arc::new(values))),
                }
            })
            .collect();
        for (id, r) in chunk.iter().zip(results) {
            let (fdim, values) = r?;
            match &first {
                None => first = Some((id.to_string(), fdim)),
                Some((first_id, d)) if *d != fdim => {
                    return Err(Error::Config(format!(
                        "feature map '{id}' has dim {fdim}, but '{first_id}' has dim {d}"
                    )))
                }
                _ => {}
            }
            let s = match &mut set {
                Some(s) => s,
                None => set.insert(DescriptorSet::new(tag.clone(), values.len(), fingerprint)?),
            };
            s.push(*id, &values)?;
        }
    }
    match set {
        Some(s) => Ok(s),
        None => DescriptorSet::new(tag, 0, fingerprint),
    }
}

/// Aggregation, optional projection, ranking and Recall@K for one dataset.
pub fn evaluate(
    manifest: &DatasetManifest,
    features: &dyn FeatureSource,
    method: &AggregationMethod,
    options: &EvalOptions,
    cache: Option<&DescriptorCache>,
) -> Result<Evaluation> {
    let db_ids = manifest.database_ids();
    // surface vocabulary/feature dim mismatches before the bulk of the work
    if let Some(first) = db_ids.first() {
        method.check_feature_dim(&features.load(first)?)?;
    }
    let db = describe(&db_ids, features, method, cache)?;
    let queries = describe(&manifest.query_ids(), features, method, cache)?;
    log::info!(
        "{}: {} database / {} query descriptors, method {}, dim {}",
        manifest.name(),
        db.len(),
        queries.len(),
        db.method_tag(),
        db.dim()
    );
    score(manifest, db, queries, options)
}

/// Evaluates precomputed descriptors (e.g. CLS vectors) covering every manifest image.
pub fn evaluate_descriptors(
    manifest: &DatasetManifest,
    descriptors: &DescriptorSet,
    options: &EvalOptions,
) -> Result<Evaluation> {
    let missing: Vec<&str> = manifest
        .entries()
        .iter()
        .map(|e| e.image_id.as_str())
        .filter(|id| !descriptors.contains(id))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Validation(format!(
            "descriptor set lacks {} manifest images (first: '{}')",
            missing.len(),
            missing[0]
        )));
    }
    let db = descriptors.subset(manifest.database_ids())?;
    let queries = descriptors.subset(manifest.query_ids())?;
    score(manifest, db, queries, options)
}

/// Projection, ranking and scoring of already-aggregated descriptors.
pub fn score(
    manifest: &DatasetManifest,
    db: DescriptorSet,
    queries: DescriptorSet,
    options: &EvalOptions,
) -> Result<Evaluation> {
    let (db, queries, pca) = match &options.pca {
        Some(cfg) => {
            let model = fit_pca_with(&db, cfg)?;
            log::info!("PCA {} -> {} dims", db.dim(), model.output_dim());
            (
                project_with(&model, &db, options.renormalize)?,
                project_with(&model, &queries, options.renormalize)?,
                Some(model),
            )
        }
        None => (db, queries, None),
    };
    let max_k = options.k_values.iter().copied().max().unwrap_or(1).max(1);
    let ranking = rank(&db, &queries, options.metric, max_k)?;
    let mut report = recall_at_k(&ranking, manifest, &options.k_values)?;
    report.dim = db.dim();
    report.vocab_fingerprint = db.vocab_fingerprint().map(|f| f.to_hex());
    Ok(Evaluation {
        report,
        database: db,
        queries,
        pca,
    })
}
