//! Turning one [`FeatureMap`] into one global descriptor.

mod pooling;
mod vlad;

use rayon::prelude::*;

pub use pooling::{pool, PoolKind, PoolingConfig};
pub use vlad::{hard_assignments, vlad, Assignment, VladConfig};

use crate::error::{Error, Result};
use crate::feature_store::{DescriptorSet, FeatureMap, Fingerprint};

/// One flat vector summarizing one image.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalDescriptor {
    pub image_id: String,
    pub method_tag: String,
    pub values: Vec<f32>,
}

impl GlobalDescriptor {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Either pooling or VLAD.
#[derive(Debug, Clone)]
pub enum AggregationMethod {
    Pool(PoolingConfig),
    Vlad(VladConfig),
}

impl From<PoolingConfig> for AggregationMethod {
    fn from(cfg: PoolingConfig) -> Self {
        AggregationMethod::Pool(cfg)
    }
}

impl From<VladConfig> for AggregationMethod {
    fn from(cfg: VladConfig) -> Self {
        AggregationMethod::Vlad(cfg)
    }
}

impl AggregationMethod {
    pub fn method_tag(&self) -> String {
        match self {
            AggregationMethod::Pool(c) => c.method_tag(),
            AggregationMethod::Vlad(c) => c.method_tag(),
        }
    }

    pub fn vocab_fingerprint(&self) -> Option<Fingerprint> {
        match self {
            AggregationMethod::Pool(_) => None,
            AggregationMethod::Vlad(c) => Some(c.vocabulary.fingerprint()),
        }
    }

    /// Descriptor length for input features of dimension `feature_dim`.
    pub fn output_dim(&self, feature_dim: usize) -> usize {
        match self {
            AggregationMethod::Pool(_) => feature_dim,
            AggregationMethod::Vlad(c) => c.output_dim(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AggregationMethod::Pool(c) => c.validate(),
            AggregationMethod::Vlad(c) => c.validate(),
        }
    }

    /// Fails with a config error when the method cannot consume features of this dim.
    pub fn check_feature_dim(&self, map: &FeatureMap) -> Result<()> {
        match self {
            AggregationMethod::Pool(_) => Ok(()),
            AggregationMethod::Vlad(c) => c.check_dim(map),
        }
    }

    pub fn aggregate(&self, map: &FeatureMap) -> Result<GlobalDescriptor> {
        match self {
            AggregationMethod::Pool(c) => pool(map, c),
            AggregationMethod::Vlad(c) => vlad(map, c),
        }
    }
}

/// Maps per parallel batch. Bounds memory when streaming from disk.
const BATCH: usize = 256;

/// Aggregates every map into a [`DescriptorSet`], in input order.
pub fn aggregate_dataset<I>(maps: I, method: &AggregationMethod) -> Result<DescriptorSet>
where
    I: IntoIterator<Item = FeatureMap>,
{
    try_aggregate_dataset(maps.into_iter().map(Ok), method)
}

/// Like [`aggregate_dataset`], for fallible sources such as a directory of files.
///
/// Maps are processed in parallel batches; output order and values do not
/// depend on the number of workers.
pub fn try_aggregate_dataset<I>(maps: I, method: &AggregationMethod) -> Result<DescriptorSet>
where
    I: IntoIterator<Item = Result<FeatureMap>>,
{
    method.validate()?;
    let output_dim = match method {
        AggregationMethod::Vlad(c) => c.output_dim(),
        AggregationMethod::Pool(_) => 0,
    };
    let mut set = DescriptorSet::new(method.method_tag(), output_dim, method.vocab_fingerprint())?;
    let mut first: Option<(String, usize)> = None;
    let mut batch: Vec<FeatureMap> = Vec::with_capacity(BATCH);

    let flush = |batch: &mut Vec<FeatureMap>, set: &mut DescriptorSet| -> Result<()> {
        let out: Vec<Result<GlobalDescriptor>> = batch.par_iter().map(|m| method.aggregate(m)).collect();
        for g in out {
            let g = g?;
            set.push(g.image_id, &g.values)?;
        }
        batch.clear();
        Ok(())
    };

    for map in maps {
        let map = map?;
        match &first {
            None => {
                method.check_feature_dim(&map)?;
                first = Some((map.image_id().to_string(), map.dim()));
            }
            Some((first_id, dim)) if *dim != map.dim() => {
                return Err(Error::Config(format!(
                    "feature map '{}' has dim {} but '{}' has dim {}",
                    map.image_id(),
                    map.dim(),
                    first_id,
                    dim
                )));
            }
            _ => {}
        }
        batch.push(map);
        if batch.len() == BATCH {
            flush(&mut batch, &mut set)?;
        }
    }
    flush(&mut batch, &mut set)?;
    Ok(set)
}
