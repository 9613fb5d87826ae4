//! Seeded synthetic datasets with known answers, for tests, examples and
//! smoke-testing the CLI without real ViT features.
//!
//! A planted dataset pairs every database map with a query map that is a
//! slightly perturbed copy, so the correct match is known by construction.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::feature_store::{DatasetManifest, FeatureMap, GtMode, InMemoryFeatures, ManifestEntry};

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedConfig {
    pub name: String,
    pub pairs: usize,
    pub height: usize,
    pub width: usize,
    pub dim: usize,
    /// Number of feature-space modes shared by all images of a "domain".
    pub modes: usize,
    /// Spread of the mode centres.
    pub mode_scale: f32,
    /// Per-pixel spread around its mode.
    pub pixel_noise: f32,
    /// Std-dev of the query perturbation.
    pub query_noise: f32,
    /// Seeds the modes; datasets sharing it look alike.
    pub domain_seed: u64,
    /// Seeds the images.
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            name: "planted".into(),
            pairs: 64,
            height: 4,
            width: 4,
            dim: 16,
            modes: 8,
            mode_scale: 3.0,
            pixel_noise: 1.0,
            query_noise: 0.05,
            domain_seed: 0,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedDataset {
    /// Frame mode, radius 0.5: query `i` matches database `i` only.
    pub manifest: DatasetManifest,
    /// Database maps then query maps, in manifest order.
    pub maps: Vec<FeatureMap>,
}

impl PlantedDataset {
    pub fn features(&self) -> InMemoryFeatures {
        self.maps.iter().cloned().collect()
    }

    pub fn database_maps(&self) -> &[FeatureMap] {
        &self.maps[..self.maps.len() / 2]
    }

    pub fn query_maps(&self) -> &[FeatureMap] {
        &self.maps[self.maps.len() / 2..]
    }
}

pub fn db_id(i: usize) -> String {
    format!("db{i:04}")
}

pub fn query_id(i: usize) -> String {
    format!("q{i:04}")
}

fn normal(rng: &mut ChaCha8Rng) -> f32 {
    rng.sample(StandardNormal)
}

/// A map of i.i.d. standard normal features.
pub fn random_feature_map(id: &str, height: usize, width: usize, dim: usize, rng: &mut impl Rng) -> FeatureMap {
    let data = (0..height * width * dim).map(|_| rng.sample(StandardNormal)).collect();
    FeatureMap::new(id, height, width, dim, data).expect("valid shape")
}

pub fn planted_dataset(cfg: &PlantedConfig) -> Result<PlantedDataset> {
    if cfg.pairs == 0 || cfg.height == 0 || cfg.width == 0 || cfg.dim == 0 || cfg.modes == 0 {
        return Err(Error::Config(format!("planted dataset sizes must be >= 1: {cfg:?}")));
    }
    let mut domain_rng = ChaCha8Rng::seed_from_u64(cfg.domain_seed);
    let modes: Vec<Vec<f32>> = (0..cfg.modes)
        .map(|_| (0..cfg.dim).map(|_| normal(&mut domain_rng) * cfg.mode_scale).collect())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.height * cfg.width;
    let mut db = Vec::with_capacity(cfg.pairs);
    let mut queries = Vec::with_capacity(cfg.pairs);
    for i in 0..cfg.pairs {
        let mut data = Vec::with_capacity(n * cfg.dim);
        for _ in 0..n {
            let m = &modes[rng.random_range(0..cfg.modes)];
            data.extend(m.iter().map(|&c| c + normal(&mut rng) * cfg.pixel_noise));
        }
        let q: Vec<f32> = data.iter().map(|&x| x + normal(&mut rng) * cfg.query_noise).collect();
        db.push(FeatureMap::new(db_id(i), cfg.height, cfg.width, cfg.dim, data)?);
        queries.push(FeatureMap::new(query_id(i), cfg.height, cfg.width, cfg.dim, q)?);
    }

    let entries = (0..cfg.pairs)
        .map(|i| ManifestEntry::database(db_id(i)).with_frame(i as u64))
        .chain((0..cfg.pairs).map(|i| ManifestEntry::query(query_id(i)).with_frame(i as u64)))
        .collect();
    let manifest = DatasetManifest::new(&cfg.name, GtMode::Frame, 0.5, entries, BTreeMap::new())?;
    db.extend(queries);
    Ok(PlantedDataset { manifest, maps: db })
}

/// Same images, but each query's single positive is a random database entry
/// (a uniform permutation). Used to measure chance-level recall.
pub fn shuffled_ground_truth(manifest: &DatasetManifest, seed: u64) -> Result<DatasetManifest> {
    let queries = manifest.query_ids();
    let mut db: Vec<String> = manifest.database_ids().iter().map(|s| s.to_string()).collect();
    if db.len() < queries.len() {
        return Err(Error::Config("need at least as many database as query entries".into()));
    }
    db.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let positives = queries.iter().zip(db).map(|(q, d)| (q.to_string(), vec![d])).collect();
    let entries = manifest
        .entries()
        .iter()
        .map(|e| ManifestEntry {
            frame_index: None,
            position: None,
            ..e.clone()
        })
        .collect();
    DatasetManifest::new(manifest.name(), GtMode::Explicit, 1.0, entries, positives)
}
