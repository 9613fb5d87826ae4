//! Building a vocabulary from the database images of one or more datasets.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::feature_store::{DatasetManifest, FeatureSource};

use super::kmeans::{kmeans, KMeansParams};
use super::{VocabSource, Vocabulary};

/// Feature vectors retained for clustering unless configured otherwise.
pub const DEFAULT_SAMPLE_CAP: usize = 500_000;
pub const DEFAULT_SEED: i64 = 42;

/// One dataset's contribution: every `stride`-th database image, in manifest order.
#[derive(Clone)]
pub struct VocabPart {
    pub manifest: DatasetManifest,
    pub features: Arc<dyn FeatureSource + Send>,
    pub stride: usize,
}

impl fmt::Debug for VocabPart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VocabPart")
            .field("dataset", &self.manifest.name())
            .field("stride", &self.stride)
            .finish()
    }
}

impl VocabPart {
    pub fn new(manifest: DatasetManifest, features: Arc<dyn FeatureSource + Send>, stride: usize) -> Self {
        VocabPart {
            manifest,
            features,
            stride,
        }
    }

    /// Database ids this part contributes.
    pub fn selected_ids(&self) -> Vec<&str> {
        self.manifest
            .database()
            .step_by(self.stride.max(1))
            .map(|e| e.image_id.as_str())
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct VocabAssembly {
    pub parts: Vec<VocabPart>,
    pub k: usize,
    /// Uniformly subsample the pooled features down to this many. `None` keeps all.
    pub sample_cap: Option<usize>,
    pub kmeans: KMeansParams,
}

impl VocabAssembly {
    pub fn new(parts: Vec<VocabPart>, k: usize) -> Self {
        VocabAssembly {
            parts,
            k,
            sample_cap: Some(DEFAULT_SAMPLE_CAP),
            kmeans: KMeansParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.parts.is_empty() {
            return Err(Error::Config("vocabulary assembly needs at least one dataset".into()));
        }
        if let Some(p) = self.parts.iter().find(|p| p.stride == 0) {
            return Err(Error::Config(format!(
                "stride for dataset '{}' must be >= 1",
                p.manifest.name()
            )));
        }
        if self.k == 0 {
            return Err(Error::Config("vocabulary k must be >= 1".into()));
        }
        if self.sample_cap == Some(0) {
            return Err(Error::Config("sample cap must be >= 1".into()));
        }
        Ok(())
    }
}

/// A vocabulary together with clustering diagnostics.
#[derive(Debug, Clone)]
pub struct VocabularyBuild {
    pub vocabulary: Vocabulary,
    pub inertia: f64,
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
    /// Feature vectors pooled from the selected images, before subsampling.
    pub pooled_features: usize,
    /// Feature vectors actually clustered.
    pub clustered_features: usize,
}

/// Reservoir sampler keeping at most `cap` rows, uniformly, in original order.
struct Reservoir {
    cap: Option<usize>,
    dim: usize,
    seen: usize,
    order: Vec<usize>,
    rows: Vec<f32>,
    rng: ChaCha8Rng,
}

impl Reservoir {
    fn new(cap: Option<usize>, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // separate stream from the k-means initialization
        rng.set_stream(1);
        Reservoir {
            cap,
            dim,
            seen: 0,
            order: Vec::new(),
            rows: Vec::new(),
            rng,
        }
    }

    fn offer(&mut self, row: &[f32]) {
        let t = self.seen;
        self.seen += 1;
        match self.cap {
            Some(cap) if t >= cap => {
                let j = self.rng.random_range(0..=t);
                if j < cap {
                    self.order[j] = t;
                    self.rows[j * self.dim..(j + 1) * self.dim].copy_from_slice(row);
                }
            }
            _ => {
                self.order.push(t);
                self.rows.extend_from_slice(row);
            }
        }
    }

    fn into_rows(self) -> Vec<f32> {
        let mut idx: Vec<usize> = (0..self.order.len()).collect();
        idx.sort_by_key(|&i| self.order[i]);
        let mut out = Vec::with_capacity(self.rows.len());
        for i in idx {
            out.extend_from_slice(&self.rows[i * self.dim..(i + 1) * self.dim]);
        }
        out
    }
}

fn count_distinct_up_to(points: &[f32], dim: usize, limit: usize) -> usize {
    let mut seen: HashSet<Vec<u32>> = HashSet::new();
    for row in points.chunks_exact(dim) {
        // -0.0 and 0.0 are the same point
        seen.insert(row.iter().map(|x| (x + 0.0).to_bits()).collect());
        if seen.len() >= limit {
            break;
        }
    }
    seen.len()
}

/// Pools every pixel feature of the selected database images, optionally
/// subsamples, and clusters with seeded k-means++ / Lloyd.
///
/// Query entries are never read.
pub fn build_vocabulary(assembly: &VocabAssembly, seed: i64) -> Result<VocabularyBuild> {
    assembly.validate()?;
    let mut reservoir: Option<Reservoir> = None;
    let mut first: Option<(String, usize)> = None;

    for part in &assembly.parts {
        for id in part.selected_ids() {
            let map = part.features.load(id)?;
            match &first {
                None => first = Some((format!("{}/{}", part.manifest.name(), id), map.dim())),
                Some((first_id, dim)) if *dim != map.dim() => {
                    return Err(Error::Config(format!(
                        "feature map '{}/{}' has dim {} but '{}' has dim {}",
                        part.manifest.name(),
                        id,
                        map.dim(),
                        first_id,
                        dim
                    )))
                }
                _ => {}
            }
            let r = reservoir.get_or_insert_with(|| Reservoir::new(assembly.sample_cap, map.dim(), seed as u64));
            map.pixels().for_each(|px| r.offer(px));
        }
    }

    let Some(reservoir) = reservoir else {
        return Err(Error::Infeasible(
            "no database images selected for the vocabulary".into(),
        ));
    };
    let dim = reservoir.dim;
    let pooled = reservoir.seen;
    let points = reservoir.into_rows();
    let clustered = points.len() / dim;

    let distinct = count_distinct_up_to(&points, dim, assembly.k);
    if distinct < assembly.k {
        return Err(Error::Infeasible(format!(
            "only {distinct} distinct feature vectors available ({clustered} total), cannot build k={} clusters",
            assembly.k
        )));
    }

    let result = kmeans(&points, dim, assembly.k, seed as u64, &assembly.kmeans)?;
    let sources = assembly
        .parts
        .iter()
        .map(|p| VocabSource {
            dataset: p.manifest.name().to_string(),
            stride: p.stride,
        })
        .collect();
    let vocabulary = Vocabulary::new(result.centers, assembly.k, dim, seed, sources)?;
    Ok(VocabularyBuild {
        vocabulary,
        inertia: result.inertia,
        inertia_history: result.inertia_history,
        iterations: result.iterations,
        pooled_features: pooled,
        clustered_features: clustered,
    })
}
