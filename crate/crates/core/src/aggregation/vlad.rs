//! VLAD: per-cluster sums of residuals against a vocabulary, followed by
//! intra-normalization (each cluster block), concatenation in cluster
//! order and inter-normalization (the whole vector).

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::feature_store::FeatureMap;
use crate::linalg::{normalize_f64, squared_distance, to_f32};
use crate::vocabulary::Vocabulary;

use super::pooling::format_number;
use super::GlobalDescriptor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Assignment {
    /// Each feature contributes only to its nearest center (ties: lowest index).
    Hard,
    /// Each feature contributes to every center with weight
    /// `softmax_k(-||f - c_k||^2 / temperature)`.
    Soft { temperature: f64 },
}

impl Assignment {
    pub const DEFAULT_TEMPERATURE: f64 = 1.0;

    pub fn soft() -> Self {
        Assignment::Soft {
            temperature: Self::DEFAULT_TEMPERATURE,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VladConfig {
    pub assignment: Assignment,
    pub vocabulary: Arc<Vocabulary>,
    /// L2-normalize every pixel feature before assignment and residuals. Off by default.
    pub normalize_features: bool,
}

impl VladConfig {
    pub fn hard(vocabulary: Arc<Vocabulary>) -> Self {
        VladConfig {
            assignment: Assignment::Hard,
            vocabulary,
            normalize_features: false,
        }
    }

    pub fn soft(vocabulary: Arc<Vocabulary>, temperature: f64) -> Self {
        VladConfig {
            assignment: Assignment::Soft { temperature },
            vocabulary,
            normalize_features: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Assignment::Soft { temperature } = self.assignment {
            if !(temperature.is_finite() && temperature > 0.0) {
                return Err(Error::Config(format!(
                    "soft-assignment temperature must be > 0, got {temperature}"
                )));
            }
        }
        Ok(())
    }

    /// `vlad-hard` or `vlad-soft-t{temperature}`, plus `-l2f` when features are normalized.
    pub fn method_tag(&self) -> String {
        let mut tag = match self.assignment {
            Assignment::Hard => "vlad-hard".to_string(),
            Assignment::Soft { temperature } => format!("vlad-soft-t{}", format_number(temperature)),
        };
        if self.normalize_features {
            tag.push_str("-l2f");
        }
        tag
    }

    pub fn output_dim(&self) -> usize {
        self.vocabulary.k() * self.vocabulary.dim()
    }

    pub(crate) fn check_dim(&self, map: &FeatureMap) -> Result<()> {
        if map.dim() != self.vocabulary.dim() {
            return Err(Error::Config(format!(
                "feature map '{}' has dim {} but the vocabulary has dim {}",
                map.image_id(),
                map.dim(),
                self.vocabulary.dim()
            )));
        }
        Ok(())
    }
}

fn prepared(pixel: &[f32], normalize: bool) -> std::borrow::Cow<'_, [f32]> {
    if normalize {
        let mut v = pixel.to_vec();
        crate::linalg::normalize_f32(&mut v);
        std::borrow::Cow::Owned(v)
    } else {
        std::borrow::Cow::Borrowed(pixel)
    }
}

/// Per-pixel hard assignment labels, row-major. Exactly the indices hard VLAD accumulates into.
pub fn hard_assignments(map: &FeatureMap, vocabulary: &Vocabulary, normalize_features: bool) -> Result<Vec<usize>> {
    if map.dim() != vocabulary.dim() {
        return Err(Error::Config(format!(
            "feature map '{}' has dim {} but the vocabulary has dim {}",
            map.image_id(),
            map.dim(),
            vocabulary.dim()
        )));
    }
    Ok(map
        .pixels()
        .map(|px| vocabulary.nearest(&prepared(px, normalize_features)))
        .collect())
}

/// Computes the VLAD descriptor of one image. Output length is `k * dim`.
pub fn vlad(map: &FeatureMap, cfg: &VladConfig) -> Result<GlobalDescriptor> {
    cfg.validate()?;
    cfg.check_dim(map)?;
    let vocab = &*cfg.vocabulary;
    let (k, dim) = (vocab.k(), vocab.dim());
    let mut acc = vec![0.0f64; k * dim];

    match cfg.assignment {
        Assignment::Hard => {
            for px in map.pixels() {
                let f = prepared(px, cfg.normalize_features);
                let j = vocab.nearest(&f);
                let block = &mut acc[j * dim..(j + 1) * dim];
                for ((a, &x), &c) in block.iter_mut().zip(f.iter()).zip(vocab.center(j)) {
                    *a += x as f64 - c as f64;
                }
            }
        }
        Assignment::Soft { temperature } => {
            let mut logits = vec![0.0f64; k];
            for px in map.pixels() {
                let f = prepared(px, cfg.normalize_features);
                for (j, l) in logits.iter_mut().enumerate() {
                    *l = -squared_distance(&f, vocab.center(j)) / temperature;
                }
                let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for l in logits.iter_mut() {
                    *l = (*l - max).exp();
                    total += *l;
                }
                for (j, &w) in logits.iter().enumerate() {
                    let alpha = w / total;
                    if alpha == 0.0 {
                        continue;
                    }
                    let block = &mut acc[j * dim..(j + 1) * dim];
                    for ((a, &x), &c) in block.iter_mut().zip(f.iter()).zip(vocab.center(j)) {
                        *a += alpha * (x as f64 - c as f64);
                    }
                }
            }
        }
    }

    for block in acc.chunks_exact_mut(dim) {
        normalize_f64(block);
    }
    normalize_f64(&mut acc);

    Ok(GlobalDescriptor {
        image_id: map.image_id().to_string(),
        method_tag: cfg.method_tag(),
        values: to_f32(&acc),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab(centers: Vec<f32>, k: usize, dim: usize) -> Arc<Vocabulary> {
        Arc::new(Vocabulary::new(centers, k, dim, 42, vec![]).unwrap())
    }

    #[test]
    fn descriptor_length_is_k_times_d() {
        let v = vocab(vec![0.0; 32 * 1536], 32, 1536);
        assert_eq!(VladConfig::hard(v).output_dim(), 49152);
        let v = vocab(vec![0.0; 128 * 384], 128, 384);
        assert_eq!(VladConfig::hard(v).output_dim(), 49152);
    }

    #[test]
    fn feature_on_center_gives_zero_block() {
        let v = vocab(vec![1.0, 2.0], 1, 2);
        let m = FeatureMap::new("m", 1, 1, 2, vec![1.0, 2.0]).unwrap();
        let g = vlad(&m, &VladConfig::hard(v)).unwrap();
        assert_eq!(g.values, vec![0.0, 0.0]);
    }

    #[test]
    fn hand_computed_two_cluster_case() {
        // centers (0,0) and (10,0); pixels (1,0), (0,1) -> cluster 0; (12,0) -> cluster 1
        let v = vocab(vec![0.0, 0.0, 10.0, 0.0], 2, 2);
        let m = FeatureMap::new("m", 1, 3, 2, vec![1.0, 0.0, 0.0, 1.0, 12.0, 0.0]).unwrap();
        let g = vlad(&m, &VladConfig::hard(v)).unwrap();
        let s = std::f32::consts::FRAC_1_SQRT_2;
        // block0 = (1,1)/sqrt2, block1 = (1,0); inter-normalized by sqrt2
        let expected = [s * s, s * s, s, 0.0];
        for (a, b) in g.values.iter().zip(expected) {
            assert!((a - b).abs() < 1e-6, "{:?}", g.values);
        }
        assert_eq!(g.method_tag, "vlad-hard");
    }

    #[test]
    fn dim_mismatch_is_config_error() {
        let v = vocab(vec![0.0; 6], 2, 3);
        let m = FeatureMap::new("m", 1, 1, 2, vec![1.0, 2.0]).unwrap();
        assert!(matches!(vlad(&m, &VladConfig::hard(v)), Err(Error::Config(_))));
    }

    #[test]
    fn soft_weights_sum_to_one_on_symmetric_input() {
        // A feature equidistant from both centers splits evenly; residuals cancel.
        let v = vocab(vec![-1.0, 1.0], 2, 1);
        let m = FeatureMap::new("m", 1, 1, 1, vec![0.0]).unwrap();
        let g = vlad(&m, &VladConfig::soft(v, 1.0)).unwrap();
        let h = std::f32::consts::FRAC_1_SQRT_2;
        assert!((g.values[0] - h).abs() < 1e-6 && (g.values[1] + h).abs() < 1e-6);
    }

    #[test]
    fn bad_temperature_rejected() {
        let v = vocab(vec![0.0], 1, 1);
        let m = FeatureMap::new("m", 1, 1, 1, vec![1.0]).unwrap();
        assert!(vlad(&m, &VladConfig::soft(v, 0.0)).is_err());
    }

    #[test]
    fn tags() {
        let v = vocab(vec![0.0], 1, 1);
        assert_eq!(VladConfig::soft(v.clone(), 1.0).method_tag(), "vlad-soft-t1");
        let mut c = VladConfig::hard(v);
        c.normalize_features = true;
        assert_eq!(c.method_tag(), "vlad-hard-l2f");
    }
}
