//! Backbone configurations the feature files are expected to come from.
//!
//! The aggregation code never touches a network; these constants fix the
//! layer/facet choices and the VLAD cluster counts that go with each backbone.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Facet {
    Query,
    Key,
    Value,
    Token,
}

impl fmt::Display for Facet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Facet::Query => "query",
            Facet::Key => "key",
            Facet::Value => "value",
            Facet::Token => "token",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelPreset {
    pub name: &'static str,
    pub patch_size: usize,
    pub depth: usize,
    /// Per-patch feature width D.
    pub feature_dim: usize,
    pub layer: usize,
    pub facet: Facet,
    /// VLAD cluster count used with this backbone, where one is established.
    pub vlad_clusters: Option<usize>,
}

impl ModelPreset {
    pub fn vlad_dim(&self) -> Option<usize> {
        self.vlad_clusters.map(|k| k * self.feature_dim)
    }

    /// Patch-grid shape for an input of `height x width` pixels.
    pub fn grid(&self, height: usize, width: usize) -> (usize, usize) {
        (height / self.patch_size, width / self.patch_size)
    }
}

/// DINO ViT-S/8, layer 9 `key` facet, 128 clusters.
pub const DINO_VITS8: ModelPreset = ModelPreset {
    name: "dino-vits8",
    patch_size: 8,
    depth: 12,
    feature_dim: 384,
    layer: 9,
    facet: Facet::Key,
    vlad_clusters: Some(128),
};

/// DINOv2 ViT-G/14, layer 31 `value` facet, 32 clusters.
pub const DINOV2_VITG14: ModelPreset = ModelPreset {
    name: "dinov2-vitg14",
    patch_size: 14,
    depth: 40,
    feature_dim: 1536,
    layer: 31,
    facet: Facet::Value,
    vlad_clusters: Some(32),
};

pub const DINOV2_VITB14: ModelPreset = ModelPreset {
    name: "dinov2-vitb14",
    patch_size: 14,
    depth: 12,
    feature_dim: 768,
    layer: 11,
    facet: Facet::Value,
    vlad_clusters: None,
};

pub const DINOV2_VITS14: ModelPreset = ModelPreset {
    name: "dinov2-vits14",
    patch_size: 14,
    depth: 12,
    feature_dim: 384,
    layer: 11,
    facet: Facet::Value,
    vlad_clusters: None,
};

pub const ALL_MODELS: [ModelPreset; 4] = [DINO_VITS8, DINOV2_VITG14, DINOV2_VITB14, DINOV2_VITS14];

impl FromStr for ModelPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ALL_MODELS
            .into_iter()
            .find(|m| m.name.eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown model '{s}'")))
    }
}

/// Clusters to use when the caller gives none: 32 for 1536-dim features,
/// 128 for 384-dim features. `None` for anything else.
pub fn default_clusters_for_dim(feature_dim: usize) -> Option<usize> {
    match feature_dim {
        1536 => DINOV2_VITG14.vlad_clusters,
        384 => DINO_VITS8.vlad_clusters,
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vlad_dims() {
        assert_eq!(DINOV2_VITG14.vlad_dim(), Some(49152));
        assert_eq!(DINO_VITS8.vlad_dim(), Some(49152));
    }

    #[test]
    fn grids() {
        assert_eq!(DINOV2_VITG14.grid(224, 224), (16, 16));
        assert_eq!(DINO_VITS8.grid(224, 224), (28, 28));
    }

    #[test]
    fn defaults_by_dim() {
        assert_eq!(default_clusters_for_dim(1536), Some(32));
        assert_eq!(default_clusters_for_dim(384), Some(128));
        assert_eq!(default_clusters_for_dim(100), None);
        assert_eq!("DINOv2-ViTG14".parse::<ModelPreset>().unwrap(), DINOV2_VITG14);
    }
}
