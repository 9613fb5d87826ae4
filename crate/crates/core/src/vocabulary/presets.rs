//! Per-domain vocabulary recipes.
//!
//! Strides equalize how many reference images each dataset contributes:
//! Pitts-30k is taken every 4th image for the urban vocabulary and VP-Air
//! every 2nd for the aerial one. Every other domain uses its full reference
//! databases. Dataset names here are placeholders matched against the
//! `name` field of user manifests (case and punctuation insensitive).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::feature_store::{DatasetManifest, FeatureSource};

use super::assembly::{VocabAssembly, VocabPart};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Domain {
    Urban,
    Indoor,
    Aerial,
    Subterranean,
    Degraded,
    Underwater,
}

impl Domain {
    pub const ALL: [Domain; 6] = [
        Domain::Urban,
        Domain::Indoor,
        Domain::Aerial,
        Domain::Subterranean,
        Domain::Degraded,
        Domain::Underwater,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Domain::Urban => "urban",
            Domain::Indoor => "indoor",
            Domain::Aerial => "aerial",
            Domain::Subterranean => "subterranean",
            Domain::Degraded => "degraded",
            Domain::Underwater => "underwater",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase();
        Domain::ALL
            .into_iter()
            .find(|d| d.as_str() == s || (s == "subt" && *d == Domain::Subterranean))
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown domain '{s}' (expected one of urban, indoor, aerial, subterranean, degraded, underwater)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecipePart {
    pub dataset: &'static str,
    pub aliases: &'static [&'static str],
    pub stride: usize,
}

impl RecipePart {
    fn matches(&self, name: &str) -> bool {
        let name = normalize(name);
        normalize(self.dataset) == name || self.aliases.iter().any(|a| normalize(a) == name)
    }
}

/// A template for [`VocabAssembly`]: which datasets, at which stride.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainRecipe {
    pub domain: Domain,
    pub parts: Vec<RecipePart>,
}

fn normalize(name: &str) -> String {
    name.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

const fn part(dataset: &'static str, aliases: &'static [&'static str], stride: usize) -> RecipePart {
    RecipePart {
        dataset,
        aliases,
        stride,
    }
}

/// The six domain recipes.
pub fn domain_vocab_presets() -> BTreeMap<Domain, DomainRecipe> {
    let recipes = [
        (
            Domain::Urban,
            vec![
                part("Oxford", &["Oxford RobotCar"], 1),
                part("St Lucia", &[], 1),
                part("Pitts-30k", &["Pittsburgh-30k", "Pitts30k"], 4),
            ],
        ),
        (
            Domain::Indoor,
            vec![
                part("Baidu Mall", &[], 1),
                part("Gardens Point", &[], 1),
                part("17 Places", &[], 1),
            ],
        ),
        (Domain::Aerial, vec![part("Nardo-Air", &[], 1), part("VP-Air", &[], 2)]),
        (Domain::Subterranean, vec![part("Laurel Caverns", &[], 1)]),
        (Domain::Degraded, vec![part("Hawkins", &[], 1)]),
        (Domain::Underwater, vec![part("Mid-Atlantic Ridge", &["MAR"], 1)]),
    ];
    recipes
        .into_iter()
        .map(|(domain, parts)| (domain, DomainRecipe { domain, parts }))
        .collect()
}

pub fn preset(domain: Domain) -> DomainRecipe {
    domain_vocab_presets()
        .remove(&domain)
        .expect("every domain has a recipe")
}

impl DomainRecipe {
    /// Matches each recipe dataset against `available` (manifest + features)
    /// and builds the assembly. Every recipe dataset must be present.
    pub fn resolve(
        &self,
        available: &[(DatasetManifest, Arc<dyn FeatureSource + Send>)],
        k: usize,
    ) -> Result<VocabAssembly> {
        let mut parts = Vec::with_capacity(self.parts.len());
        for rp in &self.parts {
            let (manifest, features) = available.iter().find(|(m, _)| rp.matches(m.name())).ok_or_else(|| {
                let names: Vec<&str> = available.iter().map(|(m, _)| m.name()).collect();
                Error::Config(format!(
                    "{} recipe needs dataset '{}' but only {:?} were provided",
                    self.domain, rp.dataset, names
                ))
            })?;
            parts.push(VocabPart::new(manifest.clone(), features.clone(), rp.stride));
        }
        Ok(VocabAssembly::new(parts, k))
    }
}
