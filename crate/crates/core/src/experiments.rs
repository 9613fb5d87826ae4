//! Comparison harnesses: aggregation methods on one dataset, vocabulary
//! sources for one target, and vocabulary transfer between datasets.
//!
//! Each returns a small table with a text and a JSON rendering so that sweeps
//! can be diffed between runs.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::aggregation::{AggregationMethod, Assignment, PoolingConfig, VladConfig};
use crate::error::{Error, Result};
use crate::feature_store::{DatasetManifest, FeatureSource};
use crate::retrieval::{evaluate, DescriptorCache, EvalOptions, RetrievalReport};
use crate::vocabulary::{build_vocabulary, VocabAssembly, VocabPart, Vocabulary};

/// A dataset with its features.
#[derive(Clone)]
pub struct Benchmark {
    pub manifest: DatasetManifest,
    pub features: Arc<dyn FeatureSource + Send>,
}

impl fmt::Debug for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Benchmark")
            .field("dataset", &self.manifest.name())
            .finish()
    }
}

impl Benchmark {
    pub fn new(manifest: DatasetManifest, features: impl FeatureSource + Send + 'static) -> Self {
        Benchmark {
            manifest,
            features: Arc::new(features),
        }
    }

    pub fn name(&self) -> &str {
        self.manifest.name()
    }

    /// Every `stride`-th database image of this dataset.
    pub fn part(&self, stride: usize) -> VocabPart {
        VocabPart::new(self.manifest.clone(), self.features.clone(), stride)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub label: String,
    pub method_tag: String,
    pub dim: usize,
    pub vocab_fingerprint: Option<String>,
    pub recall: BTreeMap<usize, f64>,
}

impl ComparisonRow {
    fn from_report(label: impl Into<String>, r: &RetrievalReport) -> Self {
        ComparisonRow {
            label: label.into(),
            method_tag: r.method_tag.clone(),
            dim: r.dim,
            vocab_fingerprint: r.vocab_fingerprint.clone(),
            recall: r.recall.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonTable {
    pub dataset: String,
    pub k_values: Vec<usize>,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn row(&self, label: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn to_table(&self) -> String {
        let mut header = vec!["label".to_string(), "method".into(), "dim".into()];
        header.extend(self.k_values.iter().map(|k| format!("R@{k}")));
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let mut cells = vec![r.label.clone(), r.method_tag.clone(), r.dim.to_string()];
                cells.extend(self.k_values.iter().map(|k| format!("{:.2}", r.recall[k] * 100.0)));
                cells
            })
            .collect();
        aligned(&header, &rows)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes") + "\n"
    }
}

fn aligned(header: &[String], rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..header.len())
        .map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap())
        .collect();
    std::iter::once(header)
        .chain(rows.iter().map(Vec::as_slice))
        .map(|cells| {
            let line: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
            line.join("  ").trim_end().to_string() + "\n"
        })
        .collect()
}

/// GAP, GMP, GeM, hard VLAD and soft VLAD, the usual comparison set.
pub fn standard_methods(vocabulary: Arc<Vocabulary>) -> Vec<(String, AggregationMethod)> {
    vec![
        ("GAP".into(), PoolingConfig::gap().into()),
        ("GMP".into(), PoolingConfig::gmp().into()),
        ("GeM".into(), PoolingConfig::gem(3.0).into()),
        ("VLAD hard".into(), VladConfig::hard(vocabulary.clone()).into()),
        (
            "VLAD soft".into(),
            VladConfig::soft(vocabulary, Assignment::DEFAULT_TEMPERATURE).into(),
        ),
    ]
}

/// Recall of several aggregation methods on the same dataset.
pub fn compare_aggregations(
    bench: &Benchmark,
    methods: &[(String, AggregationMethod)],
    options: &EvalOptions,
) -> Result<ComparisonTable> {
    if methods.is_empty() {
        return Err(Error::Config("no aggregation methods to compare".into()));
    }
    let cache = DescriptorCache::in_memory();
    let mut rows = Vec::with_capacity(methods.len());
    for (label, method) in methods {
        let eval = evaluate(&bench.manifest, bench.features.as_ref(), method, options, Some(&cache))?;
        rows.push(ComparisonRow::from_report(label.clone(), &eval.report));
    }
    Ok(ComparisonTable {
        dataset: bench.name().to_string(),
        k_values: sorted_k(&options.k_values),
        rows,
    })
}

fn sorted_k(k: &[usize]) -> Vec<usize> {
    let mut k = k.to_vec();
    k.sort_unstable();
    k.dedup();
    k
}

/// Where a vocabulary's training features come from, relative to the target dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VocabScope {
    /// Every available dataset.
    Global,
    /// Datasets with man-made, structured scenes.
    Structured,
    /// Natural, unstructured scenes.
    Unstructured,
    /// Only the target's own database.
    MapSpecific,
    /// Datasets from the target's domain.
    DomainSpecific,
}

impl VocabScope {
    pub const ALL: [VocabScope; 5] = [
        VocabScope::Global,
        VocabScope::Structured,
        VocabScope::Unstructured,
        VocabScope::MapSpecific,
        VocabScope::DomainSpecific,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            VocabScope::Global => "global",
            VocabScope::Structured => "structured",
            VocabScope::Unstructured => "unstructured",
            VocabScope::MapSpecific => "map-specific",
            VocabScope::DomainSpecific => "domain-specific",
        }
    }
}

impl fmt::Display for VocabScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct VocabCandidate {
    pub label: String,
    pub assembly: VocabAssembly,
}

impl VocabCandidate {
    pub fn new(scope: VocabScope, assembly: VocabAssembly) -> Self {
        VocabCandidate {
            label: scope.to_string(),
            assembly,
        }
    }

    /// Vocabulary from the target's own database.
    pub fn map_specific(target: &Benchmark, k: usize) -> Self {
        Self::new(VocabScope::MapSpecific, VocabAssembly::new(vec![target.part(1)], k))
    }
}

/// Builds each candidate vocabulary and evaluates VLAD on `target` with it.
pub fn vocabulary_source_study(
    target: &Benchmark,
    candidates: &[VocabCandidate],
    assignment: Assignment,
    seed: i64,
    options: &EvalOptions,
) -> Result<ComparisonTable> {
    if candidates.is_empty() {
        return Err(Error::Config("no vocabulary candidates".into()));
    }
    let mut rows = Vec::with_capacity(candidates.len());
    for c in candidates {
        let build = build_vocabulary(&c.assembly, seed)?;
        log::info!(
            "{}: vocabulary {} (inertia {:.4})",
            c.label,
            build.vocabulary.fingerprint(),
            build.inertia
        );
        let method = vlad_method(Arc::new(build.vocabulary), assignment);
        let eval = evaluate(&target.manifest, target.features.as_ref(), &method, options, None)?;
        rows.push(ComparisonRow::from_report(c.label.clone(), &eval.report));
    }
    Ok(ComparisonTable {
        dataset: target.name().to_string(),
        k_values: sorted_k(&options.k_values),
        rows,
    })
}

fn vlad_method(vocabulary: Arc<Vocabulary>, assignment: Assignment) -> AggregationMethod {
    VladConfig {
        assignment,
        vocabulary,
        normalize_features: false,
    }
    .into()
}

/// Recall@`recall_k` for every (vocabulary source, target) pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransferMatrix {
    pub recall_k: usize,
    pub sources: Vec<String>,
    pub targets: Vec<String>,
    /// `values[source][target]`.
    pub values: Vec<Vec<f64>>,
}

impl TransferMatrix {
    pub fn get(&self, source: &str, target: &str) -> Option<f64> {
        let s = self.sources.iter().position(|x| x == source)?;
        let t = self.targets.iter().position(|x| x == target)?;
        Some(self.values[s][t])
    }

    pub fn to_table(&self) -> String {
        let mut header = vec![format!("vocab \\ R@{}", self.recall_k)];
        header.extend(self.targets.iter().cloned());
        let rows: Vec<Vec<String>> = self
            .sources
            .iter()
            .zip(&self.values)
            .map(|(s, vals)| {
                std::iter::once(s.clone())
                    .chain(vals.iter().map(|v| format!("{:.2}", v * 100.0)))
                    .collect()
            })
            .collect();
        aligned(&header, &rows)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("matrix serializes") + "\n"
    }
}

/// Builds a map-specific vocabulary from each dataset and evaluates it on all of them.
pub fn vocabulary_transfer(
    datasets: &[Benchmark],
    k: usize,
    assignment: Assignment,
    seed: i64,
    recall_k: usize,
    options: &EvalOptions,
) -> Result<TransferMatrix> {
    if datasets.is_empty() {
        return Err(Error::Config("no datasets for vocabulary transfer".into()));
    }
    let mut options = options.clone();
    if !options.k_values.contains(&recall_k) {
        options.k_values.push(recall_k);
    }
    let mut values = Vec::with_capacity(datasets.len());
    for source in datasets {
        let vocab = Arc::new(build_vocabulary(&VocabAssembly::new(vec![source.part(1)], k), seed)?.vocabulary);
        let method = vlad_method(vocab, assignment);
        let row = datasets
            .iter()
            .map(|target| {
                let eval = evaluate(&target.manifest, target.features.as_ref(), &method, &options, None)?;
                Ok(eval.report.recall_at(recall_k).unwrap_or(0.0))
            })
            .collect::<Result<Vec<_>>>()?;
        values.push(row);
    }
    let names: Vec<String> = datasets.iter().map(|d| d.name().to_string()).collect();
    Ok(TransferMatrix {
        recall_k,
        sources: names.clone(),
        targets: names,
        values,
    })
}
