use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::rank::{Metric, Ranking};
use crate::error::{Error, Result};
use crate::feature_store::{DatasetManifest, Role};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub query_id: String,
    pub ranked: Vec<String>,
    pub scores: Vec<f64>,
    pub num_positives: usize,
    /// 1-based rank of the first positive within `ranked`.
    pub first_correct_rank: Option<usize>,
}

/// Recall@K for one method on one dataset, plus every query's ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub dataset: String,
    pub method_tag: String,
    pub metric: Metric,
    pub dim: usize,
    pub vocab_fingerprint: Option<String>,
    pub k_values: Vec<usize>,
    pub recall: BTreeMap<usize, f64>,
    pub num_queries: usize,
    /// Queries without any ground-truth positive; not part of the denominator.
    pub excluded_queries: Vec<String>,
    pub per_query: Vec<QueryResult>,
}

/// Scores a ranking against the manifest ground truth.
pub fn recall_at_k(ranking: &Ranking, manifest: &DatasetManifest, k_values: &[usize]) -> Result<RetrievalReport> {
    let mut ks = k_values.to_vec();
    ks.sort_unstable();
    ks.dedup();
    match ks.first() {
        None => return Err(Error::Config("need at least one K value".into())),
        Some(0) => return Err(Error::Config("K values must be >= 1".into())),
        _ => {}
    }
    if ranking.queries.is_empty() {
        return Err(Error::Validation("no queries to evaluate".into()));
    }
    let num_db = manifest.database().count();
    let depth = ks[ks.len() - 1].min(num_db);

    let mut seen = HashSet::new();
    let mut per_query = Vec::with_capacity(ranking.queries.len());
    let mut excluded = Vec::new();
    for rq in &ranking.queries {
        match manifest.entry(&rq.query_id) {
            Some(e) if e.role == Role::Query => {}
            Some(_) => {
                return Err(Error::Validation(format!(
                    "'{}' is a database entry, not a query",
                    rq.query_id
                )))
            }
            None => return Err(Error::Validation(format!("unknown query id '{}'", rq.query_id))),
        }
        if !seen.insert(rq.query_id.as_str()) {
            return Err(Error::Validation(format!("query '{}' ranked twice", rq.query_id)));
        }
        if rq.matches.len() < depth {
            return Err(Error::Config(format!(
                "query '{}' has {} ranked matches, need {depth} for the largest K",
                rq.query_id,
                rq.matches.len()
            )));
        }
        let mut ranked_seen = HashSet::new();
        for m in &rq.matches {
            match manifest.entry(&m.image_id) {
                Some(e) if e.role == Role::Database => {}
                _ => return Err(Error::Validation(format!("unknown database id '{}'", m.image_id))),
            }
            if !ranked_seen.insert(m.image_id.as_str()) {
                return Err(Error::Validation(format!(
                    "'{}' ranked twice for '{}'",
                    m.image_id, rq.query_id
                )));
            }
        }
        let num_positives = manifest.positives(&rq.query_id).len();
        if num_positives == 0 {
            excluded.push(rq.query_id.clone());
        }
        let first_correct_rank = rq
            .matches
            .iter()
            .position(|m| manifest.is_positive(&rq.query_id, &m.image_id))
            .map(|p| p + 1);
        per_query.push(QueryResult {
            query_id: rq.query_id.clone(),
            ranked: rq.matches.iter().map(|m| m.image_id.clone()).collect(),
            scores: rq.matches.iter().map(|m| m.score).collect(),
            num_positives,
            first_correct_rank,
        });
    }

    let scored: Vec<&QueryResult> = per_query.iter().filter(|q| q.num_positives > 0).collect();
    if scored.is_empty() {
        return Err(Error::Validation("no query has a ground-truth positive".into()));
    }
    if !excluded.is_empty() {
        log::warn!(
            "{} queries have no ground-truth positive and are excluded",
            excluded.len()
        );
    }
    let recall = ks
        .iter()
        .map(|&k| {
            let hits = scored
                .iter()
                .filter(|q| q.first_correct_rank.is_some_and(|r| r <= k))
                .count();
            (k, hits as f64 / scored.len() as f64)
        })
        .collect();

    Ok(RetrievalReport {
        dataset: manifest.name().to_string(),
        method_tag: ranking.method_tag.clone(),
        metric: ranking.metric,
        dim: 0,
        vocab_fingerprint: None,
        k_values: ks,
        recall,
        num_queries: scored.len(),
        excluded_queries: excluded,
        per_query,
    })
}

impl RetrievalReport {
    pub fn recall_at(&self, k: usize) -> Option<f64> {
        self.recall.get(&k).copied()
    }

    /// Aligned plain-text summary, recall in percent.
    pub fn to_table(&self) -> String {
        let mut header = vec!["dataset".to_string(), "method".into(), "dim".into(), "queries".into()];
        let mut row = vec![
            self.dataset.clone(),
            self.method_tag.clone(),
            self.dim.to_string(),
            self.num_queries.to_string(),
        ];
        for (k, r) in &self.recall {
            header.push(format!("R@{k}"));
            row.push(format!("{:.2}", r * 100.0));
        }
        let widths: Vec<usize> = header.iter().zip(&row).map(|(h, r)| h.len().max(r.len())).collect();
        let line = |cells: &[String]| {
            let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
            padded.join("  ").trim_end().to_string()
        };
        let mut out = format!("{}\n{}\n", line(&header), line(&row));
        if !self.excluded_queries.is_empty() {
            out.push_str(&format!(
                "excluded (no positives): {}\n",
                self.excluded_queries.join(", ")
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("report JSON: {e}")))
    }

    /// Writes `<stem>.txt` and `<stem>.json`.
    pub fn save(&self, stem: impl AsRef<Path>) -> Result<()> {
        let stem = stem.as_ref();
        for (ext, body) in [("txt", self.to_table()), ("json", self.to_json())] {
            let path = stem.with_extension(ext);
            std::fs::write(&path, body).map_err(|e| Error::io_at(&path, e))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feature_store::{DescriptorSet, GtMode, ManifestEntry};
    use crate::retrieval::rank;

    fn frame_manifest() -> DatasetManifest {
        let mut entries: Vec<_> = (8..18)
            .map(|f| ManifestEntry::database(format!("db{f}")).with_frame(f))
            .collect();
        entries.push(ManifestEntry::query("q").with_frame(10));
        DatasetManifest::new("frames", GtMode::Frame, 2.0, entries, Default::default()).unwrap()
    }

    fn ranking(order: &[&str]) -> Ranking {
        Ranking {
            method_tag: "gem-p3".into(),
            metric: Metric::Cosine,
            queries: vec![super::super::RankedQuery {
                query_id: "q".into(),
                matches: order
                    .iter()
                    .enumerate()
                    .map(|(i, id)| super::super::Match {
                        image_id: id.to_string(),
                        score: 1.0 - i as f64 * 0.1,
                    })
                    .collect(),
            }],
        }
    }

    #[test]
    fn frame_threshold() {
        let m = frame_manifest();
        let r = recall_at_k(&ranking(&["db13", "db14", "db15", "db16", "db11"]), &m, &[1, 5]).unwrap();
        assert_eq!(r.recall_at(1), Some(0.0));
        assert_eq!(r.recall_at(5), Some(1.0));
        assert_eq!(r.per_query[0].first_correct_rank, Some(5));
    }

    #[test]
    fn metric_radius() {
        let m = DatasetManifest::new(
            "m",
            GtMode::Metric,
            10.0,
            vec![
                ManifestEntry::database("a").with_position(3.0, 0.0),
                ManifestEntry::database("b").with_position(50.0, 0.0),
                ManifestEntry::query("q").with_position(0.0, 0.0),
            ],
            Default::default(),
        )
        .unwrap();
        let r = recall_at_k(&ranking(&["a", "b"]), &m, &[1]).unwrap();
        assert_eq!(r.recall_at(1), Some(1.0));
    }

    #[test]
    fn bad_ids_and_k() {
        let m = frame_manifest();
        assert!(recall_at_k(&ranking(&["nope"]), &m, &[1]).is_err());
        assert!(recall_at_k(&ranking(&["db8"]), &m, &[]).is_err());
        assert!(recall_at_k(&ranking(&["db8"]), &m, &[0]).is_err());
        // depth 1 is too shallow for K=5
        assert!(recall_at_k(&ranking(&["db8"]), &m, &[1, 5]).is_err());
        let mut empty = ranking(&["db8"]);
        empty.queries.clear();
        assert!(recall_at_k(&empty, &m, &[1]).is_err());
    }

    #[test]
    fn queries_without_positives_are_excluded() {
        let m = DatasetManifest::new(
            "m",
            GtMode::Frame,
            1.0,
            vec![
                ManifestEntry::database("d0").with_frame(0),
                ManifestEntry::database("d1").with_frame(1),
                ManifestEntry::query("q0").with_frame(0),
                ManifestEntry::query("far").with_frame(90),
            ],
            Default::default(),
        )
        .unwrap();
        let mut db = DescriptorSet::new("gem-p3", 2, None).unwrap();
        db.push("d0", &[1.0, 0.0]).unwrap();
        db.push("d1", &[0.0, 1.0]).unwrap();
        let mut q = DescriptorSet::new("gem-p3", 2, None).unwrap();
        q.push("q0", &[1.0, 0.1]).unwrap();
        q.push("far", &[0.0, 1.0]).unwrap();
        let r = recall_at_k(&rank(&db, &q, Metric::Cosine, 2).unwrap(), &m, &[1]).unwrap();
        assert_eq!(r.num_queries, 1);
        assert_eq!(r.excluded_queries, ["far"]);
        assert_eq!(r.recall_at(1), Some(1.0));
        assert!(r.to_table().contains("excluded (no positives): far"));
    }

    #[test]
    fn exports_are_stable() {
        let m = frame_manifest();
        let r = recall_at_k(&ranking(&["db13", "db14", "db15", "db16", "db11"]), &m, &[5, 1, 1]).unwrap();
        assert_eq!(r.k_values, [1, 5]);
        let table = r.to_table();
        let lines: Vec<&str> = table.lines().collect();
        assert!(lines[0].starts_with("dataset"));
        assert_eq!(lines[0].find("R@1"), lines[1].find("0.00"));
        let json = r.to_json();
        assert_eq!(json, r.to_json());
        assert_eq!(RetrievalReport::from_json(&json).unwrap(), r);
    }
}
