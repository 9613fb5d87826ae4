use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_store::DescriptorSet;
use crate::linalg::{dot_f32, squared_distance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Higher is better. Zero vectors have similarity 0 to everything.
    #[default]
    Cosine,
    /// Lower is better.
    Euclidean,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::Cosine => "cosine",
            Metric::Euclidean => "euclidean",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cosine" | "cos" => Ok(Metric::Cosine),
            "euclidean" | "l2" => Ok(Metric::Euclidean),
            _ => Err(Error::Config(format!(
                "unknown metric {s:?} (expected cosine or euclidean)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub image_id: String,
    /// Cosine similarity or Euclidean distance, depending on the metric.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedQuery {
    pub query_id: String,
    pub matches: Vec<Match>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    pub method_tag: String,
    pub metric: Metric,
    pub queries: Vec<RankedQuery>,
}

/// Exact top-`max_k` database matches per query.
///
/// Ties keep database order. Queries are processed in parallel; output
/// follows query order.
pub fn rank(db: &DescriptorSet, queries: &DescriptorSet, metric: Metric, max_k: usize) -> Result<Ranking> {
    if db.is_empty() {
        return Err(Error::Config("cannot rank against an empty database".into()));
    }
    if max_k == 0 {
        return Err(Error::Config("max_k must be >= 1".into()));
    }
    if !queries.is_empty() && queries.dim() != db.dim() {
        return Err(Error::Config(format!(
            "query dim {} does not match database dim {}",
            queries.dim(),
            db.dim()
        )));
    }
    let db_norms: Vec<f64> = db.vectors().map(|v| dot_f32(v, v).sqrt()).collect();
    let keep = max_k.min(db.len());
    let ids: Vec<&str> = queries.ids().iter().map(String::as_str).collect();
    let ranked = ids
        .par_iter()
        .enumerate()
        .map(|(qi, qid)| {
            let q = queries.vector(qi);
            let scores: Vec<f64> = match metric {
                Metric::Cosine => {
                    let qn = dot_f32(q, q).sqrt();
                    db.vectors()
                        .zip(&db_norms)
                        .map(|(d, &dn)| {
                            if qn > 0.0 && dn > 0.0 {
                                dot_f32(q, d) / (qn * dn)
                            } else {
                                0.0
                            }
                        })
                        .collect()
                }
                Metric::Euclidean => db.vectors().map(|d| squared_distance(q, d).sqrt()).collect(),
            };
            let mut order: Vec<usize> = (0..scores.len()).collect();
            let cmp = |a: &usize, b: &usize| {
                let by_score = match metric {
                    Metric::Cosine => scores[*b].total_cmp(&scores[*a]),
                    Metric::Euclidean => scores[*a].total_cmp(&scores[*b]),
                };
                by_score.then(a.cmp(b))
            };
            if keep < order.len() {
                order.select_nth_unstable_by(keep - 1, cmp);
                order.truncate(keep);
            }
            order.sort_unstable_by(cmp);
            RankedQuery {
                query_id: qid.to_string(),
                matches: order
                    .into_iter()
                    .map(|i| Match {
                        image_id: db.ids()[i].clone(),
                        score: scores[i],
                    })
                    .collect(),
            }
        })
        .collect();
    Ok(Ranking {
        method_tag: db.method_tag().to_string(),
        metric,
        queries: ranked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(rows: &[&[f32]]) -> DescriptorSet {
        let mut s = DescriptorSet::new("gem-p3", rows[0].len(), None).unwrap();
        for (i, r) in rows.iter().enumerate() {
            s.push(format!("d{i}"), r).unwrap();
        }
        s
    }

    #[test]
    fn identical_query_ranks_first() {
        let db = set(&[&[1.0, 0.0, 0.0], &[0.6, 0.8, 0.0], &[0.0, 0.0, 1.0]]);
        let q = set(&[&[0.6, 0.8, 0.0]]);
        let r = rank(&db, &q, Metric::Cosine, 3).unwrap();
        assert_eq!(r.queries[0].matches[0].image_id, "d1");
        assert!((r.queries[0].matches[0].score - 1.0).abs() < 1e-12);
        let r = rank(&db, &q, Metric::Euclidean, 1).unwrap();
        assert_eq!(r.queries[0].matches.len(), 1);
        assert_eq!(r.queries[0].matches[0].score, 0.0);
    }

    #[test]
    fn ties_keep_database_order() {
        let db = set(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 0.0], &[2.0, 0.0]]);
        let q = set(&[&[1.0, 0.0]]);
        let r = rank(&db, &q, Metric::Cosine, 4).unwrap();
        let ids: Vec<_> = r.queries[0].matches.iter().map(|m| m.image_id.as_str()).collect();
        assert_eq!(ids, ["d0", "d2", "d3", "d1"]);
    }

    #[test]
    fn max_k_larger_than_database() {
        let db = set(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let r = rank(&db, &db, Metric::Cosine, 10).unwrap();
        assert!(r.queries.iter().all(|q| q.matches.len() == 2));
    }

    #[test]
    fn errors() {
        let db = set(&[&[1.0, 0.0]]);
        let empty = DescriptorSet::new("gem-p3", 2, None).unwrap();
        assert!(rank(&empty, &db, Metric::Cosine, 1).is_err());
        assert!(rank(&db, &db, Metric::Cosine, 0).is_err());
        let q = set(&[&[1.0, 0.0, 0.0]]);
        assert!(matches!(rank(&db, &q, Metric::Cosine, 1), Err(Error::Config(_))));
    }

    #[test]
    fn metric_names() {
        assert_eq!("COSINE".parse::<Metric>().unwrap(), Metric::Cosine);
        assert_eq!("l2".parse::<Metric>().unwrap(), Metric::Euclidean);
        assert!("hamming".parse::<Metric>().is_err());
    }
}
