//! Reference implementations used as test oracles. Written for clarity,
//! not speed, and share no code with the crate.
#![allow(dead_code)]

/// VLAD by the textbook definition, all in f64.
/// `temperature = None` is hard assignment.
pub fn vlad_oracle(pixels: &[Vec<f64>], centers: &[Vec<f64>], temperature: Option<f64>) -> Vec<f64> {
    let k = centers.len();
    let d = centers[0].len();
    let mut blocks = vec![vec![0.0f64; d]; k];
    for f in pixels {
        let dists: Vec<f64> = centers
            .iter()
            .map(|c| f.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum())
            .collect();
        let weights: Vec<f64> = match temperature {
            None => {
                let mut best = 0;
                for j in 1..k {
                    if dists[j] < dists[best] {
                        best = j;
                    }
                }
                (0..k).map(|j| if j == best { 1.0 } else { 0.0 }).collect()
            }
            Some(t) => {
                let logits: Vec<f64> = dists.iter().map(|x| -x / t).collect();
                let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
                let z: f64 = e.iter().sum();
                e.iter().map(|x| x / z).collect()
            }
        };
        for j in 0..k {
            for c in 0..d {
                blocks[j][c] += weights[j] * (f[c] - centers[j][c]);
            }
        }
    }
    let mut out = Vec::with_capacity(k * d);
    for b in &blocks {
        let n = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        out.extend(b.iter().map(|x| if n > 0.0 { x / n } else { 0.0 }));
    }
    let n = out.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        out.iter_mut().for_each(|x| *x /= n);
    }
    out
}

/// Mean silhouette coefficient with Euclidean distance.
pub fn silhouette(points: &[Vec<f64>], labels: &[usize]) -> f64 {
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let n_labels = labels.iter().max().unwrap() + 1;
    let mut total = 0.0;
    for i in 0..points.len() {
        let mut sums = vec![0.0; n_labels];
        let mut counts = vec![0usize; n_labels];
        for j in 0..points.len() {
            if i != j {
                sums[labels[j]] += dist(&points[i], &points[j]);
                counts[labels[j]] += 1;
            }
        }
        let own = labels[i];
        if counts[own] == 0 {
            continue;
        }
        let a = sums[own] / counts[own] as f64;
        let b = (0..n_labels)
            .filter(|&l| l != own && counts[l] > 0)
            .map(|l| sums[l] / counts[l] as f64)
            .fold(f64::INFINITY, f64::min);
        total += (b - a) / a.max(b);
    }
    total / points.len() as f64
}

/// Full sort of the database per query; ties by database index.
pub fn rank_oracle(db: &[Vec<f64>], queries: &[Vec<f64>], cosine: bool) -> Vec<Vec<usize>> {
    queries
        .iter()
        .map(|q| {
            let scores: Vec<f64> = db
                .iter()
                .map(|d| {
                    if cosine {
                        let dot: f64 = q.iter().zip(d).map(|(a, b)| a * b).sum();
                        let nq = q.iter().map(|x| x * x).sum::<f64>().sqrt();
                        let nd = d.iter().map(|x| x * x).sum::<f64>().sqrt();
                        -(dot / (nq * nd))
                    } else {
                        q.iter().zip(d).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
                    }
                })
                .collect();
            let mut idx: Vec<usize> = (0..db.len()).collect();
            idx.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap().then(a.cmp(&b)));
            idx
        })
        .collect()
}

pub fn to_f64(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

/// Sample covariance of row vectors.
#[allow(clippy::needless_range_loop)]
pub fn covariance(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let d = rows[0].len();
    let mean: Vec<f64> = (0..d)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let mut cov = vec![vec![0.0; d]; d];
    for r in rows {
        let c: Vec<f64> = r.iter().zip(&mean).map(|(x, m)| x - m).collect();
        for a in 0..d {
            for b in a..d {
                cov[a][b] += c[a] * c[b];
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            cov[a][b] /= (n - 1) as f64;
            cov[b][a] = cov[a][b];
        }
    }
    cov
}
