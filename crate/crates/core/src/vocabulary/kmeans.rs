//! Seeded Lloyd's k-means with k-means++ initialization.
//!
//! Centers are kept in f64 during iteration. Per-point assignment runs in
//! parallel, while every reduction (inertia, center sums) walks points in
//! index order, so the result is identical for any worker count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansParams {
    pub max_iters: usize,
    /// Stop once no center moves by more than this (L2).
    pub tol: f64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        KMeansParams {
            max_iters: 100,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KMeansResult {
    /// `k x dim`, row-major.
    pub centers: Vec<f32>,
    pub k: usize,
    pub dim: usize,
    /// Sum of squared distances of every point to its assigned center.
    pub inertia: f64,
    /// Inertia after the initial assignment and after every accepted Lloyd step.
    /// Non-increasing.
    pub inertia_history: Vec<f64>,
    pub labels: Vec<usize>,
    pub iterations: usize,
}

fn dist2(point: &[f32], center: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let mut pc = point.chunks_exact(4);
    let mut cc = center.chunks_exact(4);
    for (p, c) in (&mut pc).zip(&mut cc) {
        for lane in 0..4 {
            let d = p[lane] as f64 - c[lane];
            acc[lane] += d * d;
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (p, c) in pc.remainder().iter().zip(cc.remainder()) {
        let d = *p as f64 - c;
        s += d * d;
    }
    s
}

/// Nearest center per point (ties: lowest index) and the squared distance to it.
fn assign(points: &[f32], dim: usize, centers: &[f64]) -> (Vec<usize>, Vec<f64>) {
    points
        .par_chunks_exact(dim)
        .map(|p| {
            let mut best = (0, f64::INFINITY);
            for (j, c) in centers.chunks_exact(dim).enumerate() {
                let d = dist2(p, c);
                if d < best.1 {
                    best = (j, d);
                }
            }
            best
        })
        .unzip()
}

fn kmeans_plus_plus(points: &[f32], dim: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let m = points.len() / dim;
    let row = |i: usize| &points[i * dim..(i + 1) * dim];
    let mut centers = Vec::with_capacity(k * dim);
    let first = rng.random_range(0..m);
    centers.extend(row(first).iter().map(|&x| x as f64));
    let mut min_d2: Vec<f64> = points
        .par_chunks_exact(dim)
        .map(|p| dist2(p, &centers[..dim]))
        .collect();

    for _ in 1..k {
        let total: f64 = min_d2.iter().sum();
        let chosen = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut cumulative = 0.0;
            let mut pick = None;
            for (i, &w) in min_d2.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                cumulative += w;
                if cumulative > target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave target just above the final cumulative sum
            pick.unwrap_or_else(|| min_d2.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            rng.random_range(0..m)
        };
        let start = centers.len();
        centers.extend(row(chosen).iter().map(|&x| x as f64));
        let c = &centers[start..];
        min_d2
            .par_iter_mut()
            .zip(points.par_chunks_exact(dim))
            .for_each(|(d, p)| *d = d.min(dist2(p, c)));
    }
    centers
}

/// Moves every empty cluster onto the point farthest from its current center.
/// Points are only taken from clusters that keep at least one member.
fn reseed_empty(labels: &mut [usize], dists: &mut [f64], k: usize) -> bool {
    let mut counts = vec![0usize; k];
    labels.iter().for_each(|&l| counts[l] += 1);
    let mut changed = false;
    for j in 0..k {
        if counts[j] != 0 {
            continue;
        }
        let mut far: Option<usize> = None;
        for (i, &d) in dists.iter().enumerate() {
            if counts[labels[i]] > 1 && far.is_none_or(|f| d > dists[f]) {
                far = Some(i);
            }
        }
        let Some(p) = far else { break };
        counts[labels[p]] -= 1;
        counts[j] = 1;
        labels[p] = j;
        dists[p] = 0.0;
        changed = true;
    }
    changed
}

fn means(points: &[f32], dim: usize, k: usize, labels: &[usize], previous: &[f64]) -> Vec<f64> {
    let mut sums = vec![0.0f64; k * dim];
    let mut counts = vec![0usize; k];
    for (p, &l) in points.chunks_exact(dim).zip(labels) {
        counts[l] += 1;
        sums[l * dim..(l + 1) * dim]
            .iter_mut()
            .zip(p)
            .for_each(|(s, &x)| *s += x as f64);
    }
    for j in 0..k {
        let block = &mut sums[j * dim..(j + 1) * dim];
        if counts[j] == 0 {
            block.copy_from_slice(&previous[j * dim..(j + 1) * dim]);
        } else {
            let n = counts[j] as f64;
            block.iter_mut().for_each(|s| *s /= n);
        }
    }
    sums
}

/// Clusters `points` (`m x dim`, row-major) into `k` groups.
pub fn kmeans(points: &[f32], dim: usize, k: usize, seed: u64, params: &KMeansParams) -> Result<KMeansResult> {
    if dim == 0 || !points.len().is_multiple_of(dim) {
        return Err(Error::Config(format!(
            "k-means: {} values do not form rows of dim {dim}",
            points.len()
        )));
    }
    if k == 0 {
        return Err(Error::Config("k-means: k must be >= 1".into()));
    }
    if params.max_iters == 0 || params.tol.is_nan() || params.tol < 0.0 {
        return Err(Error::Config(format!(
            "k-means: need max_iters >= 1 and tol >= 0 (got {}, {})",
            params.max_iters, params.tol
        )));
    }
    let m = points.len() / dim;
    if m < k {
        return Err(Error::Infeasible(format!(
            "k-means: {m} points cannot form {k} clusters"
        )));
    }
    if points.iter().any(|x| !x.is_finite()) {
        return Err(Error::Validation("k-means: points must be finite".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = kmeans_plus_plus(points, dim, k, &mut rng);
    let (mut labels, mut dists) = assign(points, dim, &centers);
    let mut inertia: f64 = dists.iter().sum();
    let mut history = vec![inertia];
    let mut iterations = 0;

    while iterations < params.max_iters {
        iterations += 1;
        let mut working = labels.clone();
        reseed_empty(&mut working, &mut dists, k);
        let next = means(points, dim, k, &working, &centers);
        let shift = next
            .chunks_exact(dim)
            .zip(centers.chunks_exact(dim))
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        let (next_labels, next_dists) = assign(points, dim, &next);
        let next_inertia: f64 = next_dists.iter().sum();
        if next_inertia > inertia {
            // only reachable through floating-point rounding at a fixed point
            break;
        }
        centers = next;
        labels = next_labels;
        dists = next_dists;
        inertia = next_inertia;
        history.push(inertia);
        if shift < params.tol || shift == 0.0 {
            break;
        }
    }

    Ok(KMeansResult {
        centers: centers.iter().map(|&x| x as f32).collect(),
        k,
        dim,
        inertia,
        inertia_history: history,
        labels,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_points_single_cluster() {
        let pts = vec![1.5f32, -2.0, 1.5, -2.0, 1.5, -2.0];
        let r = kmeans(&pts, 2, 1, 42, &KMeansParams::default()).unwrap();
        assert_eq!(r.centers, vec![1.5, -2.0]);
        assert_eq!(r.inertia, 0.0);
    }

    #[test]
    fn two_points_two_clusters() {
        let pts = vec![0.0f32, 0.0, 3.0, 4.0];
        let r = kmeans(&pts, 2, 2, 42, &KMeansParams::default()).unwrap();
        let mut cs: Vec<Vec<f32>> = r.centers.chunks(2).map(|c| c.to_vec()).collect();
        cs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(cs, vec![vec![0.0, 0.0], vec![3.0, 4.0]]);
        assert_eq!(r.inertia, 0.0);
    }

    #[test]
    fn k_one_is_mean() {
        let pts = vec![0.0f32, 2.0, 4.0, 10.0];
        let r = kmeans(&pts, 1, 1, 7, &KMeansParams::default()).unwrap();
        assert!((r.centers[0] - 4.0).abs() < 1e-6);
    }

    #[test]
    fn too_few_points_infeasible() {
        assert!(matches!(
            kmeans(&[1.0, 2.0], 1, 3, 0, &KMeansParams::default()),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn empty_cluster_reseeded_to_farthest_point() {
        let mut labels = vec![0, 0, 0];
        let mut dists = vec![1.0, 9.0, 4.0];
        assert!(reseed_empty(&mut labels, &mut dists, 2));
        assert_eq!(labels, vec![0, 1, 0]);
        assert_eq!(dists[1], 0.0);
    }

    #[test]
    fn duplicates_with_k_above_distinct_count_still_terminate() {
        let pts = vec![1.0f32; 10];
        let r = kmeans(&pts, 1, 3, 1, &KMeansParams::default()).unwrap();
        assert_eq!(r.k, 3);
        assert_eq!(r.inertia, 0.0);
    }
}
