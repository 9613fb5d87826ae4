//! PCA over global descriptors: low-dimensional domain discovery and
//! PCA-whitening compression (e.g. 49152-dim VLAD down to 512).
//!
//! Fits always take the database descriptors explicitly; query descriptors
//! only ever pass through [`project`].
//!
//! The eigenproblem is solved on the `n x n` Gram matrix when there are fewer
//! descriptors than dimensions, and on the `D x D` covariance otherwise.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::feature_store::{Cursor, DescriptorSet};
use crate::linalg::{normalize_f64, to_f32};

pub const PCA_MAGIC: [u8; 8] = *b"ANYLPCAM";
pub const PCA_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_EPSILON: f64 = 1e-12;
pub const DEFAULT_WHITENED_DIM: usize = 512;

/// Eigenvalues below this fraction of the largest are treated as numerical zero.
const RANK_TOLERANCE: f64 = 1e-9;

/// Descriptors per matrix product in [`project`].
const PROJECT_BATCH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcaConfig {
    pub target_dim: usize,
    pub whiten: bool,
    /// Added to each eigenvalue before whitening.
    pub epsilon: f64,
}

impl PcaConfig {
    pub fn new(target_dim: usize, whiten: bool) -> Self {
        PcaConfig {
            target_dim,
            whiten,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

/// A fitted projection. Components are stored as f32 rows (`R x D`).
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    dim: usize,
    mean: Vec<f64>,
    components: Vec<f32>,
    eigenvalues: Vec<f64>,
    total_variance: f64,
    whiten: bool,
    epsilon: f64,
}

/// Fits a PCA with the default whitening regularizer.
pub fn fit_pca(descriptors: &DescriptorSet, target_dim: usize, whiten: bool) -> Result<PcaModel> {
    fit_pca_with(descriptors, &PcaConfig::new(target_dim, whiten))
}

pub fn fit_pca_with(descriptors: &DescriptorSet, cfg: &PcaConfig) -> Result<PcaModel> {
    let n = descriptors.len();
    let dim = descriptors.dim();
    if n < 2 {
        return Err(Error::Config(format!("PCA needs at least 2 descriptors, got {n}")));
    }
    let max_dim = (n - 1).min(dim);
    if cfg.target_dim == 0 || cfg.target_dim > max_dim {
        return Err(Error::Config(format!(
            "PCA target dim {} must be in 1..={max_dim} (min(count - 1, dim) for {n} descriptors of dim {dim})",
            cfg.target_dim
        )));
    }
    if !(cfg.epsilon >= 0.0 && cfg.epsilon.is_finite()) {
        return Err(Error::Config(format!("PCA epsilon must be >= 0, got {}", cfg.epsilon)));
    }

    let mut mean = vec![0.0f64; dim];
    for v in descriptors.vectors() {
        mean.iter_mut().zip(v).for_each(|(m, &x)| *m += x as f64);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered: Vec<f64> = descriptors
        .vectors()
        .flat_map(|v| v.iter().zip(&mean).map(|(&x, m)| x as f64 - m))
        .collect();
    let total_variance = centered.iter().map(|x| x * x).sum::<f64>() / (n - 1) as f64;

    let (eigenvalues, components) = if n <= dim {
        let gram = gemm(n, dim, n, &centered, (dim, 1), &centered, (1, dim));
        let (mu, vecs) = sorted_eigen(DMatrix::from_row_slice(n, n, &gram));
        let keep = effective_rank(&mu, cfg.target_dim);
        // v_r = X^T u_r / sqrt(mu_r)
        let mut w = vec![0.0f64; keep * n];
        for r in 0..keep {
            let scale = 1.0 / mu[r].sqrt();
            for i in 0..n {
                w[r * n + i] = vecs[(i, r)] * scale;
            }
        }
        let mut comps = gemm(keep, n, dim, &w, (n, 1), &centered, (dim, 1));
        comps.chunks_exact_mut(dim).for_each(canonical_sign);
        let lambdas = mu[..keep].iter().map(|m| m / (n - 1) as f64).collect::<Vec<_>>();
        (lambdas, comps)
    } else {
        let mut cov = gemm(dim, n, dim, &centered, (1, dim), &centered, (dim, 1));
        cov.iter_mut().for_each(|c| *c /= (n - 1) as f64);
        let (lambdas, vecs) = sorted_eigen(DMatrix::from_row_slice(dim, dim, &cov));
        let keep = effective_rank(&lambdas, cfg.target_dim);
        let mut comps = Vec::with_capacity(keep * dim);
        for r in 0..keep {
            let mut v: Vec<f64> = vecs.column(r).iter().copied().collect();
            canonical_sign(&mut v);
            comps.extend(v);
        }
        (lambdas[..keep].to_vec(), comps)
    };

    Ok(PcaModel {
        dim,
        mean,
        components: to_f32(&components),
        eigenvalues,
        total_variance,
        whiten: cfg.whiten,
        epsilon: cfg.epsilon,
    })
}

/// Row-major `m x n` product of `a` (`m x k`) and `b` (`k x n`), each given
/// with its (row, column) strides.
fn gemm(m: usize, k: usize, n: usize, a: &[f64], sa: (usize, usize), b: &[f64], sb: (usize, usize)) -> Vec<f64> {
    assert!(m * k <= a.len() && k * n <= b.len());
    assert!((m - 1) * sa.0 + (k - 1) * sa.1 < a.len() && (k - 1) * sb.0 + (n - 1) * sb.1 < b.len());
    let mut c = vec![0.0f64; m * n];
    // SAFETY: the asserts above keep every strided access inside `a` and `b`;
    // `c` is exactly m x n with row stride n.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            sa.0 as isize,
            sa.1 as isize,
            b.as_ptr(),
            sb.0 as isize,
            sb.1 as isize,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    c
}

/// Eigen-decomposition sorted by descending eigenvalue (ties keep solver order).
fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (values, vectors)
}

fn effective_rank(sorted: &[f64], target: usize) -> usize {
    let top = sorted.first().copied().unwrap_or(0.0);
    let rank = sorted
        .iter()
        .take(target)
        .take_while(|&&l| top > 0.0 && l > top * RANK_TOLERANCE)
        .count();
    if rank < target {
        log::warn!("descriptors have numerical rank {rank} < requested PCA dim {target}; keeping {rank} components");
    }
    rank.max(1)
}

/// Flips `v` so its largest-magnitude entry is positive.
fn canonical_sign(v: &mut [f64]) {
    let mut idx = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[idx].abs() {
            idx = i;
        }
    }
    if v[idx] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.dim
    }

    /// Number of retained components R.
    pub fn output_dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn whiten(&self) -> bool {
        self.whiten
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn component(&self, r: usize) -> &[f32] {
        &self.components[r * self.dim..(r + 1) * self.dim]
    }

    /// Share of the total variance captured by each retained component.
    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        if self.total_variance <= 0.0 {
            return vec![0.0; self.eigenvalues.len()];
        }
        self.eigenvalues.iter().map(|l| l / self.total_variance).collect()
    }

    /// `-pca{R}` or `-pcaw{R}`.
    pub fn tag_suffix(&self) -> String {
        format!("-pca{}{}", if self.whiten { "w" } else { "" }, self.output_dim())
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim {
            return Err(Error::Config(format!(
                "descriptor dim {got} does not match PCA input dim {}",
                self.dim
            )));
        }
        Ok(())
    }

    /// Coordinates of `x` in the (optionally whitened) component basis, before any normalization.
    pub fn transform(&self, x: &[f32]) -> Result<Vec<f64>> {
        self.check_dim(x.len())?;
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(&v, m)| v as f64 - m).collect();
        Ok((0..self.output_dim())
            .map(|r| {
                let c = self.component(r);
                let mut acc = [0.0f64; 4];
                let (cc, xc) = (c.chunks_exact(4), centered.chunks_exact(4));
                let (ct, xt) = (cc.remainder(), xc.remainder());
                for (a, b) in cc.zip(xc) {
                    for lane in 0..4 {
                        acc[lane] += a[lane] as f64 * b[lane];
                    }
                }
                let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
                s += ct.iter().zip(xt).map(|(a, b)| *a as f64 * b).sum::<f64>();
                if self.whiten {
                    s / (self.eigenvalues[r] + self.epsilon).sqrt()
                } else {
                    s
                }
            })
            .collect())
    }

    /// Maps PCA coordinates back to descriptor space (undoing whitening).
    pub fn reconstruct(&self, coords: &[f64]) -> Result<Vec<f64>> {
        if coords.len() != self.output_dim() {
            return Err(Error::Config(format!(
                "got {} coordinates, model has {} components",
                coords.len(),
                self.output_dim()
            )));
        }
        let mut out = self.mean.clone();
        for (r, &c) in coords.iter().enumerate() {
            let c = if self.whiten {
                c * (self.eigenvalues[r] + self.epsilon).sqrt()
            } else {
                c
            };
            out.iter_mut()
                .zip(self.component(r))
                .for_each(|(o, &v)| *o += c * v as f64);
        }
        Ok(out)
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let mut buf = Vec::with_capacity(64 + self.dim * 8 + self.components.len() * 4);
        buf.extend_from_slice(&PCA_MAGIC);
        buf.extend_from_slice(&PCA_FORMAT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.dim as u32).to_le_bytes());
        buf.extend_from_slice(&(self.output_dim() as u32).to_le_bytes());
        buf.push(self.whiten as u8);
        buf.extend_from_slice(&self.epsilon.to_le_bytes());
        buf.extend_from_slice(&self.total_variance.to_le_bytes());
        self.mean.iter().for_each(|x| buf.extend_from_slice(&x.to_le_bytes()));
        self.eigenvalues
            .iter()
            .for_each(|x| buf.extend_from_slice(&x.to_le_bytes()));
        self.components
            .iter()
            .for_each(|x| buf.extend_from_slice(&x.to_le_bytes()));
        w.write_all(&buf)?;
        w.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let mut cur = Cursor::new(&bytes);
        if cur.take(8)? != PCA_MAGIC {
            return Err(Error::Format("bad magic, expected \"ANYLPCAM\"".into()));
        }
        let version = cur.u32()?;
        if version != PCA_FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported PCA model version {version}")));
        }
        let dim = cur.u32()? as usize;
        let rank = cur.u32()? as usize;
        let whiten = match cur.take(1)?[0] {
            0 => false,
            1 => true,
            b => return Err(Error::Format(format!("bad whiten flag {b}"))),
        };
        let epsilon = cur.f64()?;
        let total_variance = cur.f64()?;
        let expected = cur.pos as u64 + dim as u64 * 8 + rank as u64 * 8 + (rank * dim) as u64 * 4;
        if bytes.len() as u64 != expected {
            return Err(Error::Length {
                expected,
                actual: bytes.len() as u64,
            });
        }
        let mean = (0..dim).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?;
        let eigenvalues = (0..rank).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?;
        let components = cur
            .take(rank * dim * 4)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        debug_assert_eq!(cur.remaining(), 0);
        Ok(PcaModel {
            dim,
            mean,
            components,
            eigenvalues,
            total_variance,
            whiten,
            epsilon,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io_at(path, e))?;
        self.write(std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io_at(path, e))?;
        Self::read(std::io::BufReader::new(f))
    }
}

/// Projects every descriptor and re-normalizes it to unit length.
pub fn project(model: &PcaModel, descriptors: &DescriptorSet) -> Result<DescriptorSet> {
    project_with(model, descriptors, true)
}

pub fn project_with(model: &PcaModel, descriptors: &DescriptorSet, renormalize: bool) -> Result<DescriptorSet> {
    if !descriptors.is_empty() {
        model.check_dim(descriptors.dim())?;
    }
    let tag = format!("{}{}", descriptors.method_tag(), model.tag_suffix());
    let mut out = DescriptorSet::new(tag, model.output_dim(), descriptors.vocab_fingerprint())?;
    let (dim, rank) = (model.dim, model.output_dim());
    let comps: Vec<f64> = model.components.iter().map(|&c| c as f64).collect();
    let scale: Vec<f64> = model
        .eigenvalues
        .iter()
        .map(|l| {
            if model.whiten {
                1.0 / (l + model.epsilon).sqrt()
            } else {
                1.0
            }
        })
        .collect();
    for (ids, block) in descriptors
        .ids()
        .chunks(PROJECT_BATCH)
        .zip(descriptors.as_flat().chunks(PROJECT_BATCH * dim.max(1)))
    {
        let centered: Vec<f64> = block
            .chunks_exact(dim)
            .flat_map(|v| v.iter().zip(&model.mean).map(|(&x, m)| x as f64 - m))
            .collect();
        let coords = gemm(ids.len(), dim, rank, &centered, (dim, 1), &comps, (1, dim));
        for (id, c) in ids.iter().zip(coords.chunks_exact(rank)) {
            let mut c: Vec<f64> = c.iter().zip(&scale).map(|(x, s)| x * s).collect();
            if renormalize {
                normalize_f64(&mut c);
            }
            out.push(id.clone(), &to_f32(&c))?;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterRow {
    pub image_id: String,
    pub label: String,
    pub x: f64,
    pub y: f64,
}

/// First two PCA coordinates per image, ordered by (label, image_id).
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterTable {
    pub rows: Vec<ScatterRow>,
}

impl ScatterTable {
    pub const HEADER: &'static str = "image_id\tlabel\tpc1\tpc2";

    pub fn to_tsv(&self) -> String {
        let mut out = String::from(Self::HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{}\t{}\t{}\t{}\n", r.image_id, r.label, r.x, r.y));
        }
        out
    }
}

/// Projects labelled descriptor sets onto the first two components.
pub fn export_domain_scatter(model: &PcaModel, sets: &[(&str, &DescriptorSet)]) -> Result<ScatterTable> {
    if sets.is_empty() {
        return Err(Error::Config("scatter export needs at least one descriptor set".into()));
    }
    if model.output_dim() < 2 {
        return Err(Error::Config(format!(
            "scatter export needs a PCA model with >= 2 components, got {}",
            model.output_dim()
        )));
    }
    let mut rows = Vec::new();
    for (label, set) in sets {
        for (id, v) in set.iter() {
            let c = model.transform(v)?;
            rows.push(ScatterRow {
                image_id: id.to_string(),
                label: label.to_string(),
                x: c[0],
                y: c[1],
            });
        }
    }
    rows.sort_by(|a, b| (&a.label, &a.image_id).cmp(&(&b.label, &b.image_id)));
    Ok(ScatterTable { rows })
}
