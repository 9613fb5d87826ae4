//! The [`Vocabulary`] type and its binary file.
//!
//! ```text
//! magic        8   b"ANYLVOCB"
//! version      4   u32 LE (= 1)
//! k            4   u32 LE
//! dim          4   u32 LE
//! seed         8   i64 LE
//! centers      k*dim f32 LE, row-major
//! fingerprint  32  SHA-256 of the centers bytes
//! ```
//!
//! The dataset list (`sources`) is not stored in the file.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::feature_store::{Cursor, Fingerprint};
use crate::linalg::squared_distance;

pub const VOCAB_MAGIC: [u8; 8] = *b"ANYLVOCB";
pub const VOCAB_FORMAT_VERSION: u32 = 1;

/// Which dataset contributed to a vocabulary and at what database stride.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabSource {
    pub dataset: String,
    pub stride: usize,
}

/// `k` cluster centers in feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    centers: Vec<f32>,
    k: usize,
    dim: usize,
    seed: i64,
    sources: Vec<VocabSource>,
    fingerprint: Fingerprint,
}

pub(crate) fn centers_fingerprint(centers: &[f32]) -> Fingerprint {
    let mut hasher = Sha256::new();
    for x in centers {
        hasher.update(x.to_le_bytes());
    }
    Fingerprint(hasher.finalize().into())
}

impl Vocabulary {
    pub fn new(centers: Vec<f32>, k: usize, dim: usize, seed: i64, sources: Vec<VocabSource>) -> Result<Self> {
        if k == 0 || dim == 0 {
            return Err(Error::Validation(format!(
                "vocabulary needs k >= 1 and dim >= 1 (got k={k}, dim={dim})"
            )));
        }
        if centers.len() != k * dim {
            return Err(Error::Validation(format!(
                "vocabulary centers have {} values, expected k*dim = {}",
                centers.len(),
                k * dim
            )));
        }
        if centers.iter().any(|x| !x.is_finite()) {
            return Err(Error::Validation("vocabulary centers must be finite".into()));
        }
        let fingerprint = centers_fingerprint(&centers);
        Ok(Vocabulary {
            centers,
            k,
            dim,
            seed,
            sources,
            fingerprint,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> i64 {
        self.seed
    }

    pub fn sources(&self) -> &[VocabSource] {
        &self.sources
    }

    pub fn fingerprint(&self) -> Fingerprint {
        self.fingerprint
    }

    pub fn centers(&self) -> &[f32] {
        &self.centers
    }

    pub fn center(&self, i: usize) -> &[f32] {
        &self.centers[i * self.dim..(i + 1) * self.dim]
    }

    /// Index of the center closest to `feature` by squared Euclidean distance.
    /// Ties go to the lowest index. This is the single assignment rule shared by
    /// hard VLAD and the cluster visualisations.
    pub fn nearest(&self, feature: &[f32]) -> usize {
        debug_assert_eq!(feature.len(), self.dim);
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, c) in self.centers.chunks_exact(self.dim).enumerate() {
            let d = squared_distance(feature, c);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let mut buf = Vec::with_capacity(64 + self.centers.len() * 4);
        buf.extend_from_slice(&VOCAB_MAGIC);
        buf.extend_from_slice(&VOCAB_FORMAT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.k as u32).to_le_bytes());
        buf.extend_from_slice(&(self.dim as u32).to_le_bytes());
        buf.extend_from_slice(&self.seed.to_le_bytes());
        for x in &self.centers {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        buf.extend_from_slice(&self.fingerprint.0);
        w.write_all(&buf)?;
        w.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let mut cur = Cursor::new(&bytes);
        if cur.take(8)? != VOCAB_MAGIC {
            return Err(Error::Format("bad magic, expected \"ANYLVOCB\"".into()));
        }
        let version = cur.u32()?;
        if version != VOCAB_FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported vocabulary version {version}")));
        }
        let k = cur.u32()? as usize;
        let dim = cur.u32()? as usize;
        let seed = cur.i64()?;
        let expected = cur.pos as u64 + (k as u64 * dim as u64 * 4) + 32;
        if bytes.len() as u64 != expected {
            return Err(Error::Length {
                expected,
                actual: bytes.len() as u64,
            });
        }
        let centers = cur
            .take(k * dim * 4)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let stored = Fingerprint(cur.take(32)?.try_into().unwrap());
        let vocab = Vocabulary::new(centers, k, dim, seed, Vec::new())?;
        if vocab.fingerprint != stored {
            return Err(Error::Format(format!(
                "vocabulary fingerprint mismatch: file says {stored}, centers hash to {}",
                vocab.fingerprint
            )));
        }
        Ok(vocab)
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

    pub fn with_sources(mut self, sources: Vec<VocabSource>) -> Self {
        self.sources = sources;
        self
    }
}
