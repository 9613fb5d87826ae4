use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, RwLock};

use crate::error::{Error, Result};
use crate::feature_store::Fingerprint;

/// Environment variable naming a persistent descriptor cache directory.
pub const CACHE_DIR_ENV: &str = "ANYLOC_CACHE_DIR";

/// Per-image descriptors keyed by method tag, vocabulary and feature content.
///
/// Always keeps an in-memory layer; optionally mirrors entries to a directory
/// so repeated CLI runs skip aggregation.
#[derive(Debug, Default)]
pub struct DescriptorCache {
    mem: RwLock<HashMap<String, Arc<Vec<f32>>>>,
    dir: Option<PathBuf>,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

pub fn cache_key(method_tag: &str, vocab: Option<Fingerprint>, content: Fingerprint) -> String {
    let vocab = vocab.map(|f| f.to_hex()).unwrap_or_else(|| "none".into());
    format!("{method_tag}_{vocab}_{}", content.to_hex())
}

impl DescriptorCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn with_dir(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io_at(&dir, e))?;
        Ok(DescriptorCache {
            dir: Some(dir),
            ..Self::default()
        })
    }

    /// Uses `$ANYLOC_CACHE_DIR` when set, memory only otherwise.
    pub fn from_env() -> Result<Self> {
        match std::env::var_os(CACHE_DIR_ENV) {
            Some(d) if !d.is_empty() => Self::with_dir(PathBuf::from(d)),
            _ => Ok(Self::in_memory()),
        }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }

    fn file_for(&self, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{key}.f32")))
    }

    pub fn get(&self, key: &str) -> Option<Arc<Vec<f32>>> {
        if let Some(v) = self.mem.read().unwrap().get(key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Some(v.clone());
        }
        let from_disk = self.file_for(key).and_then(|p| match std::fs::read(&p) {
            Ok(bytes) if bytes.len() % 4 == 0 && !bytes.is_empty() => Some(Arc::new(
                bytes
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect::<Vec<_>>(),
            )),
            Ok(_) => {
                log::warn!("ignoring corrupt cache entry {}", p.display());
                None
            }
            Err(_) => None,
        });
        match from_disk {
            Some(v) => {
                self.hits.fetch_add(1, Ordering::Relaxed);
                self.mem.write().unwrap().insert(key.to_string(), v.clone());
                Some(v)
            }
            None => {
                self.misses.fetch_add(1, Ordering::Relaxed);
                None
            }
        }
    }

    pub fn put(&self, key: &str, values: Vec<f32>) -> Result<Arc<Vec<f32>>> {
        let values = Arc::new(values);
        if let Some(path) = self.file_for(key) {
            let bytes: Vec<u8> = values.iter().flat_map(|x| x.to_le_bytes()).collect();
            // write-then-rename so concurrent readers never see a partial file
            let tmp = path.with_extension(format!("tmp{}", std::process::id()));
            std::fs::write(&tmp, bytes).map_err(|e| Error::io_at(&tmp, e))?;
            std::fs::rename(&tmp, &path).map_err(|e| Error::io_at(&path, e))?;
        }
        self.mem.write().unwrap().insert(key.to_string(), values.clone());
        Ok(values)
    }

    pub fn len(&self) -> usize {
        self.mem.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
