use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::feature_store::{read_feature_map, write_feature_map, DatasetManifest, FeatureMap, FEATURE_EXTENSION};

/// File name of the manifest inside a dataset directory.
pub const MANIFEST_FILE: &str = "manifest.toml";

/// Anything that can produce the feature map for an image id.
pub trait FeatureSource: Sync {
    fn load(&self, image_id: &str) -> Result<FeatureMap>;
}

impl<T: FeatureSource + ?Sized> FeatureSource for &T {
    fn load(&self, image_id: &str) -> Result<FeatureMap> {
        (**self).load(image_id)
    }
}

/// A directory of `<image_id>.anyf` files.
#[derive(Debug, Clone)]
pub struct FeatureDir {
    root: PathBuf,
}

impl FeatureDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        FeatureDir { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, image_id: &str) -> PathBuf {
        self.root.join(format!("{image_id}.{FEATURE_EXTENSION}"))
    }

    /// Writes `map` as `<root>/<image_id>.anyf`, creating the directory if needed.
    pub fn store(&self, map: &FeatureMap) -> Result<()> {
        std::fs::create_dir_all(&self.root).map_err(|e| Error::io_at(&self.root, e))?;
        let path = self.path_for(map.image_id());
        let f = File::create(&path).map_err(|e| Error::io_at(&path, e))?;
        write_feature_map(map, BufWriter::new(f))
    }
}

impl FeatureSource for FeatureDir {
    fn load(&self, image_id: &str) -> Result<FeatureMap> {
        let path = self.path_for(image_id);
        let f = File::open(&path).map_err(|e| Error::io_at(&path, e))?;
        read_feature_map(BufReader::new(f), image_id)
    }
}

/// Feature maps held in memory, keyed by image id.
#[derive(Debug, Clone, Default)]
pub struct InMemoryFeatures {
    maps: HashMap<String, FeatureMap>,
}

impl InMemoryFeatures {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, map: FeatureMap) {
        self.maps.insert(map.image_id().to_string(), map);
    }

    pub fn get(&self, image_id: &str) -> Option<&FeatureMap> {
        self.maps.get(image_id)
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }
}

impl FromIterator<FeatureMap> for InMemoryFeatures {
    fn from_iter<I: IntoIterator<Item = FeatureMap>>(iter: I) -> Self {
        let mut out = InMemoryFeatures::new();
        iter.into_iter().for_each(|m| out.insert(m));
        out
    }
}

impl FeatureSource for InMemoryFeatures {
    fn load(&self, image_id: &str) -> Result<FeatureMap> {
        self.maps.get(image_id).cloned().ok_or_else(|| {
            Error::io_at(
                format!("<memory>/{image_id}"),
                std::io::Error::new(std::io::ErrorKind::NotFound, "no such feature map"),
            )
        })
    }
}

/// A dataset directory: `manifest.toml` next to one `.anyf` file per entry.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub features: FeatureDir,
}

impl Dataset {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest = DatasetManifest::load_path(dir.join(MANIFEST_FILE))?;
        Ok(Dataset {
            manifest,
            features: FeatureDir::new(dir),
        })
    }

    /// Writes the manifest and every map into `dir`.
    pub fn create(
        dir: impl AsRef<Path>,
        manifest: &DatasetManifest,
        maps: impl IntoIterator<Item = FeatureMap>,
    ) -> Result<Self> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io_at(dir, e))?;
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, manifest.to_toml_string()).map_err(|e| Error::io_at(&path, e))?;
        let features = FeatureDir::new(dir);
        for m in maps {
            features.store(&m)?;
        }
        Ok(Dataset {
            manifest: manifest.clone(),
            features,
        })
    }
}
