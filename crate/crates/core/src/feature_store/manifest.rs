//! Dataset manifests: ordered database/query entries plus ground truth.
//!
//! Manifests are TOML documents:
//!
//! ```toml
//! version = 1
//! name = "gardens-point"
//! gt_mode = "frame"          # "metric" | "frame" | "explicit"
//! radius = 2                 # meters (metric) or frames (frame); optional for explicit
//!
//! [[entries]]
//! image_id = "db_0000"
//! role = "database"          # "database" | "query"
//! frame_index = 0            # required in frame mode
//! position = [0.0, 0.0]      # [x, y] meters, required in metric mode
//!
//! [explicit_positives]       # explicit mode only: query id -> database ids
//! q_0000 = ["db_0000"]
//! ```
//!
//! Entry order is significant: it is the database tie-break order during
//! ranking, and frame indices are expected to follow it.

use std::collections::{BTreeMap, HashMap};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MANIFEST_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Database,
    Query,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GtMode {
    /// Positives lie within `radius` meters (Euclidean, x/y).
    Metric,
    /// Positives have `|frame_index - query frame_index| <= radius`.
    Frame,
    /// Positives are listed per query.
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image_id: String,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_index: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<[f64; 2]>,
}

impl ManifestEntry {
    pub fn database(image_id: impl Into<String>) -> Self {
        ManifestEntry {
            image_id: image_id.into(),
            role: Role::Database,
            frame_index: None,
            position: None,
        }
    }

    pub fn query(image_id: impl Into<String>) -> Self {
        ManifestEntry {
            role: Role::Query,
            ..Self::database(image_id)
        }
    }

    pub fn with_frame(mut self, frame_index: u64) -> Self {
        self.frame_index = Some(frame_index);
        self
    }

    pub fn with_position(mut self, x: f64, y: f64) -> Self {
        self.position = Some([x, y]);
        self
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
enum Number {
    Int(i64),
    Float(f64),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    version: u32,
    name: String,
    gt_mode: GtMode,
    radius: Option<Number>,
    #[serde(default)]
    entries: Vec<ManifestEntry>,
    #[serde(default)]
    explicit_positives: Option<BTreeMap<String, Vec<String>>>,
}

#[derive(Serialize)]
struct RawManifestOut<'a> {
    version: u32,
    name: &'a str,
    gt_mode: GtMode,
    radius: f64,
    entries: &'a [ManifestEntry],
    #[serde(skip_serializing_if = "Option::is_none")]
    explicit_positives: Option<&'a BTreeMap<String, Vec<String>>>,
}

/// A validated dataset description. Immutable after construction.
#[derive(Debug, Clone)]
pub struct DatasetManifest {
    name: String,
    gt_mode: GtMode,
    radius: f64,
    entries: Vec<ManifestEntry>,
    explicit_positives: BTreeMap<String, Vec<String>>,
    index: HashMap<String, usize>,
}

impl PartialEq for DatasetManifest {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.gt_mode == other.gt_mode
            && self.radius == other.radius
            && self.entries == other.entries
            && self.explicit_positives == other.explicit_positives
    }
}

fn invalid(name: &str, msg: impl std::fmt::Display) -> Error {
    Error::Validation(format!("manifest '{name}': {msg}"))
}

impl DatasetManifest {
    /// Builds and validates a manifest. `explicit_positives` is only consulted in explicit mode.
    pub fn new(
        name: impl Into<String>,
        gt_mode: GtMode,
        radius: f64,
        entries: Vec<ManifestEntry>,
        explicit_positives: BTreeMap<String, Vec<String>>,
    ) -> Result<Self> {
        let name = name.into();
        if !(radius.is_finite() && radius > 0.0) {
            return Err(invalid(&name, format!("radius must be > 0, got {radius}")));
        }

        let mut index = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            check_image_id(&name, &e.image_id)?;
            if index.insert(e.image_id.clone(), i).is_some() {
                return Err(invalid(&name, format!("duplicate image_id '{}'", e.image_id)));
            }
            match gt_mode {
                GtMode::Metric => match e.position {
                    None => {
                        return Err(invalid(
                            &name,
                            format!("metric mode: entry '{}' has no position", e.image_id),
                        ))
                    }
                    Some(p) if !p.iter().all(|c| c.is_finite()) => {
                        return Err(invalid(
                            &name,
                            format!("entry '{}' has a non-finite position", e.image_id),
                        ))
                    }
                    _ => {}
                },
                GtMode::Frame if e.frame_index.is_none() => {
                    return Err(invalid(
                        &name,
                        format!("frame mode: entry '{}' has no frame_index", e.image_id),
                    ))
                }
                _ => {}
            }
        }
        if !entries.iter().any(|e| e.role == Role::Database) {
            return Err(invalid(&name, "no database entries"));
        }
        if !entries.iter().any(|e| e.role == Role::Query) {
            return Err(invalid(&name, "no query entries"));
        }

        let explicit_positives = if gt_mode == GtMode::Explicit {
            for e in entries.iter().filter(|e| e.role == Role::Query) {
                if !explicit_positives.contains_key(&e.image_id) {
                    return Err(invalid(
                        &name,
                        format!("explicit mode: query '{}' missing from explicit_positives", e.image_id),
                    ));
                }
            }
            for (q, dbs) in &explicit_positives {
                match index.get(q).map(|&i| entries[i].role) {
                    Some(Role::Query) => {}
                    Some(Role::Database) => {
                        return Err(invalid(
                            &name,
                            format!("explicit_positives key '{q}' is a database entry"),
                        ))
                    }
                    None => return Err(invalid(&name, format!("explicit_positives key '{q}' is unknown"))),
                }
                for db in dbs {
                    match index.get(db).map(|&i| entries[i].role) {
                        Some(Role::Database) => {}
                        _ => {
                            return Err(invalid(
                                &name,
                                format!("positive '{db}' of query '{q}' is not a known database entry"),
                            ))
                        }
                    }
                }
            }
            explicit_positives
        } else {
            BTreeMap::new()
        };

        Ok(DatasetManifest {
            name,
            gt_mode,
            radius,
            entries,
            explicit_positives,
            index,
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawManifest = toml::from_str(text).map_err(|e| Error::Validation(format!("manifest schema: {e}")))?;
        if raw.version != MANIFEST_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported manifest version {} (expected {MANIFEST_FORMAT_VERSION})",
                raw.version
            )));
        }
        let radius = match (raw.radius, raw.gt_mode) {
            (Some(Number::Int(r)), _) => r as f64,
            (Some(Number::Float(r)), _) => r,
            (None, GtMode::Explicit) => 1.0,
            (None, mode) => return Err(invalid(&raw.name, format!("radius is required in {mode:?} mode"))),
        };
        if raw.gt_mode != GtMode::Explicit && raw.explicit_positives.is_some() {
            return Err(invalid(
                &raw.name,
                "explicit_positives given but gt_mode is not \"explicit\"",
            ));
        }
        Self::new(
            raw.name,
            raw.gt_mode,
            radius,
            raw.entries,
            raw.explicit_positives.unwrap_or_default(),
        )
    }

    pub fn to_toml_string(&self) -> String {
        let out = RawManifestOut {
            version: MANIFEST_FORMAT_VERSION,
            name: &self.name,
            gt_mode: self.gt_mode,
            radius: self.radius,
            entries: &self.entries,
            explicit_positives: (self.gt_mode == GtMode::Explicit).then_some(&self.explicit_positives),
        };
        toml::to_string(&out).expect("manifest serialization cannot fail")
    }

    pub fn load_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io_at(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn gt_mode(&self) -> GtMode {
        self.gt_mode
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn explicit_positives(&self) -> &BTreeMap<String, Vec<String>> {
        &self.explicit_positives
    }

    pub fn entry(&self, image_id: &str) -> Option<&ManifestEntry> {
        self.index.get(image_id).map(|&i| &self.entries[i])
    }

    /// Position of `image_id` in file order.
    pub fn position_of(&self, image_id: &str) -> Option<usize> {
        self.index.get(image_id).copied()
    }

    pub fn database(&self) -> impl Iterator<Item = &ManifestEntry> + '_ {
        self.entries.iter().filter(|e| e.role == Role::Database)
    }

    pub fn queries(&self) -> impl Iterator<Item = &ManifestEntry> + '_ {
        self.entries.iter().filter(|e| e.role == Role::Query)
    }

    pub fn database_ids(&self) -> Vec<&str> {
        self.database().map(|e| e.image_id.as_str()).collect()
    }

    pub fn query_ids(&self) -> Vec<&str> {
        self.queries().map(|e| e.image_id.as_str()).collect()
    }

    /// Whether `db` is a true match for `query` under this manifest's ground truth.
    /// Unknown ids and wrong roles are never positives.
    pub fn is_positive(&self, query: &str, db: &str) -> bool {
        let (Some(q), Some(d)) = (self.entry(query), self.entry(db)) else {
            return false;
        };
        if q.role != Role::Query || d.role != Role::Database {
            return false;
        }
        match self.gt_mode {
            GtMode::Metric => match (q.position, d.position) {
                (Some([qx, qy]), Some([dx, dy])) => ((qx - dx).powi(2) + (qy - dy).powi(2)).sqrt() <= self.radius,
                _ => false,
            },
            GtMode::Frame => match (q.frame_index, d.frame_index) {
                (Some(a), Some(b)) => a.abs_diff(b) as f64 <= self.radius,
                _ => false,
            },
            GtMode::Explicit => self
                .explicit_positives
                .get(query)
                .is_some_and(|dbs| dbs.iter().any(|x| x == db)),
        }
    }

    /// Database ids that are positives for `query`, in manifest order.
    pub fn positives(&self, query: &str) -> Vec<&str> {
        self.database()
            .filter(|d| self.is_positive(query, &d.image_id))
            .map(|d| d.image_id.as_str())
            .collect()
    }
}

fn check_image_id(manifest: &str, id: &str) -> Result<()> {
    if id.is_empty() || id == "." || id == ".." || id.contains(['/', '\\', '\0']) {
        return Err(invalid(
            manifest,
            format!("image_id {id:?} is not usable as a file name"),
        ));
    }
    Ok(())
}

/// Reads and validates a manifest from any UTF-8 byte source.
pub fn load_manifest<R: Read>(mut source: R) -> Result<DatasetManifest> {
    let mut text = String::new();
    source.read_to_string(&mut text).map_err(|e| match e.kind() {
        std::io::ErrorKind::InvalidData => Error::Validation("manifest is not UTF-8".into()),
        _ => Error::Io(e),
    })?;
    DatasetManifest::from_toml_str(&text)
}
