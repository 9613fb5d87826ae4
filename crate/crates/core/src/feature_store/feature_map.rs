//! `.anyf` dense feature maps.
//!
//! ```text
//! offset  size  field
//! 0       8     magic  b"ANYLFEAT"
//! 8       4     format version (u32 LE, currently 1)
//! 12      4     height (u32 LE)
//! 16      4     width  (u32 LE)
//! 20      4     dim    (u32 LE)
//! 24      4*n   n = height*width*dim f32 LE, row-major (row, col, channel)
//! ```

use std::io::{Read, Write};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::feature_store::Fingerprint;

pub const FEATURE_MAGIC: [u8; 8] = *b"ANYLFEAT";
pub const FEATURE_FORMAT_VERSION: u32 = 1;
pub const FEATURE_HEADER_LEN: usize = 8 + 4 * 4;
/// File extension used inside a dataset directory.
pub const FEATURE_EXTENSION: &str = "anyf";

/// Dense `height x width` grid of `dim`-dimensional per-pixel features for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    image_id: String,
    height: usize,
    width: usize,
    dim: usize,
    data: Vec<f32>,
}

impl FeatureMap {
    /// Builds a map after checking shape and finiteness.
    pub fn new(image_id: impl Into<String>, height: usize, width: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        let map = FeatureMap {
            image_id: image_id.into(),
            height,
            width,
            dim,
            data,
        };
        map.validate()?;
        Ok(map)
    }

    /// Re-checks every invariant. Called by the writer as well as the constructor.
    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 || self.dim == 0 {
            return Err(Error::Validation(format!(
                "feature map '{}': height, width and dim must be >= 1 (got {}x{}x{})",
                self.image_id, self.height, self.width, self.dim
            )));
        }
        for (name, v) in [("height", self.height), ("width", self.width), ("dim", self.dim)] {
            if u32::try_from(v).is_err() {
                return Err(Error::Validation(format!(
                    "feature map '{}': {name} {v} does not fit in u32",
                    self.image_id
                )));
            }
        }
        let expected = self
            .height
            .checked_mul(self.width)
            .and_then(|hw| hw.checked_mul(self.dim))
            .ok_or_else(|| Error::Validation(format!("feature map '{}': element count overflows", self.image_id)))?;
        if self.data.len() != expected {
            return Err(Error::Validation(format!(
                "feature map '{}': data length {} != height*width*dim = {}",
                self.image_id,
                self.data.len(),
                expected
            )));
        }
        if let Some(pos) = self.data.iter().position(|x| !x.is_finite()) {
            return Err(Error::Validation(format!(
                "feature map '{}': element {pos} is not finite ({})",
                self.image_id, self.data[pos]
            )));
        }
        Ok(())
    }

    pub fn image_id(&self) -> &str {
        &self.image_id
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Feature vector of the pixel at `index` (row-major).
    pub fn pixel(&self, index: usize) -> &[f32] {
        &self.data[index * self.dim..(index + 1) * self.dim]
    }

    pub fn pixel_at(&self, row: usize, col: usize) -> &[f32] {
        self.pixel(row * self.width + col)
    }

    /// Iterates over per-pixel feature vectors in row-major order.
    pub fn pixels(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.dim)
    }

    pub fn with_image_id(mut self, image_id: impl Into<String>) -> Self {
        self.image_id = image_id.into();
        self
    }

    /// SHA-256 of the serialized `.anyf` bytes. The image id is not part of it.
    pub fn content_hash(&self) -> Fingerprint {
        let mut hasher = Sha256::new();
        hasher.update(header_bytes(self));
        for x in &self.data {
            hasher.update(x.to_le_bytes());
        }
        Fingerprint(hasher.finalize().into())
    }
}

fn header_bytes(map: &FeatureMap) -> [u8; FEATURE_HEADER_LEN] {
    let mut header = [0u8; FEATURE_HEADER_LEN];
    header[..8].copy_from_slice(&FEATURE_MAGIC);
    header[8..12].copy_from_slice(&FEATURE_FORMAT_VERSION.to_le_bytes());
    header[12..16].copy_from_slice(&(map.height as u32).to_le_bytes());
    header[16..20].copy_from_slice(&(map.width as u32).to_le_bytes());
    header[20..24].copy_from_slice(&(map.dim as u32).to_le_bytes());
    header
}

/// Serializes `map` in the `.anyf` layout.
pub fn write_feature_map<W: Write>(map: &FeatureMap, mut destination: W) -> Result<()> {
    map.validate()?;
    let mut buf = Vec::with_capacity(FEATURE_HEADER_LEN + map.data.len() * 4);
    buf.extend_from_slice(&header_bytes(map));
    for x in &map.data {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    destination.write_all(&buf)?;
    destination.flush()?;
    Ok(())
}

/// Parses one `.anyf` stream. The format carries no id, so the caller names the map.
pub fn read_feature_map<R: Read>(mut source: R, image_id: impl Into<String>) -> Result<FeatureMap> {
    let image_id = image_id.into();
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;

    if bytes.len() < 8 || bytes[..8] != FEATURE_MAGIC {
        let shown = String::from_utf8_lossy(&bytes[..bytes.len().min(8)]).into_owned();
        return Err(Error::Format(format!(
            "'{image_id}': bad magic {shown:?}, expected \"ANYLFEAT\""
        )));
    }
    if bytes.len() < FEATURE_HEADER_LEN {
        return Err(Error::Length {
            expected: FEATURE_HEADER_LEN as u64,
            actual: bytes.len() as u64,
        });
    }
    let field = |i: usize| u32::from_le_bytes(bytes[8 + 4 * i..12 + 4 * i].try_into().unwrap());
    let version = field(0);
    if version != FEATURE_FORMAT_VERSION {
        return Err(Error::Format(format!(
            "'{image_id}': unsupported feature format version {version}"
        )));
    }
    let (height, width, dim) = (field(1) as u64, field(2) as u64, field(3) as u64);
    let expected = FEATURE_HEADER_LEN as u64 + height * width * dim * 4;
    if bytes.len() as u64 != expected {
        return Err(Error::Length {
            expected,
            actual: bytes.len() as u64,
        });
    }
    let data = bytes[FEATURE_HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    FeatureMap::new(image_id, height as usize, width as usize, dim as usize, data)
}
