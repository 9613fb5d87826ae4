//! Sets of global descriptors and their on-disk form.
//!
//! ```text
//! magic        8   b"ANYLDESC"
//! version      4   u32 LE (= 1)
//! dim          4   u32 LE
//! count        8   u64 LE
//! tag_len      4   u32 LE, then tag_len bytes of UTF-8 method tag
//! has_vocab    1   0 or 1, then 32 fingerprint bytes if 1
//! index        count x (u32 LE id_len, id bytes), in set order
//! vectors      count x dim f32 LE, in index order
//! ```

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const DESCRIPTOR_MAGIC: [u8; 8] = *b"ANYLDESC";
pub const DESCRIPTOR_FORMAT_VERSION: u32 = 1;

/// SHA-256 content hash, used to tie descriptors to the vocabulary and
/// features they came from.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fingerprint(pub [u8; 32]);

impl Fingerprint {
    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        if s.len() != 64 || !s.is_ascii() {
            return Err(Error::Format(format!("fingerprint must be 64 hex chars, got {s:?}")));
        }
        let mut out = [0u8; 32];
        for (i, byte) in out.iter_mut().enumerate() {
            *byte = u8::from_str_radix(&s[2 * i..2 * i + 2], 16)
                .map_err(|_| Error::Format(format!("bad hex in fingerprint {s:?}")))?;
        }
        Ok(Fingerprint(out))
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fingerprint({})", &self.to_hex()[..12])
    }
}

/// One descriptor vector per image, all of the same length, in insertion order.
#[derive(Debug, Clone)]
pub struct DescriptorSet {
    method_tag: String,
    dim: usize,
    vocab_fingerprint: Option<Fingerprint>,
    ids: Vec<String>,
    data: Vec<f32>,
    index: HashMap<String, usize>,
}

impl PartialEq for DescriptorSet {
    fn eq(&self, other: &Self) -> bool {
        self.method_tag == other.method_tag
            && self.dim == other.dim
            && self.vocab_fingerprint == other.vocab_fingerprint
            && self.ids == other.ids
            && self.data == other.data
    }
}

/// VLAD descriptors are meaningless without the vocabulary they were built against.
pub(crate) fn is_vlad_tag(tag: &str) -> bool {
    tag.starts_with("vlad")
}

impl DescriptorSet {
    /// An empty set. `dim` may be 0 only while the set is empty and the
    /// dimension is not known yet.
    pub fn new(method_tag: impl Into<String>, dim: usize, vocab_fingerprint: Option<Fingerprint>) -> Result<Self> {
        let method_tag = method_tag.into();
        if is_vlad_tag(&method_tag) && vocab_fingerprint.is_none() {
            return Err(Error::Validation(format!(
                "descriptor set '{method_tag}': VLAD descriptors require a vocabulary fingerprint"
            )));
        }
        Ok(DescriptorSet {
            method_tag,
            dim,
            vocab_fingerprint,
            ids: Vec::new(),
            data: Vec::new(),
            index: HashMap::new(),
        })
    }

    /// Appends one descriptor. Fails on length mismatch, non-finite values or a repeated id.
    pub fn push(&mut self, image_id: impl Into<String>, vector: &[f32]) -> Result<()> {
        let image_id = image_id.into();
        if self.ids.is_empty() && self.dim == 0 {
            if vector.is_empty() {
                return Err(Error::Validation(format!("descriptor for '{image_id}' is empty")));
            }
            self.dim = vector.len();
        }
        if vector.len() != self.dim {
            return Err(Error::Config(format!(
                "descriptor for '{image_id}' has dim {} but the set has dim {}",
                vector.len(),
                self.dim
            )));
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::Validation(format!(
                "descriptor for '{image_id}' contains non-finite values"
            )));
        }
        if self.index.contains_key(&image_id) {
            return Err(Error::Validation(format!("duplicate descriptor id '{image_id}'")));
        }
        self.index.insert(image_id.clone(), self.ids.len());
        self.ids.push(image_id);
        self.data.extend_from_slice(vector);
        Ok(())
    }

    pub fn method_tag(&self) -> &str {
        &self.method_tag
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab_fingerprint(&self) -> Option<Fingerprint> {
        self.vocab_fingerprint
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn vector(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn get(&self, image_id: &str) -> Option<&[f32]> {
        self.index.get(image_id).map(|&i| self.vector(i))
    }

    pub fn contains(&self, image_id: &str) -> bool {
        self.index.contains_key(image_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> + '_ {
        self.ids.iter().map(String::as_str).zip(self.vectors())
    }

    pub fn vectors(&self) -> std::slice::ChunksExact<'_, f32> {
        // chunks_exact panics on 0; an empty set with unknown dim has no data anyway
        self.data.chunks_exact(self.dim.max(1))
    }

    /// Flat row-major storage, `len() * dim()` values.
    pub fn as_flat(&self) -> &[f32] {
        &self.data
    }

    /// A new set holding only `ids`, in the given order.
    pub fn subset<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut out = DescriptorSet::new(self.method_tag.clone(), self.dim, self.vocab_fingerprint)?;
        for id in ids {
            let v = self
                .get(id)
                .ok_or_else(|| Error::Validation(format!("descriptor set has no entry for '{id}'")))?;
            out.push(id, v)?;
        }
        Ok(out)
    }

    pub fn with_method_tag(mut self, tag: impl Into<String>) -> Self {
        self.method_tag = tag.into();
        self
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let mut buf = Vec::with_capacity(64 + self.data.len() * 4);
        buf.extend_from_slice(&DESCRIPTOR_MAGIC);
        buf.extend_from_slice(&DESCRIPTOR_FORMAT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.dim as u32).to_le_bytes());
        buf.extend_from_slice(&(self.ids.len() as u64).to_le_bytes());
        buf.extend_from_slice(&(self.method_tag.len() as u32).to_le_bytes());
        buf.extend_from_slice(self.method_tag.as_bytes());
        match self.vocab_fingerprint {
            Some(fp) => {
                buf.push(1);
                buf.extend_from_slice(&fp.0);
            }
            None => buf.push(0),
        }
        for id in &self.ids {
            buf.extend_from_slice(&(id.len() as u32).to_le_bytes());
            buf.extend_from_slice(id.as_bytes());
        }
        for x in &self.data {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        w.write_all(&buf)?;
        w.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let mut cur = Cursor::new(&bytes);
        if cur.take(8)? != DESCRIPTOR_MAGIC {
            return Err(Error::Format("bad magic, expected \"ANYLDESC\"".into()));
        }
        let version = cur.u32()?;
        if version != DESCRIPTOR_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported descriptor format version {version}"
            )));
        }
        let dim = cur.u32()? as usize;
        let count = cur.u64()? as usize;
        let tag_len = cur.u32()? as usize;
        let tag = std::str::from_utf8(cur.take(tag_len)?)
            .map_err(|_| Error::Format("method tag is not UTF-8".into()))?
            .to_string();
        let fingerprint = match cur.take(1)?[0] {
            0 => None,
            1 => Some(Fingerprint(cur.take(32)?.try_into().unwrap())),
            other => return Err(Error::Format(format!("bad vocabulary flag {other}"))),
        };
        let mut ids = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            let n = cur.u32()? as usize;
            let id = std::str::from_utf8(cur.take(n)?).map_err(|_| Error::Format("image id is not UTF-8".into()))?;
            ids.push(id.to_string());
        }
        let payload = (count as u64) * (dim as u64) * 4;
        let remaining = (bytes.len() - cur.pos) as u64;
        if remaining != payload {
            return Err(Error::Length {
                expected: cur.pos as u64 + payload,
                actual: bytes.len() as u64,
            });
        }
        let mut set = DescriptorSet::new(tag, dim, fingerprint)?;
        let floats: Vec<f32> = bytes[cur.pos..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        for (i, id) in ids.into_iter().enumerate() {
            set.push(id, &floats[i * dim..(i + 1) * dim])?;
        }
        Ok(set)
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

/// Bounds-checked little-endian reader over an in-memory buffer.
pub(crate) struct Cursor<'a> {
    bytes: &'a [u8],
    pub(crate) pos: usize,
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Cursor { bytes, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or(Error::Length {
                expected: (self.pos + n) as u64,
                actual: self.bytes.len() as u64,
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}
