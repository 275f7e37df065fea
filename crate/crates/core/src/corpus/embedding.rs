//! Embedding vectors and the `.ceb` binary store.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic      4 bytes   "CEB1"
//! version    u32       1
//! dimension  u32
//! count      u64
//! count x {
//!     id_len u16
//!     id     id_len bytes of UTF-8
//!     values dimension x f32
//! }
//! ```
//!
//! Entries are written in lexicographic (byte-wise) id order. Vectors are
//! stored exactly as the encoder produced them and normalized on load.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"CEB1";
pub const VERSION: u32 = 1;

const HEADER_LEN: usize = 4 + 4 + 4 + 8;

/// A text or image embedding.
///
/// `raw` keeps the on-disk f32 vector so a store can be rewritten
/// bit-for-bit; `values` is the unit-normalized f64 copy used for all
/// arithmetic.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    raw: Vec<f32>,
    values: Vec<f64>,
    norm: f64,
}

impl Embedding {
    /// Normalizes `raw` to unit L2 length. Fails on empty, non-finite or
    /// zero-norm input.
    pub fn new(raw: Vec<f32>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::Data("empty vector".into()));
        }
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite component".into()));
        }
        let norm = raw
            .iter()
            .map(|&v| f64::from(v) * f64::from(v))
            .sum::<f64>()
            .sqrt();
        if norm == 0.0 {
            return Err(Error::Data("zero norm".into()));
        }
        let values = raw.iter().map(|&v| f64::from(v) / norm).collect();
        Ok(Embedding { raw, values, norm })
    }

    pub fn from_f64(values: &[f64]) -> Result<Self> {
        Embedding::new(values.iter().map(|&v| v as f32).collect())
    }

    /// Unit-normalized components.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn raw(&self) -> &[f32] {
        &self.raw
    }

    /// L2 norm of the vector before normalization.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Id-keyed embeddings sharing a single dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dimension: usize,
    entries: BTreeMap<String, Embedding>,
}

impl EmbeddingStore {
    pub fn new(dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::Invariant(
                "embedding dimension must be positive".into(),
            ));
        }
        if u32::try_from(dimension).is_err() {
            return Err(Error::Format(format!("dimension {dimension} exceeds u32")));
        }
        Ok(EmbeddingStore {
            dimension,
            entries: BTreeMap::new(),
        })
    }

    pub fn insert(&mut self, id: impl Into<String>, embedding: Embedding) -> Result<()> {
        let id = id.into();
        if embedding.dim() != self.dimension {
            return Err(Error::Invariant(format!(
                "embedding {id:?} has dimension {}, store has {}",
                embedding.dim(),
                self.dimension
            )));
        }
        if self.entries.contains_key(&id) {
            return Err(Error::Invariant(format!("duplicate embedding id {id:?}")));
        }
        self.entries.insert(id, embedding);
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Embedding> {
        self.entries.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.contains_key(id)
    }

    /// Entries in lexicographic id order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Embedding)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        if self.entries.is_empty() {
            return Err(Error::InvalidInput(
                "refusing to write an empty embedding store".into(),
            ));
        }
        let per_entry_floats = self.dimension * 4;
        let mut buf = Vec::with_capacity(
            HEADER_LEN
                + self
                    .entries
                    .keys()
                    .map(|k| 2 + k.len() + per_entry_floats)
                    .sum::<usize>(),
        );
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.dimension as u32).to_le_bytes());
        buf.extend_from_slice(&(self.entries.len() as u64).to_le_bytes());
        for (id, emb) in &self.entries {
            let id_len = u16::try_from(id.len()).map_err(|_| {
                Error::Format(format!(
                    "id of {} bytes exceeds the 65535-byte limit",
                    id.len()
                ))
            })?;
            if emb.dim() != self.dimension {
                return Err(Error::Invariant(format!(
                    "embedding {id:?} has inconsistent dimension"
                )));
            }
            buf.extend_from_slice(&id_len.to_le_bytes());
            buf.extend_from_slice(id.as_bytes());
            for v in emb.raw() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        let magic = cur.take(4)?;
        if magic != MAGIC {
            return Err(Error::Format(format!(
                "bad magic {:?}",
                String::from_utf8_lossy(magic)
            )));
        }
        let version = cur.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let dimension = cur.u32()? as usize;
        if dimension == 0 {
            return Err(Error::Format("dimension is zero".into()));
        }
        let count = cur.u64()?;
        let mut store = EmbeddingStore::new(dimension)?;
        for _ in 0..count {
            let id_len = cur.u16()? as usize;
            let id = std::str::from_utf8(cur.take(id_len)?)
                .map_err(|e| Error::Format(format!("id is not UTF-8: {e}")))?
                .to_owned();
            let raw_bytes = cur.take(dimension * 4)?;
            let raw: Vec<f32> = raw_bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            if raw.iter().any(|v| v.is_nan()) {
                return Err(Error::Data(format!("NaN component: {id}")));
            }
            let emb = Embedding::new(raw).map_err(|e| match e {
                Error::Data(msg) => Error::Data(format!("{msg}: {id}")),
                other => other,
            })?;
            if store.contains(&id) {
                return Err(Error::Format(format!("duplicate id {id:?}")));
            }
            store.entries.insert(id, emb);
        }
        if cur.pos != bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after {count} declared entries",
                bytes.len() - cur.pos
            )));
        }
        Ok(store)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("truncated file at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        let b = self.take(8)?;
        Ok(u64::from_le_bytes(b.try_into().unwrap()))
    }
}

pub fn write_embedding_store(store: &EmbeddingStore, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = store.to_bytes()?;
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_embedding_store(path: impl AsRef<Path>) -> Result<EmbeddingStore> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    EmbeddingStore::from_bytes(&bytes)
}
