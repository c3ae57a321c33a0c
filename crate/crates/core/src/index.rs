//! Exact flat cosine-similarity index with a small binary file format.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "EYIX" | u32 version=1 | u32 dim | u64 count |
//!   count × ( u16 id_len | id bytes | u32 start | u32 end | dim × f32 )
//! ```
//!
//! Vectors are L2-normalised on insert so a search is a dot product.

use std::cmp::Ordering;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Chunk;

pub const MAGIC: &[u8; 4] = b"EYIX";
pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_DIM: usize = 384;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("{chunks} chunks but {vectors} vectors")]
    LengthMismatch { chunks: usize, vectors: usize },
    #[error("expected dimension {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("vector for `{0}` has zero norm")]
    ZeroVector(String),
    #[error("vector for `{0}` has a non-finite component")]
    NonFinite(String),
    #[error("duplicate chunk id `{0}`")]
    DuplicateId(String),
    #[error("k must be at least 1")]
    InvalidK,
    #[error("chunk id `{0}` is longer than 65535 bytes")]
    IdTooLong(String),
    #[error("chunk offset does not fit in 32 bits: {0}")]
    OffsetOverflow(usize),
    #[error("not an index file (bad magic bytes)")]
    BadMagic,
    #[error("unsupported index format version {0}")]
    VersionUnsupported(u32),
    #[error("index file is truncated")]
    TruncatedFile,
    #[error("index file has {0} unexpected trailing bytes")]
    TrailingBytes(usize),
    #[error("chunk id is not valid UTF-8")]
    InvalidId,
    #[error("I/O failure: {0}")]
    IoFailure(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(pub Vec<f32>);

impl EmbeddingVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }
}

impl From<Vec<f32>> for EmbeddingVector {
    fn from(v: Vec<f32>) -> Self {
        Self(v)
    }
}

/// Metadata kept per index entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkRef {
    pub id: String,
    pub start: u32,
    pub end: u32,
}

impl TryFrom<&Chunk> for ChunkRef {
    type Error = IndexError;

    fn try_from(c: &Chunk) -> Result<Self, IndexError> {
        let to_u32 = |v: usize| u32::try_from(v).map_err(|_| IndexError::OffsetOverflow(v));
        Ok(Self {
            id: c.id(),
            start: to_u32(c.start)?,
            end: to_u32(c.end)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub chunk_id: String,
    pub score: f64,
    /// 1-based.
    pub rank: usize,
    /// Insertion position in the index.
    pub ordinal: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    dim: usize,
    entries: Vec<ChunkRef>,
    /// Row-major f32 vectors exactly as written to disk.
    stored: Vec<f32>,
    /// `stored` renormalised in f64, used for scoring.
    vectors: Vec<f64>,
}

/// Unit-normalised copy of `v`, or `None` for a zero vector.
pub fn normalize(v: &[f64]) -> Option<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    (norm > 0.0).then(|| v.iter().map(|x| x / norm).collect())
}

impl VectorIndex {
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
            stored: Vec::new(),
            vectors: Vec::new(),
        }
    }

    // Scoring works from the f32 row so a loaded index scores exactly like the one that was saved.
    fn push_row(&mut self, row: &[f32]) {
        let wide: Vec<f64> = row.iter().map(|&x| f64::from(x)).collect();
        let unit = normalize(&wide).unwrap_or(wide);
        self.stored.extend_from_slice(row);
        self.vectors.extend(unit);
    }

    pub fn build(dim: usize, chunks: Vec<ChunkRef>, vectors: &[EmbeddingVector]) -> Result<Self, IndexError> {
        if chunks.len() != vectors.len() {
            return Err(IndexError::LengthMismatch {
                chunks: chunks.len(),
                vectors: vectors.len(),
            });
        }
        let mut index = Self::empty(dim);
        index.entries.reserve(chunks.len());
        index.stored.reserve(chunks.len() * dim);
        index.vectors.reserve(chunks.len() * dim);
        let mut seen = std::collections::HashSet::new();
        for (chunk, v) in chunks.into_iter().zip(vectors) {
            if v.dim() != dim {
                return Err(IndexError::DimensionMismatch {
                    expected: dim,
                    actual: v.dim(),
                });
            }
            if v.0.iter().any(|x| !x.is_finite()) {
                return Err(IndexError::NonFinite(chunk.id));
            }
            let wide: Vec<f64> = v.0.iter().map(|&x| f64::from(x)).collect();
            let unit = normalize(&wide).ok_or_else(|| IndexError::ZeroVector(chunk.id.clone()))?;
            if !seen.insert(chunk.id.clone()) {
                return Err(IndexError::DuplicateId(chunk.id));
            }
            let row: Vec<f32> = unit.iter().map(|&x| x as f32).collect();
            index.push_row(&row);
            index.entries.push(chunk);
        }
        Ok(index)
    }

    /// Builds from splitter output, deriving entry ids from the chunks.
    pub fn from_chunks(dim: usize, chunks: &[Chunk], vectors: &[EmbeddingVector]) -> Result<Self, IndexError> {
        let refs = chunks.iter().map(ChunkRef::try_from).collect::<Result<Vec<_>, _>>()?;
        Self::build(dim, refs, vectors)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ChunkRef] {
        &self.entries
    }

    pub fn vector(&self, ordinal: usize) -> &[f64] {
        &self.vectors[ordinal * self.dim..(ordinal + 1) * self.dim]
    }

    /// Exact top-`k` by cosine similarity; ties go to the earlier entry.
    pub fn search(&self, query: &[f32], k: usize) -> Result<Vec<SearchHit>, IndexError> {
        if k == 0 {
            return Err(IndexError::InvalidK);
        }
        if query.len() != self.dim {
            return Err(IndexError::DimensionMismatch {
                expected: self.dim,
                actual: query.len(),
            });
        }
        let wide: Vec<f64> = query.iter().map(|&x| f64::from(x)).collect();
        if wide.iter().any(|x| !x.is_finite()) {
            return Err(IndexError::NonFinite("<query>".into()));
        }
        let q = normalize(&wide).ok_or_else(|| IndexError::ZeroVector("<query>".into()))?;

        let mut scored: Vec<(usize, f64)> = (0..self.len())
            .map(|i| {
                let dot: f64 = self.vector(i).iter().zip(&q).map(|(a, b)| a * b).sum();
                (i, dot.clamp(-1.0, 1.0))
            })
            .collect();
        let by_rank =
            |a: &(usize, f64), b: &(usize, f64)| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0));
        let k = k.min(scored.len());
        if k < scored.len() {
            scored.select_nth_unstable_by(k, by_rank);
            scored.truncate(k);
        }
        scored.sort_by(by_rank);
        Ok(scored
            .into_iter()
            .enumerate()
            .map(|(r, (i, score))| SearchHit {
                chunk_id: self.entries[i].id.clone(),
                score,
                rank: r + 1,
                ordinal: i,
            })
            .collect())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, IndexError> {
        let dim = u32::try_from(self.dim).map_err(|_| IndexError::OffsetOverflow(self.dim))?;
        let mut out = Vec::with_capacity(20 + self.len() * (10 + 4 * self.dim));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&dim.to_le_bytes());
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        for (i, entry) in self.entries.iter().enumerate() {
            let id_len = u16::try_from(entry.id.len()).map_err(|_| IndexError::IdTooLong(entry.id.clone()))?;
            out.extend_from_slice(&id_len.to_le_bytes());
            out.extend_from_slice(entry.id.as_bytes());
            out.extend_from_slice(&entry.start.to_le_bytes());
            out.extend_from_slice(&entry.end.to_le_bytes());
            for &x in &self.stored[i * self.dim..(i + 1) * self.dim] {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IndexError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4).map_err(|_| IndexError::BadMagic)? != MAGIC {
            return Err(IndexError::BadMagic);
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(IndexError::VersionUnsupported(version));
        }
        let dim = r.u32()? as usize;
        let count = r.u64()?;
        // each entry needs at least its fixed-size fields
        let min_entry = 10u64 + 4 * dim as u64;
        if count.saturating_mul(min_entry) > (bytes.len() - r.pos) as u64 {
            return Err(IndexError::TruncatedFile);
        }
        let count = count as usize;
        let mut index = Self::empty(dim);
        index.entries.reserve(count);
        index.stored.reserve(count * dim);
        index.vectors.reserve(count * dim);
        let mut row = Vec::with_capacity(dim);
        for _ in 0..count {
            let id_len = r.u16()? as usize;
            let id = std::str::from_utf8(r.take(id_len)?)
                .map_err(|_| IndexError::InvalidId)?
                .to_string();
            let start = r.u32()?;
            let end = r.u32()?;
            row.clear();
            for _ in 0..dim {
                row.push(f32::from_le_bytes(r.array()?));
            }
            index.push_row(&row);
            index.entries.push(ChunkRef { id, start, end });
        }
        if r.pos != bytes.len() {
            return Err(IndexError::TrailingBytes(bytes.len() - r.pos));
        }
        Ok(index)
    }

    pub fn save(&self, path: &Path) -> Result<(), IndexError> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, IndexError> {
        Self::from_bytes(&fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], IndexError> {
        let end = self.pos.checked_add(n).ok_or(IndexError::TruncatedFile)?;
        let slice = self.bytes.get(self.pos..end).ok_or(IndexError::TruncatedFile)?;
        self.pos = end;
        Ok(slice)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], IndexError> {
        Ok(self.take(N)?.try_into().expect("slice of length N"))
    }

    fn u16(&mut self) -> Result<u16, IndexError> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    fn u32(&mut self) -> Result<u32, IndexError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64, IndexError> {
        Ok(u64::from_le_bytes(self.array()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn refs(n: usize) -> Vec<ChunkRef> {
        (0..n)
            .map(|i| ChunkRef {
                id: format!("doc#{i}"),
                start: (i * 10) as u32,
                end: (i * 10 + 10) as u32,
            })
            .collect()
    }

    fn vecs(rows: &[[f32; 4]]) -> Vec<EmbeddingVector> {
        rows.iter().map(|r| EmbeddingVector(r.to_vec())).collect()
    }

    fn small() -> VectorIndex {
        let v = vecs(&[[1., 0., 0., 0.], [0., 2., 0., 0.], [1., 1., 0., 0.]]);
        VectorIndex::build(4, refs(3), &v).unwrap()
    }

    #[test]
    fn build_counts_entries() {
        assert_eq!(small().len(), 3);
    }

    #[test]
    fn length_mismatch() {
        let v = vecs(&[[1., 0., 0., 0.], [0., 1., 0., 0.]]);
        assert!(matches!(
            VectorIndex::build(4, refs(3), &v),
            Err(IndexError::LengthMismatch { chunks: 3, vectors: 2 })
        ));
    }

    #[test]
    fn dimension_mismatch() {
        let mut v = vecs(&[[1., 0., 0., 0.], [0., 1., 0., 0.]]);
        v.push(EmbeddingVector(vec![1.0; 5]));
        assert!(matches!(
            VectorIndex::build(4, refs(3), &v),
            Err(IndexError::DimensionMismatch { expected: 4, actual: 5 })
        ));
    }

    #[test]
    fn zero_vector_rejected() {
        let v = vecs(&[[0.; 4]]);
        assert!(matches!(
            VectorIndex::build(4, refs(1), &v),
            Err(IndexError::ZeroVector(_))
        ));
    }

    #[test]
    fn self_query_scores_one() {
        let hits = small().search(&[0., 5., 0., 0.], 1).unwrap();
        assert_eq!(hits[0].chunk_id, "doc#1");
        assert!((hits[0].score - 1.0).abs() < 1e-6);
        assert_eq!(hits[0].rank, 1);
    }

    #[test]
    fn k_larger_than_count() {
        assert_eq!(small().search(&[1., 1., 1., 1.], 10).unwrap().len(), 3);
    }

    #[test]
    fn ties_keep_insertion_order() {
        let v = vecs(&[[1., 0., 0., 0.], [0., 1., 0., 0.], [1., 0., 0., 0.]]);
        let index = VectorIndex::build(4, refs(3), &v).unwrap();
        let hits = index.search(&[1., 0., 0., 0.], 2).unwrap();
        assert_eq!(hits[0].chunk_id, "doc#0");
        assert_eq!(hits[1].chunk_id, "doc#2");
    }

    #[test]
    fn query_errors() {
        let index = small();
        assert!(matches!(
            index.search(&[1., 0., 0.], 1),
            Err(IndexError::DimensionMismatch { .. })
        ));
        assert!(matches!(index.search(&[1., 0., 0., 0.], 0), Err(IndexError::InvalidK)));
    }

    #[test]
    fn bad_magic() {
        let mut bytes = small().to_bytes().unwrap();
        bytes[0] = b'X';
        assert!(matches!(VectorIndex::from_bytes(&bytes), Err(IndexError::BadMagic)));
        assert!(matches!(VectorIndex::from_bytes(b"EY"), Err(IndexError::BadMagic)));
    }

    #[test]
    fn unsupported_version() {
        let mut bytes = small().to_bytes().unwrap();
        bytes[4] = 9;
        assert!(matches!(
            VectorIndex::from_bytes(&bytes),
            Err(IndexError::VersionUnsupported(9))
        ));
    }

    #[test]
    fn truncation_at_every_length() {
        let bytes = small().to_bytes().unwrap();
        for cut in 4..bytes.len() {
            let err = VectorIndex::from_bytes(&bytes[..cut]).unwrap_err();
            assert!(matches!(err, IndexError::TruncatedFile), "cut {cut}: {err}");
        }
    }

    #[test]
    fn header_layout() {
        let bytes = small().to_bytes().unwrap();
        assert_eq!(&bytes[..4], b"EYIX");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 4);
        assert_eq!(u64::from_le_bytes(bytes[12..20].try_into().unwrap()), 3);
        // first entry: id "doc#0"
        assert_eq!(u16::from_le_bytes(bytes[20..22].try_into().unwrap()), 5);
        assert_eq!(&bytes[22..27], b"doc#0");
        assert_eq!(bytes.len(), 20 + 3 * (2 + 5 + 8 + 16));
    }

    #[test]
    fn empty_round_trip() {
        let index = VectorIndex::empty(8);
        let back = VectorIndex::from_bytes(&index.to_bytes().unwrap()).unwrap();
        assert_eq!(back.dim(), 8);
        assert!(back.is_empty());
    }
}
