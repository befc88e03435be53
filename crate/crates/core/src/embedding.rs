//! Unit-norm semantic vectors: the binary/CSV store, the deterministic
//! fallback embedder and the cosine primitive every similarity metric uses.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::ops::Deref;
use std::path::Path;

use crate::rng::{fnv1a64, mix64};
use crate::text::tokenize;

pub const DEFAULT_DIM: usize = 384;
pub const MAGIC: &[u8; 4] = b"MBEM";
pub const VERSION: u32 = 1;
/// Vectors whose norm falls below this are rejected at load time.
pub const MIN_NORM: f64 = 1e-8;

#[derive(Debug, thiserror::Error)]
pub enum EmbeddingError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic bytes (expected MBEM)")]
    BadMagic,
    #[error("unsupported store version {0}")]
    UnsupportedVersion(u32),
    #[error("dimension mismatch for `{id}`: expected {expected}, found {found}")]
    DimMismatch { id: String, expected: usize, found: usize },
    #[error("near-zero vector for `{0}`")]
    ZeroVector(String),
    #[error("non-finite component in `{0}`")]
    NonFinite(String),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("malformed csv line {line}: {reason}")]
    Csv { line: usize, reason: String },
    #[error("id is not valid UTF-8")]
    BadId,
    #[error("dimension must be at least 2, got {0}")]
    DimTooSmall(usize),
    #[error("vectors have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("degenerate (zero-norm) vector")]
    Degenerate,
}

/// Dense embedding of one post.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(pub Vec<f32>);

impl Deref for EmbeddingVector {
    type Target = [f32];
    fn deref(&self) -> &[f32] {
        &self.0
    }
}

/// Dot product with four independent accumulators (lets the compiler
/// vectorize the loop).
#[inline]
pub fn dot<A: Copy + Into<f64>, B: Copy + Into<f64>>(u: &[A], v: &[B]) -> f64 {
    let n = u.len().min(v.len());
    let mut acc = [0.0f64; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += u[i].into() * v[i].into();
        acc[1] += u[i + 1].into() * v[i + 1].into();
        acc[2] += u[i + 2].into() * v[i + 2].into();
        acc[3] += u[i + 3].into() * v[i + 3].into();
    }
    let mut tail = 0.0;
    for i in chunks * 4..n {
        tail += u[i].into() * v[i].into();
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn norm<A: Copy + Into<f64>>(u: &[A]) -> f64 {
    dot(u, u).sqrt()
}

/// Cosine similarity clamped to [-1, 1].
pub fn cosine<A: Copy + Into<f64>, B: Copy + Into<f64>>(u: &[A], v: &[B]) -> Result<f64, EmbeddingError> {
    if u.len() != v.len() {
        return Err(EmbeddingError::LengthMismatch(u.len(), v.len()));
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 || !nu.is_finite() || !nv.is_finite() {
        return Err(EmbeddingError::Degenerate);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Immutable id -> unit vector map. Rows are kept sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    ids: Vec<String>,
    data: Vec<f32>,
    index: HashMap<String, usize>,
}

fn normalize_into(id: &str, values: &[f32], out: &mut Vec<f32>) -> Result<(), EmbeddingError> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(EmbeddingError::NonFinite(id.to_string()));
    }
    let n = norm(values);
    if n < MIN_NORM {
        return Err(EmbeddingError::ZeroVector(id.to_string()));
    }
    out.extend(values.iter().map(|&v| (f64::from(v) / n) as f32));
    Ok(())
}

impl EmbeddingStore {
    /// Builds a store, re-normalizing every vector to unit L2 norm.
    pub fn from_entries<I>(dim: usize, entries: I) -> Result<Self, EmbeddingError>
    where
        I: IntoIterator<Item = (String, Vec<f32>)>,
    {
        let mut rows: Vec<(String, Vec<f32>)> = entries.into_iter().collect();
        rows.sort_by(|a, b| a.0.cmp(&b.0));
        let mut ids = Vec::with_capacity(rows.len());
        let mut data = Vec::with_capacity(rows.len() * dim);
        let mut index = HashMap::with_capacity(rows.len());
        for (id, v) in rows {
            if v.len() != dim {
                return Err(EmbeddingError::DimMismatch { id, expected: dim, found: v.len() });
            }
            normalize_into(&id, &v, &mut data)?;
            if index.insert(id.clone(), ids.len()).is_some() {
                return Err(EmbeddingError::DuplicateId(id));
            }
            ids.push(id);
        }
        Ok(EmbeddingStore { dim, ids, data, index })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn row_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn row(&self, row: usize) -> &[f32] {
        &self.data[row * self.dim..(row + 1) * self.dim]
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.row_of(id).map(|r| self.row(r))
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.ids.iter().enumerate().map(move |(i, id)| (id.as_str(), self.row(i)))
    }

    /// Applies `f` to every vector (used by invariance tests); the result is
    /// re-normalized like any other input.
    pub fn map_vectors<F: Fn(&[f32]) -> Vec<f32>>(&self, dim: usize, f: F) -> Result<Self, EmbeddingError> {
        Self::from_entries(dim, self.iter().map(|(id, v)| (id.to_string(), f(v))))
    }

    pub fn write_mbem<W: Write>(&self, w: W) -> io::Result<()> {
        let mut w = BufWriter::new(w);
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(self.ids.len() as u64).to_le_bytes())?;
        for (id, v) in self.iter() {
            let bytes = id.as_bytes();
            let len = u16::try_from(bytes.len())
                .map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, format!("id too long: {id}")))?;
            w.write_all(&len.to_le_bytes())?;
            w.write_all(bytes)?;
            for x in v {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        w.flush()
    }

    pub fn read_mbem<R: Read>(r: R) -> Result<Self, EmbeddingError> {
        let mut r = BufReader::new(r);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(EmbeddingError::BadMagic);
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(EmbeddingError::UnsupportedVersion(version));
        }
        let dim = read_u32(&mut r)? as usize;
        let count = read_u64(&mut r)? as usize;
        let mut entries = Vec::with_capacity(count.min(1 << 20));
        let mut buf = vec![0u8; dim * 4];
        for _ in 0..count {
            let mut len = [0u8; 2];
            r.read_exact(&mut len)?;
            let mut id = vec![0u8; u16::from_le_bytes(len) as usize];
            r.read_exact(&mut id)?;
            let id = String::from_utf8(id).map_err(|_| EmbeddingError::BadId)?;
            r.read_exact(&mut buf)?;
            let v = buf.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
            entries.push((id, v));
        }
        Self::from_entries(dim, entries)
    }

    /// CSV rows `id,v0,...,v{d-1}`; an optional header row starting with
    /// `id,` is skipped. The dimension is taken from the first row.
    pub fn read_csv<R: Read>(r: R) -> Result<Self, EmbeddingError> {
        let mut entries = Vec::new();
        let mut dim = None;
        for (i, line) in BufReader::new(r).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() || (i == 0 && line.starts_with("id,")) {
                continue;
            }
            let mut parts = line.split(',');
            let id = parts.next().unwrap_or_default().trim().to_string();
            let v: Vec<f32> = parts
                .map(|p| p.trim().parse::<f32>())
                .collect::<Result<_, _>>()
                .map_err(|e| EmbeddingError::Csv { line: i + 1, reason: e.to_string() })?;
            if id.is_empty() {
                return Err(EmbeddingError::Csv { line: i + 1, reason: "empty id".into() });
            }
            let d = *dim.get_or_insert(v.len());
            if v.len() != d {
                return Err(EmbeddingError::DimMismatch { id, expected: d, found: v.len() });
            }
            entries.push((id, v));
        }
        Self::from_entries(dim.unwrap_or(0), entries)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> io::Result<()> {
        let mut w = BufWriter::new(w);
        for (id, v) in self.iter() {
            write!(w, "{id}")?;
            for x in v {
                write!(w, ",{x}")?;
            }
            writeln!(w)?;
        }
        w.flush()
    }
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StoreFormat {
    #[default]
    Mbem,
    Csv,
}

pub fn load_store(path: &Path, format: StoreFormat) -> Result<EmbeddingStore, EmbeddingError> {
    let f = File::open(path)?;
    match format {
        StoreFormat::Mbem => EmbeddingStore::read_mbem(f),
        StoreFormat::Csv => EmbeddingStore::read_csv(f),
    }
}

pub fn write_store(store: &EmbeddingStore, path: &Path, format: StoreFormat) -> io::Result<()> {
    let f = File::create(path)?;
    match format {
        StoreFormat::Mbem => store.write_mbem(f),
        StoreFormat::Csv => store.write_csv(f),
    }
}

/// Deterministic stand-in encoder: a signed random projection of hashed
/// unigram and bigram counts, L2-normalized. Text without tokens maps to
/// the first axis.
pub fn fallback_embed(text: &str, dim: usize, seed: u64) -> Result<EmbeddingVector, EmbeddingError> {
    if dim < 2 {
        return Err(EmbeddingError::DimTooSmall(dim));
    }
    let tokens = tokenize(text);
    let mut counts: HashMap<u64, f64> = HashMap::new();
    for t in &tokens {
        *counts.entry(feature_hash(t.as_bytes(), 1)).or_default() += 1.0;
    }
    for pair in tokens.windows(2) {
        let joined = format!("{} {}", pair[0], pair[1]);
        *counts.entry(feature_hash(joined.as_bytes(), 2)).or_default() += 1.0;
    }
    let mut features: Vec<(u64, f64)> = counts.into_iter().collect();
    features.sort_unstable_by_key(|f| f.0);

    let seed_mix = mix64(seed ^ 0x005E_ED0F_FA11_BAC4);
    let mut acc = vec![0.0f64; dim];
    for (key, count) in features {
        let base = key.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ seed_mix;
        for block in 0..dim.div_ceil(64) {
            let bits = mix64(base ^ (block as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93));
            let lo = block * 64;
            for (j, a) in acc[lo..(lo + 64).min(dim)].iter_mut().enumerate() {
                if bits >> j & 1 == 1 {
                    *a += count;
                } else {
                    *a -= count;
                }
            }
        }
    }
    let n = norm(&acc);
    if n < MIN_NORM {
        let mut axis = vec![0.0f32; dim];
        axis[0] = 1.0;
        return Ok(EmbeddingVector(axis));
    }
    Ok(EmbeddingVector(acc.iter().map(|v| (v / n) as f32).collect()))
}

fn feature_hash(bytes: &[u8], order: u64) -> u64 {
    mix64(fnv1a64(bytes) ^ order.wrapping_mul(0xA24B_AED4_963E_E407))
}

/// Embeds every post of a snapshot with [`fallback_embed`].
pub fn fallback_store(
    snapshot: &crate::corpus::CorpusSnapshot,
    dim: usize,
    seed: u64,
) -> Result<EmbeddingStore, EmbeddingError> {
    use rayon::prelude::*;
    let entries: Vec<(String, Vec<f32>)> = snapshot
        .posts
        .par_iter()
        .map(|p| fallback_embed(&p.text(), dim, seed).map(|v| (p.id.clone(), v.0)))
        .collect::<Result<_, _>>()?;
    EmbeddingStore::from_entries(dim, entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_cases() {
        assert!((cosine(&[0.3f64, 0.4], &[0.3f64, 0.4]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine(&[1.0f64, 0.0], &[0.0f64, 1.0]).unwrap(), 0.0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((cosine(&[1.0f64, 0.0], &[h, h]).unwrap() - h).abs() < 1e-6);
    }

    #[test]
    fn cosine_rejects_zero_and_mismatch() {
        assert!(matches!(cosine(&[0.0f64, 0.0], &[1.0f64, 0.0]), Err(EmbeddingError::Degenerate)));
        assert!(matches!(cosine(&[1.0f64], &[1.0f64, 0.0]), Err(EmbeddingError::LengthMismatch(1, 2))));
    }

    #[test]
    fn header_only_store() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&16u32.to_le_bytes());
        bytes.extend_from_slice(&0u64.to_le_bytes());
        let s = EmbeddingStore::read_mbem(bytes.as_slice()).unwrap();
        assert!(s.is_empty());
        assert_eq!(s.dim(), 16);
    }

    #[test]
    fn unnormalized_records_load_unit_norm() {
        let s =
            EmbeddingStore::from_entries(2, [("a".to_string(), vec![3.0, 4.0]), ("b".to_string(), vec![0.0, 10.0])])
                .unwrap();
        let mut buf = Vec::new();
        s.write_mbem(&mut buf).unwrap();
        let back = EmbeddingStore::read_mbem(buf.as_slice()).unwrap();
        for (_, v) in back.iter() {
            assert!((norm(v) - 1.0).abs() < 1e-4);
        }
        assert_eq!(back.get("a").unwrap(), &[0.6f32, 0.8]);
    }

    #[test]
    fn bad_magic_and_version() {
        assert!(matches!(EmbeddingStore::read_mbem(&b"NOPE\x01\0\0\0"[..]), Err(EmbeddingError::BadMagic)));
        let mut bytes = MAGIC.to_vec();
        bytes.extend_from_slice(&2u32.to_le_bytes());
        assert!(matches!(EmbeddingStore::read_mbem(bytes.as_slice()), Err(EmbeddingError::UnsupportedVersion(2))));
    }

    #[test]
    fn zero_vector_rejected_with_id() {
        match EmbeddingStore::from_entries(2, [("z".to_string(), vec![0.0, 1e-12])]) {
            Err(EmbeddingError::ZeroVector(id)) => assert_eq!(id, "z"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_dim_mismatch() {
        let csv = "a,1,0,0\nb,1,0\n";
        assert!(matches!(EmbeddingStore::read_csv(csv.as_bytes()), Err(EmbeddingError::DimMismatch { .. })));
        let ok = EmbeddingStore::read_csv("id,v0,v1\na,1,1\n".as_bytes()).unwrap();
        assert_eq!(ok.dim(), 2);
    }

    #[test]
    fn fallback_is_deterministic_and_unit() {
        let a = fallback_embed("the quick brown fox", 384, 3).unwrap();
        let b = fallback_embed("the quick brown fox", 384, 3).unwrap();
        assert_eq!(a, b);
        assert!((norm(&a) - 1.0).abs() < 1e-6);
        assert!((cosine(&a, &b).unwrap() - 1.0).abs() < 1e-6);
        let c = fallback_embed("the quick brown fox", 384, 4).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn fallback_empty_text_is_axis_zero() {
        let v = fallback_embed(" ,,, ", 8, 1).unwrap();
        assert_eq!(v.0, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(fallback_embed("x", 1, 1), Err(EmbeddingError::DimTooSmall(1))));
    }
}
