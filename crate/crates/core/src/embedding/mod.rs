//! Sentence vectors: the in-memory matrix, pooling and cosine distance, the
//! deterministic test embedder, the binary file format and the HTTP client.

mod format;
mod service;

use std::collections::HashMap;
use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{sentence_id, tokenize};

pub use format::{load_embeddings, read_embeddings, save_embeddings, write_embeddings, MAGIC, VERSION};
pub use service::{fetch_embeddings, ServiceConfig};

/// Default embedding width.
pub const DEFAULT_DIM: usize = 768;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("cannot pool zero tokens")]
    EmptyPool,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("zero-norm vector{}", id.as_deref().map(|i| format!(" for id {i:?}")).unwrap_or_default())]
    ZeroNorm { id: Option<String> },
    #[error("invalid dimension {0}")]
    InvalidDimension(usize),
    #[error("non-finite value in row {row}")]
    NonFinite { row: usize },
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("unknown id {0:?}")]
    UnknownId(String),
    #[error("{ids} ids but {rows} rows")]
    ShapeMismatch { ids: usize, rows: usize },
    #[error("bad magic: expected EMB1")]
    BadMagic,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("file truncated")]
    Truncated,
    #[error("{0} trailing bytes after last record")]
    TrailingBytes(usize),
    #[error("id is not valid UTF-8")]
    InvalidUtf8,
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("service returned status {0}")]
    Status(u16),
    #[error("row-count mismatch: sent {expected} texts, received {got} vectors")]
    RowCountMismatch { expected: usize, got: usize },
    #[error("malformed service response: {0}")]
    Decode(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Rows of `dim` 32-bit floats keyed by unique sentence ids.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    ids: Vec<String>,
    data: Vec<f32>,
    index: HashMap<String, usize>,
}

impl EmbeddingMatrix {
    /// Builds a matrix from row-major data, checking every invariant.
    pub fn new(dim: usize, ids: Vec<String>, data: Vec<f32>) -> Result<Self, EmbeddingError> {
        if dim == 0 {
            return Err(EmbeddingError::InvalidDimension(dim));
        }
        if data.len() != ids.len() * dim {
            return Err(EmbeddingError::ShapeMismatch {
                ids: ids.len(),
                rows: data.len() / dim,
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite { row: pos / dim });
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(EmbeddingError::DuplicateId(id.clone()));
            }
        }
        Ok(EmbeddingMatrix { dim, ids, data, index })
    }

    pub fn from_rows(ids: Vec<String>, rows: Vec<Vec<f32>>) -> Result<Self, EmbeddingError> {
        let dim = rows.first().map_or(0, Vec::len);
        if ids.len() != rows.len() {
            return Err(EmbeddingError::ShapeMismatch {
                ids: ids.len(),
                rows: rows.len(),
            });
        }
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in &rows {
            if row.len() != dim {
                return Err(EmbeddingError::DimMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        EmbeddingMatrix::new(dim, ids, data)
    }

    pub fn empty(dim: usize) -> Result<Self, EmbeddingError> {
        EmbeddingMatrix::new(dim, Vec::new(), Vec::new())
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

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.index.get(id).map(|&i| self.row(i))
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.ids.iter().map(String::as_str).zip(self.rows())
    }

    /// Sub-matrix with the given ids, in the given order.
    pub fn select<S: AsRef<str>>(&self, ids: &[S]) -> Result<EmbeddingMatrix, EmbeddingError> {
        let mut data = Vec::with_capacity(ids.len() * self.dim);
        let mut out_ids = Vec::with_capacity(ids.len());
        for id in ids {
            let row = self
                .get(id.as_ref())
                .ok_or_else(|| EmbeddingError::UnknownId(id.as_ref().to_string()))?;
            data.extend_from_slice(row);
            out_ids.push(id.as_ref().to_string());
        }
        EmbeddingMatrix::new(self.dim, out_ids, data)
    }

    /// Rows widened to 64-bit.
    pub fn to_f64_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(|r| r.iter().map(|&v| v as f64).collect()).collect()
    }
}

/// Component-wise mean of token vectors.
pub fn mean_pool<V: AsRef<[f32]>>(token_vectors: &[V]) -> Result<Vec<f32>, EmbeddingError> {
    let first = token_vectors.first().ok_or(EmbeddingError::EmptyPool)?;
    let dim = first.as_ref().len();
    let mut acc = vec![0f64; dim];
    for v in token_vectors {
        let v = v.as_ref();
        if v.len() != dim {
            return Err(EmbeddingError::DimMismatch {
                expected: dim,
                got: v.len(),
            });
        }
        for (a, &x) in acc.iter_mut().zip(v) {
            *a += x as f64;
        }
    }
    let n = token_vectors.len() as f64;
    Ok(acc.into_iter().map(|a| (a / n) as f32).collect())
}

pub(crate) fn dot(u: &[f32], v: &[f32]) -> f64 {
    u.iter().zip(v).map(|(&a, &b)| a as f64 * b as f64).sum()
}

pub(crate) fn sq_norm(u: &[f32]) -> f64 {
    dot(u, u)
}

/// Cosine distance from a dot product and both squared norms, clamped to
/// `[0, 2]`. Identical vectors give exactly 0.
#[inline]
pub(crate) fn distance_from_parts(dot: f64, sq_u: f64, sq_v: f64) -> f64 {
    (1.0 - dot / (sq_u * sq_v).sqrt()).clamp(0.0, 2.0)
}

/// `1 - u·v / (|u| |v|)`, accumulated in 64-bit and clamped to `[0, 2]`.
pub fn cosine_distance(u: &[f32], v: &[f32]) -> Result<f64, EmbeddingError> {
    if u.len() != v.len() {
        return Err(EmbeddingError::DimMismatch {
            expected: u.len(),
            got: v.len(),
        });
    }
    let (nu, nv) = (sq_norm(u), sq_norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(EmbeddingError::ZeroNorm { id: None });
    }
    Ok(distance_from_parts(dot(u, v), nu, nv))
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Stable 64-bit key for a string under a seed.
pub(crate) fn keyed_seed(seed: u64, key: &str) -> u64 {
    splitmix64(seed ^ splitmix64(fnv1a(key.as_bytes())))
}

fn token_vector(token: &str, seed: u64, dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(keyed_seed(seed, token));
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.0 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Deterministic stand-in for a sentence encoder: every token maps to a
/// seeded pseudorandom unit vector and the sentence vector is their mean.
/// Sentences without word tokens embed as a single placeholder token.
pub fn test_embed(sentence: &str, seed: u64, dim: usize) -> Vec<f32> {
    assert!(dim >= 2, "test embedder needs dim >= 2");
    let mut tokens = tokenize(sentence);
    if tokens.is_empty() {
        tokens.push("\u{0}empty".to_string());
    }
    let mut acc = vec![0f64; dim];
    for token in &tokens {
        for (a, x) in acc.iter_mut().zip(token_vector(token, seed, dim)) {
            *a += x;
        }
    }
    let n = tokens.len() as f64;
    acc.into_iter().map(|a| (a / n) as f32).collect()
}

/// Where sentence vectors come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbeddingSource {
    /// A binary embedding file keyed by sentence id.
    File { path: PathBuf },
    /// An HTTP embedding service.
    Service(ServiceConfig),
    /// The seeded test embedder.
    Test { seed: u64, dim: usize },
}

impl EmbeddingSource {
    /// Embeds unique texts; row ids are the texts' sentence ids.
    pub fn embed(&self, texts: &[String]) -> Result<EmbeddingMatrix, EmbeddingError> {
        match self {
            EmbeddingSource::File { path } => {
                let all = load_embeddings(path)?;
                let ids: Vec<String> = texts.iter().map(|t| sentence_id(t)).collect();
                all.select(&ids)
            }
            EmbeddingSource::Service(cfg) => fetch_embeddings(texts, cfg),
            EmbeddingSource::Test { seed, dim } => {
                if *dim < 2 {
                    return Err(EmbeddingError::InvalidDimension(*dim));
                }
                let ids = texts.iter().map(|t| sentence_id(t)).collect();
                let mut data = Vec::with_capacity(texts.len() * dim);
                for t in texts {
                    data.extend(test_embed(t, *seed, *dim));
                }
                EmbeddingMatrix::new(*dim, ids, data)
            }
        }
    }
}
