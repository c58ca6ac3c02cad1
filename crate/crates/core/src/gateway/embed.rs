//! Embedding backends.
//!
//! The test/offline backend hashes token n-grams of the input into a
//! fixed-dimension unit vector. It is a pure function of (seed, text), so any
//! pipeline built on it is reproducible without network access.

use std::collections::BTreeMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::Embedder;
use crate::error::{Error, Result};

/// A fixed-dimension real vector.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Cosine similarity; 0.0 when either vector has zero norm.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> f64 {
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na * nb)
}

/// Deterministic hashing embedder.
///
/// Features are word unigrams, word bigrams, and the raw string itself; each
/// feature is hashed with the seed into a (bucket, sign) pair and accumulated,
/// then the vector is L2-normalized. Including the raw string keeps the map
/// injective-in-practice for near-identical inputs (trailing whitespace
/// matters).
pub struct HashEmbedder {
    dim: usize,
    seed: u64,
}

impl HashEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim, seed }
    }

    fn feature(&self, acc: &mut [f64], feature: &str) {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(feature.as_bytes());
        let digest = hasher.finalize();
        let idx = u64::from_le_bytes(digest[0..8].try_into().unwrap()) as usize % self.dim;
        let sign = if digest[8] & 1 == 0 { 1.0 } else { -1.0 };
        acc[idx] += sign;
    }
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self::new(64, 0x5eed)
    }
}

impl Embedder for HashEmbedder {
    fn id(&self) -> &str {
        "hash-ngram"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        if text.is_empty() {
            return Err(Error::validation("cannot embed empty text"));
        }
        let mut acc = vec![0.0; self.dim];
        let lowered = text.to_lowercase();
        let tokens: Vec<&str> = lowered.split_whitespace().collect();
        for token in &tokens {
            self.feature(&mut acc, &format!("1:{token}"));
        }
        for pair in tokens.windows(2) {
            self.feature(&mut acc, &format!("2:{} {}", pair[0], pair[1]));
        }
        self.feature(&mut acc, &format!("raw:{text}"));

        let norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut acc {
                *v /= norm;
            }
        }
        Ok(EmbeddingVector { values: acc })
    }
}

/// Memoizing wrapper so repeated embeddings of the same text hit the
/// underlying backend once. Embedders are pure, so this is transparent.
pub struct CachedEmbedder<E> {
    inner: E,
    cache: Mutex<BTreeMap<String, EmbeddingVector>>,
}

impl<E: Embedder> CachedEmbedder<E> {
    pub fn new(inner: E) -> Self {
        Self {
            inner,
            cache: Mutex::new(BTreeMap::new()),
        }
    }
}

impl<E: Embedder> Embedder for CachedEmbedder<E> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        if let Some(hit) = self.cache.lock().unwrap().get(text) {
            return Ok(hit.clone());
        }
        let vector = self.inner.embed(text)?;
        self.cache
            .lock()
            .unwrap()
            .insert(text.to_string(), vector.clone());
        Ok(vector)
    }
}
