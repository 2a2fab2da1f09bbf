//! Pluggable 100-dimensional text embedders.
//!
//! The default is signed feature hashing: a pure function of the token
//! multiset and the seed, so graph construction stays deterministic with no
//! external model files. A precomputed-table embedder is available for runs
//! that want to supply their own vectors (averaged per token); it plugs in
//! behind the same trait.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::seeding::fnv1a64;

/// Fixed output dimension of every embedder.
pub const EMBED_DIM: usize = 100;

/// Maps a token multiset to a fixed-width vector.
pub trait TextEmbedder: Sync {
    fn dimension(&self) -> usize;
    fn embed(&self, tokens: &[String]) -> Vec<f64>;
}

/// Which embedder backs feature construction.
#[derive(Clone, Debug, PartialEq)]
pub enum EmbedderKind {
    /// Seeded signed feature hashing (default).
    FeatureHashing,
    /// Externally supplied per-token vectors, averaged over known tokens.
    Precomputed(HashMap<String, Vec<f64>>),
}

/// Embedder selection plus its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbedderSpec {
    pub kind: EmbedderKind,
    pub dimension: usize,
    pub seed: u64,
}

impl EmbedderSpec {
    pub fn hashing(seed: u64) -> Self {
        Self {
            kind: EmbedderKind::FeatureHashing,
            dimension: EMBED_DIM,
            seed,
        }
    }

    pub fn build(&self) -> Result<Box<dyn TextEmbedder + '_>> {
        if self.dimension != EMBED_DIM {
            return Err(Error::Config(format!(
                "embedder dimension is fixed at {EMBED_DIM}, got {}",
                self.dimension
            )));
        }
        match &self.kind {
            EmbedderKind::FeatureHashing => Ok(Box::new(HashingEmbedder {
                dim: self.dimension,
                seed: self.seed,
            })),
            EmbedderKind::Precomputed(table) => {
                for (token, vec) in table {
                    if vec.len() != self.dimension {
                        return Err(Error::Config(format!(
                            "precomputed vector for {token:?} has length {}, want {}",
                            vec.len(),
                            self.dimension
                        )));
                    }
                }
                Ok(Box::new(PrecomputedEmbedder {
                    dim: self.dimension,
                    table,
                }))
            }
        }
    }
}

struct HashingEmbedder {
    dim: usize,
    seed: u64,
}

impl TextEmbedder for HashingEmbedder {
    fn dimension(&self) -> usize {
        self.dim
    }

    /// Signed feature hashing, L2-normalized when nonzero. Accumulation is
    /// per-token addition, so the result depends only on the token multiset.
    fn embed(&self, tokens: &[String]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for token in tokens {
            let mut bytes = Vec::with_capacity(8 + token.len());
            bytes.extend_from_slice(&self.seed.to_le_bytes());
            bytes.extend_from_slice(token.as_bytes());
            let h = fnv1a64(&bytes);
            let idx = ((h >> 1) % self.dim as u64) as usize;
            let sign = if h & 1 == 1 { 1.0 } else { -1.0 };
            out[idx] += sign;
        }
        let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut out {
                *v /= norm;
            }
        }
        out
    }
}

struct PrecomputedEmbedder<'a> {
    dim: usize,
    table: &'a HashMap<String, Vec<f64>>,
}

impl TextEmbedder for PrecomputedEmbedder<'_> {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed(&self, tokens: &[String]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        let mut known = 0usize;
        for token in tokens {
            if let Some(vec) = self.table.get(token) {
                for (o, v) in out.iter_mut().zip(vec) {
                    *o += v;
                }
                known += 1;
            }
        }
        if known > 0 {
            for o in &mut out {
                *o /= known as f64;
            }
        }
        out
    }
}
