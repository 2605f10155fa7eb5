//! Deterministic pseudo-embeddings so the dense code path runs without a model.
//!
//! Each distinct token owns a pseudo-random direction drawn from ChaCha8
//! seeded by FNV-1a(seed ‖ token). A text's vector is the token-count
//! weighted sum of its token directions, accumulated in lexicographic token
//! order and scaled to unit length.

use std::collections::{BTreeMap, HashMap};
use std::hash::Hasher;
use std::sync::{Arc, RwLock};

use fnv::FnvHasher;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::text::tokenize;

fn token_seed(token: &str, seed: u64) -> u64 {
    let mut h = FnvHasher::default();
    h.write(&seed.to_le_bytes());
    h.write(token.as_bytes());
    h.finish()
}

fn token_direction(token: &str, dimension: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(token_seed(token, seed));
    (0..dimension)
        .map(|_| rng.random::<f64>() * 2.0 - 1.0)
        .collect()
}

fn add_scaled(acc: &mut [f64], direction: &[f64], weight: f64) {
    for (slot, d) in acc.iter_mut().zip(direction) {
        *slot += weight * d;
    }
}

/// Unit-norm bag-of-tokens vector for `text`. `dimension` must be ≥ 1.
pub fn hash_embedding(text: &str, dimension: usize, seed: u64) -> Vec<f64> {
    embed_with(text, dimension, |token| {
        token_direction(token, dimension, seed).into()
    })
}

fn embed_with(
    text: &str,
    dimension: usize,
    mut direction: impl FnMut(&str) -> Arc<[f64]>,
) -> Vec<f64> {
    assert!(dimension >= 1, "hash embedding dimension must be positive");
    let mut counts: BTreeMap<String, u32> = BTreeMap::new();
    for token in tokenize(text) {
        *counts.entry(token).or_insert(0) += 1;
    }
    let mut v = vec![0.0; dimension];
    if counts.is_empty() {
        add_scaled(&mut v, &direction(""), 1.0);
    }
    for (token, count) in &counts {
        add_scaled(&mut v, &direction(token), f64::from(*count));
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        v.iter_mut().for_each(|x| *x = 0.0);
        v[0] = 1.0;
        return v;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashEmbedder {
    pub dimension: usize,
    pub seed: u64,
}

impl HashEmbedder {
    pub fn new(dimension: usize, seed: u64) -> Self {
        HashEmbedder { dimension, seed }
    }

    pub fn embed(&self, text: &str) -> Vec<f64> {
        hash_embedding(text, self.dimension, self.seed)
    }
}

/// A [`HashEmbedder`] that remembers every token direction it has drawn.
/// Vectors are bit-identical to the uncached embedder's.
#[derive(Debug)]
pub struct CachedHashEmbedder {
    embedder: HashEmbedder,
    directions: RwLock<HashMap<String, Arc<[f64]>>>,
}

impl CachedHashEmbedder {
    pub fn new(embedder: HashEmbedder) -> Self {
        CachedHashEmbedder {
            embedder,
            directions: RwLock::new(HashMap::new()),
        }
    }

    pub fn embedder(&self) -> HashEmbedder {
        self.embedder
    }

    fn direction(&self, token: &str) -> Arc<[f64]> {
        if let Some(d) = self.directions.read().expect("cache lock").get(token) {
            return d.clone();
        }
        let d: Arc<[f64]> =
            token_direction(token, self.embedder.dimension, self.embedder.seed).into();
        self.directions
            .write()
            .expect("cache lock")
            .entry(token.to_string())
            .or_insert(d)
            .clone()
    }

    pub fn embed(&self, text: &str) -> Vec<f64> {
        embed_with(text, self.embedder.dimension, |t| self.direction(t))
    }
}
