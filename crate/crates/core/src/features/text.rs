use std::hash::Hasher;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

use super::DialogueHistory;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeaturizerConfig {
    pub hash_dim: usize,
    /// Largest word n-gram hashed (1 = unigrams only).
    pub ngram_order: usize,
    /// Weight multiplier per turn of distance from the most recent turn.
    pub decay: f64,
}

impl Default for FeaturizerConfig {
    fn default() -> Self {
        FeaturizerConfig {
            hash_dim: 4096,
            ngram_order: 2,
            decay: 0.7,
        }
    }
}

impl FeaturizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hash_dim == 0 || self.ngram_order == 0 {
            return Err(Error::Config("hash_dim and ngram_order must be positive".into()));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(Error::Config(format!("decay {} outside (0, 1]", self.decay)));
        }
        Ok(())
    }
}

/// L2-normalized sparse text encoding. `indices` are strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct TextEncoding {
    pub dim: usize,
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl TextEncoding {
    pub fn zeros(dim: usize) -> Self {
        TextEncoding {
            dim,
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (i, v) in self.indices.iter().zip(&self.values) {
            out[*i as usize] = *v;
        }
        out
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }
}

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// 64-bit FNV-1a of the feature string's UTF-8 bytes, reduced modulo
/// `hash_dim`.
pub fn feature_bucket(feature: &str, hash_dim: usize) -> usize {
    let mut h = FnvHasher::default();
    h.write(feature.as_bytes());
    (h.finish() % hash_dim as u64) as usize
}

/// Hashed word n-grams prefixed with the speaker tag, weighted by
/// `decay^age` where age 0 is the most recent turn.
pub fn featurize_text(history: &DialogueHistory, config: &FeaturizerConfig) -> TextEncoding {
    let mut dense = vec![0.0; config.hash_dim];
    let mut weight = 1.0;
    for (speaker, text) in &history.turns {
        let tokens = tokenize(text);
        let tag = speaker.tag();
        for n in 1..=config.ngram_order {
            for gram in tokens.windows(n) {
                let feature = format!("{tag}:{}", gram.join(" "));
                dense[feature_bucket(&feature, config.hash_dim)] += weight;
            }
        }
        weight *= config.decay;
    }
    let norm = dense.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut enc = TextEncoding::zeros(config.hash_dim);
    if norm > 0.0 {
        for (i, v) in dense.iter().enumerate() {
            if *v != 0.0 {
                enc.indices.push(i as u32);
                enc.values.push(v / norm);
            }
        }
    }
    enc
}
