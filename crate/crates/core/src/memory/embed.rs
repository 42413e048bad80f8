use std::time::Duration;

use reqwest::blocking::Client;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Dimension of [`HashedEmbedder`] vectors.
pub const HASHED_DIM: usize = 256;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("embedding has dimension {found}, expected {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("embedding has zero norm")]
    ZeroVector,
    #[error("embedding request failed: {0}")]
    Remote(String),
}

pub trait EmbeddingBackend: Send + Sync {
    fn dimension(&self) -> usize;
    /// A unit-norm vector of length [`dimension`](Self::dimension).
    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbedError>;
}

impl<E: EmbeddingBackend + ?Sized> EmbeddingBackend for &E {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        (**self).embed(text)
    }
}

pub fn l2_normalize(mut v: Vec<f64>) -> Result<Vec<f64>, EmbedError> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(EmbedError::ZeroVector);
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Ok(v)
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Signed feature hashing of lowercase alphanumeric tokens. Needs no
/// network and gives the same bytes on every platform.
#[derive(Debug, Clone, Copy)]
pub struct HashedEmbedder {
    dim: usize,
}

impl HashedEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim }
    }
}

impl Default for HashedEmbedder {
    fn default() -> Self {
        Self::new(HASHED_DIM)
    }
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

impl EmbeddingBackend for HashedEmbedder {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        let text = text.trim();
        if text.is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let mut tokens = tokenize(text);
        if tokens.is_empty() {
            tokens.push(text.to_string());
        }
        let mut v = vec![0.0; self.dim];
        for token in tokens {
            let h = Sha256::digest(token.as_bytes());
            let bucket = u64::from_le_bytes(h[..8].try_into().expect("8 bytes")) % self.dim as u64;
            let sign = if h[8] & 1 == 0 { 1.0 } else { -1.0 };
            v[bucket as usize] += sign;
        }
        // opposite signs can cancel every bucket
        l2_normalize(v).or_else(|_| {
            let mut v = vec![0.0; self.dim];
            v[0] = 1.0;
            Ok(v)
        })
    }
}

#[derive(Debug, Clone)]
pub struct RemoteEmbedderConfig {
    pub url: String,
    pub api_key_env: String,
    pub dimension: usize,
    pub timeout: Duration,
}

/// POSTs `{"input": text}` and reads `{"embedding": [...]}`.
pub struct RemoteEmbedder {
    client: Client,
    config: RemoteEmbedderConfig,
    api_key: Option<String>,
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    input: &'a str,
}

#[derive(Deserialize)]
struct EmbedResponse {
    embedding: Vec<f64>,
}

impl RemoteEmbedder {
    pub fn new(config: RemoteEmbedderConfig) -> Result<Self, EmbedError> {
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        let client = Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| EmbedError::Remote(e.to_string()))?;
        Ok(Self {
            client,
            config,
            api_key,
        })
    }
}

impl EmbeddingBackend for RemoteEmbedder {
    fn dimension(&self) -> usize {
        self.config.dimension
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        if text.trim().is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let mut req = self.client.post(&self.config.url).json(&EmbedRequest { input: text });
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let response = req.send().map_err(|e| EmbedError::Remote(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            return Err(EmbedError::Remote(format!("HTTP {status}")));
        }
        let body: EmbedResponse = response.json().map_err(|e| EmbedError::Remote(e.to_string()))?;
        if body.embedding.len() != self.config.dimension {
            return Err(EmbedError::Dimension {
                expected: self.config.dimension,
                found: body.embedding.len(),
            });
        }
        l2_normalize(body.embedding)
    }
}
