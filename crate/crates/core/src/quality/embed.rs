use std::hash::Hasher;

use fnv::FnvHasher;
use serde_json::json;

use crate::textgen::{EndpointConfig, RemoteChatGenerator, TextGenError};

pub const EMBEDDING_DIM: usize = 384;

pub trait Embedder: Send + Sync {
    /// L2-normalized vector of length [`EMBEDDING_DIM`].
    fn embed(&self, text: &str) -> Result<Vec<f32>, TextGenError>;
}

/// Hashed character trigrams of the lower-cased, space-padded text.
/// The empty string maps to the zero vector.
pub fn fallback_embed(text: &str) -> Vec<f32> {
    let mut v = vec![0f32; EMBEDDING_DIM];
    if text.is_empty() {
        return v;
    }
    let chars: Vec<char> = format!(" {} ", text.to_lowercase()).chars().collect();
    let mut buf = [0u8; 12];
    for w in chars.windows(3) {
        let mut h = FnvHasher::default();
        let mut n = 0;
        for c in w {
            n += c.encode_utf8(&mut buf[n..]).len();
        }
        h.write(&buf[..n]);
        v[(h.finish() % EMBEDDING_DIM as u64) as usize] += 1.0;
    }
    normalize(&mut v);
    v
}

fn normalize(v: &mut [f32]) {
    let norm = v.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x = (*x as f64 / norm) as f32;
        }
    }
}

/// Cosine similarity; 0 when either side is the zero vector.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum();
    let na = a.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct HashEmbedder;

impl Embedder for HashEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f32>, TextGenError> {
        Ok(fallback_embed(text))
    }
}

/// Sentence embeddings from an OpenAI-style `/embeddings` endpoint.
pub struct RemoteEmbedder {
    client: RemoteChatGenerator,
}

impl RemoteEmbedder {
    pub fn new(config: EndpointConfig) -> Self {
        RemoteEmbedder { client: RemoteChatGenerator::new(config) }
    }

    pub fn from_client(client: RemoteChatGenerator) -> Self {
        RemoteEmbedder { client }
    }
}

impl Embedder for RemoteEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f32>, TextGenError> {
        let body = json!({"model": self.client.config().model, "input": text});
        let reply = self.client.post("embeddings", &body)?;
        let data = reply
            .pointer("/data/0/embedding")
            .and_then(|e| e.as_array())
            .ok_or_else(|| TextGenError::MalformedResponse("no data[0].embedding".into()))?;
        let mut v: Vec<f32> = data
            .iter()
            .map(|x| x.as_f64().map(|f| f as f32))
            .collect::<Option<_>>()
            .ok_or_else(|| TextGenError::MalformedResponse("non-numeric embedding".into()))?;
        if v.len() != EMBEDDING_DIM {
            return Err(TextGenError::MalformedResponse(format!(
                "embedding has {} components, expected {EMBEDDING_DIM}",
                v.len()
            )));
        }
        normalize(&mut v);
        Ok(v)
    }
}
