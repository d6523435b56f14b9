//! Trigram cosine recomputed from scratch: sparse counts keyed by bucket,
//! FNV-1a written out by hand, all arithmetic in f64.

use std::collections::HashMap;

const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = OFFSET;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(PRIME);
    }
    h
}

pub fn buckets(text: &str) -> HashMap<u64, f64> {
    let mut out = HashMap::new();
    if text.is_empty() {
        return out;
    }
    let padded: Vec<char> = format!(" {} ", text.to_lowercase()).chars().collect();
    for i in 0..padded.len().saturating_sub(2) {
        let tri: String = padded[i..i + 3].iter().collect();
        *out.entry(fnv1a(tri.as_bytes()) % 384).or_insert(0.0) += 1.0;
    }
    out
}

pub fn cosine(a: &str, b: &str) -> f64 {
    let (x, y) = (buckets(a), buckets(b));
    let dot: f64 = x.iter().map(|(k, v)| v * y.get(k).copied().unwrap_or(0.0)).sum();
    let nx = x.values().map(|v| v * v).sum::<f64>().sqrt();
    let ny = y.values().map(|v| v * v).sum::<f64>().sqrt();
    if nx == 0.0 || ny == 0.0 {
        0.0
    } else {
        dot / (nx * ny)
    }
}
