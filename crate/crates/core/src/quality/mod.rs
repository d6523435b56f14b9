//! Query validation with repair loops, and the two dataset filters.

mod embed;
mod filter;
mod validate;

use serde::{Deserialize, Serialize};

pub use embed::{cosine, fallback_embed, Embedder, HashEmbedder, RemoteEmbedder, EMBEDDING_DIM};
pub use filter::{
    dialogue_text, filter_embedding, filter_masked_gql, DiscardReason, Discarded, FilterReport, MaskMode,
};
pub use validate::{validate_and_optimize, RegenerateReason, ValidationOutcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QualityConfig {
    pub tau_sem: f64,
    pub dedup_threshold: f64,
    pub masked_overlap_limit: usize,
    pub repair_attempts: u32,
    pub mask_mode: MaskMode,
}

impl Default for QualityConfig {
    fn default() -> Self {
        QualityConfig {
            tau_sem: 0.8,
            dedup_threshold: 0.6,
            masked_overlap_limit: 3,
            repair_attempts: 3,
            mask_mode: MaskMode::Pairwise,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum QualityError {
    #[error("dialogue {id}, round {round}: {source}")]
    Parse {
        id: String,
        round: u32,
        #[source]
        source: crate::gql::GqlError,
    },
    #[error("embedding failed: {0}")]
    Embedding(#[from] crate::textgen::TextGenError),
}
