//! Dialogue generation: session state, pattern and entity selection,
//! placeholder fulfillment and the per-round generate/validate loop.

mod fulfill;
mod run;
mod state;

use serde::{Deserialize, Serialize};

use crate::quality::QualityConfig;

pub use fulfill::{apply_bindings, fulfill_placeholders, Binding};
pub use run::{check_forged, derive_seed, forge_batch, run_dialogue, BatchOutput, Collaborators};
pub use state::{
    applicable_patterns, entity_weights, initial_choice, new_session, reweight, select_pattern, PatternChoice,
    SessionState, TurnPlan,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForgeConfig {
    pub rounds_min: u32,
    pub rounds_max: u32,
    /// Fresh questions tried per round before the dialogue is abandoned.
    pub retry_budget: u32,
    pub seed: u64,
    pub worker_count: usize,
    pub quality: QualityConfig,
}

impl Default for ForgeConfig {
    fn default() -> Self {
        ForgeConfig {
            rounds_min: 5,
            rounds_max: 8,
            retry_budget: 3,
            seed: 0,
            worker_count: 4,
            quality: QualityConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ForgeError {
    #[error("no applicable expansion pattern")]
    NoApplicablePattern,
    #[error("no binding for placeholder {0}")]
    UnboundPlaceholder(String),
    #[error("dialogue abandoned at round {round}: {reason}")]
    DialogueAbandoned { round: u32, reason: String },
    #[error("invalid configuration: {0}")]
    Config(String),
}
