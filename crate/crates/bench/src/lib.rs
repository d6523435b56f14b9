//! Shared inputs for the benches in benches/.

use gqlforge_core::corpus::Dialogue;
use gqlforge_core::fixture;
use gqlforge_core::forge::{forge_batch, Collaborators, ForgeConfig};
use gqlforge_core::quality::HashEmbedder;
use gqlforge_core::textgen::{MockGenerator, PromptTemplates};

/// A mock-forged batch on the bundled fixture.
pub fn forged(count: usize, seed: u64, workers: usize) -> Vec<Dialogue> {
    let g = fixture::graph();
    let m = MockGenerator::for_graph(&g);
    let t = PromptTemplates::builtin();
    let collab = Collaborators { generator: &m, embedder: &HashEmbedder, templates: &t };
    let config = ForgeConfig { seed, worker_count: workers, ..ForgeConfig::default() };
    forge_batch(count, &g, &collab, &config).expect("default config is valid").dialogues
}

/// Every distinct gold query of a batch.
pub fn queries(dialogues: &[Dialogue]) -> Vec<String> {
    let mut q: Vec<String> = dialogues.iter().flat_map(|d| d.turns.iter().map(|t| t.gql.clone())).collect();
    q.sort();
    q.dedup();
    q
}
