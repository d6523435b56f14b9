//! Shared setups: mock forge runs, synthetic datasets with known keyword
//! composition, random prediction sets and a recording generator.

use std::collections::BTreeMap;
use std::sync::Mutex;

use gqlforge_core::corpus::{Dialogue, Pattern, Turn};
use gqlforge_core::eval::PredictionSet;
use gqlforge_core::fixture;
use gqlforge_core::forge::{forge_batch, BatchOutput, Collaborators, ForgeConfig};
use gqlforge_core::quality::HashEmbedder;
use gqlforge_core::textgen::{
    GeneratorOutput, MockGenerator, Prompt, PromptKind, PromptTemplates, TextGenError, TextGenerator,
};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn mock_forge(count: usize, seed: u64, workers: usize) -> BatchOutput {
    let g = fixture::graph();
    let m = MockGenerator::for_graph(&g);
    let t = PromptTemplates::builtin();
    let collab = Collaborators { generator: &m, embedder: &HashEmbedder, templates: &t };
    let config = ForgeConfig { seed, worker_count: workers, ..ForgeConfig::default() };
    forge_batch(count, &g, &collab, &config).expect("valid config")
}

pub fn turn(round: u32, question: &str, gql: &str) -> Turn {
    Turn {
        round,
        question_raw: question.into(),
        question_complete: question.into(),
        gql: gql.into(),
        answer: vec![],
        pattern: if round == 1 { None } else { Some(Pattern::P1) },
        entities: vec![],
        relations: vec![],
    }
}

pub fn dialogue(id: &str, turns: Vec<Turn>) -> Dialogue {
    Dialogue { id: id.into(), meta: BTreeMap::new(), turns }
}

/// A random query over the fixture schema together with the number of
/// times each keyword was written into it.
pub fn composed_query(rng: &mut ChaCha8Rng) -> (String, BTreeMap<&'static str, usize>) {
    let mut n: BTreeMap<&'static str, usize> = BTreeMap::new();
    let mut bump = |k: &'static str, by: usize| *n.entry(k).or_default() += by;
    let mut s = String::from("MATCH (s:stock)");
    bump("MATCH", 1);
    if rng.random_bool(0.5) {
        s.push_str("-[:has_data]->(d:stock_data)");
    }
    let conds = rng.random_range(0..4usize);
    if conds > 0 {
        s.push_str(" WHERE ");
        bump("WHERE", 1);
        let mut parts = Vec::new();
        for k in 0..conds {
            let c = if rng.random_bool(0.3) {
                bump("NOT", 1);
                format!("NOT s.opening_price > {k}")
            } else {
                format!("s.market_cap >= {}", 10 * k)
            };
            parts.push(c);
        }
        for p in parts.iter_mut().skip(1) {
            let op = if rng.random_bool(0.5) { "AND" } else { "OR" };
            bump(op, 1);
            *p = format!("{op} {p}");
        }
        s.push_str(&parts.join(" "));
    }
    s.push_str(" RETURN ");
    bump("RETURN", 1);
    let agg = *["", "COUNT", "SUM", "AVG", "MAX", "MIN"].choose(rng).unwrap();
    if agg.is_empty() {
        if rng.random_bool(0.3) {
            s.push_str("DISTINCT ");
            bump("DISTINCT", 1);
        }
        s.push_str("s.name");
        if rng.random_bool(0.5) {
            s.push_str(" ORDER BY s.code DESC");
            bump("ORDER BY", 1);
        }
    } else {
        s.push_str(&format!("{agg}(s.opening_price)"));
        bump(agg, 1);
    }
    if rng.random_bool(0.4) {
        s.push_str(&format!(" LIMIT {}", rng.random_range(1..5)));
        bump("LIMIT", 1);
    }
    (s, n)
}

/// Predictions drawn per turn from: the gold text, a reformatted copy of
/// it, another turn's query, garbage, or nothing.
pub fn random_predictions(gold: &[Dialogue], seed: u64) -> PredictionSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all: Vec<&str> = gold.iter().flat_map(|d| d.turns.iter().map(|t| t.gql.as_str())).collect();
    let mut p = PredictionSet::default();
    for d in gold {
        for t in &d.turns {
            let pick = match rng.random_range(0..5) {
                0 => Some(t.gql.clone()),
                1 => Some(t.gql.replacen("MATCH", "match", 1).replace(" RETURN ", "\n  RETURN  ")),
                2 => Some(all.choose(&mut rng).unwrap().to_string()),
                3 => Some("MATCH (n:nothing) RETURN n".to_string()),
                _ => None,
            };
            if let Some(q) = pick {
                p.insert(&d.id, t.round, &q).unwrap();
            }
        }
    }
    p
}

/// Wraps a generator and keeps every prompt kind with its reply.
pub struct Recorder<G> {
    pub inner: G,
    pub calls: Mutex<Vec<(PromptKind, String)>>,
}

impl<G> Recorder<G> {
    pub fn new(inner: G) -> Self {
        Recorder { inner, calls: Mutex::new(Vec::new()) }
    }

    pub fn take(&self) -> Vec<(PromptKind, String)> {
        std::mem::take(&mut *self.calls.lock().unwrap())
    }
}

impl<G: TextGenerator> TextGenerator for Recorder<G> {
    fn generate(&self, prompt: &Prompt, seed: u64) -> Result<GeneratorOutput, TextGenError> {
        let out = self.inner.generate(prompt, seed)?;
        self.calls.lock().unwrap().push((prompt.kind, out.text().to_string()));
        Ok(out)
    }
}
