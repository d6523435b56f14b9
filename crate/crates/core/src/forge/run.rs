use std::collections::BTreeSet;

use rand::Rng;
use rayon::prelude::*;

use crate::corpus::{Dialogue, Pattern, Turn};
use crate::gql;
use crate::graph::{find_placeholders, PropertyGraph, Value};
use crate::quality::{validate_and_optimize, Embedder, ValidationOutcome};
use crate::textgen::{Form, GeneratorOutput, PromptArgs, PromptKind, PromptTemplates, TextGenerator};

use super::fulfill::{apply_bindings, fulfill_placeholders};
use super::state::{initial_choice, new_session, plan_turn, select_pattern, SessionState, TurnPlan};
use super::{ForgeConfig, ForgeError};

/// The generator, embedder and templates shared by every session.
#[derive(Clone, Copy)]
pub struct Collaborators<'a> {
    pub generator: &'a dyn TextGenerator,
    pub embedder: &'a dyn Embedder,
    pub templates: &'a PromptTemplates,
}

fn answer_entities(answer: &[Value], plan: &TurnPlan, graph: &PropertyGraph) -> Vec<String> {
    let target = match &plan.focus.form {
        Form::Superlative { target, .. } | Form::Neighbour { target, .. } | Form::Filter { target, .. } => target,
        _ => return Vec::new(),
    };
    let Some(bound) = graph.schema().node_type(target).and_then(|t| t.bound_property()) else { return Vec::new() };
    answer.iter().filter_map(|v| graph.find_node(target, &bound.name, v)).map(|i| graph.node(i).id.clone()).collect()
}

/// What "it" points at after the last turn: a single named answer, else
/// the last subject.
fn referent(state: &SessionState, graph: &PropertyGraph) -> Option<String> {
    let (turn, plan) = (state.history.last()?, state.plans.last()?);
    match (turn.answer.len(), answer_entities(&turn.answer, plan, graph).as_slice()) {
        (1, [id]) => Some(id.clone()),
        _ => Some(plan.subject.clone()),
    }
}

fn edge_labels(gql_text: &str) -> Vec<String> {
    let Ok(q) = gql::parse(gql_text) else { return Vec::new() };
    let mut out: Vec<String> = Vec::new();
    for e in q.edges() {
        if !out.contains(&e.label) {
            out.push(e.label.clone());
        }
    }
    out
}

/// One attempt at a round: plan, question, fulfillment, query, validation.
fn attempt_round(
    state: &mut SessionState,
    round: u32,
    graph: &PropertyGraph,
    collab: &Collaborators,
    config: &ForgeConfig,
) -> Result<(Turn, TurnPlan), String> {
    let schema = graph.schema();
    let plan = if round == 1 {
        initial_choice(state, graph).map_err(|e| e.to_string())?
    } else {
        let choice = select_pattern(state, graph).map_err(|e| e.to_string())?;
        plan_turn(state, graph, &choice).map_err(|e| e.to_string())?
    };

    let args = PromptArgs {
        schema: Some(schema),
        history: &state.history,
        pattern: plan.pattern,
        gql: None,
        error: None,
        question: None,
        extra: Default::default(),
    }
    .with("FOCUS", plan.focus.render())
    .with(
        "REFERENCE",
        if referent(state, graph).as_deref() == Some(plan.subject.as_str()) { "pronoun" } else { "explicit" },
    );
    let prompt = collab.templates.build(PromptKind::Question, &args).map_err(|e| e.to_string())?;
    let (raw, complete) = match collab.generator.generate(&prompt, state.rng.random()).map_err(|e| e.to_string())? {
        GeneratorOutput::Question { raw, complete } => (raw, complete),
        GeneratorOutput::Text(t) => (t.clone(), t),
    };

    let chosen = vec![plan.subject.clone()];
    let (complete, bindings) = fulfill_placeholders(&complete, &chosen, &state.entity_set, graph, &mut state.rng)
        .map_err(|e| e.to_string())?;
    let raw = apply_bindings(&raw, &bindings).map_err(|e| e.to_string())?;
    if !find_placeholders(&complete).is_empty() {
        return Err("question still holds placeholders".into());
    }

    let args = PromptArgs {
        schema: Some(schema),
        history: &state.history,
        pattern: plan.pattern,
        gql: None,
        error: None,
        question: Some(&complete),
        extra: Default::default(),
    }
    .with("ROUND", round.to_string());
    let prompt = collab.templates.build(PromptKind::Gql, &args).map_err(|e| e.to_string())?;
    let gql_text = collab.generator.generate(&prompt, state.rng.random()).map_err(|e| e.to_string())?.into_text();

    let outcome = validate_and_optimize(
        &complete,
        &gql_text,
        graph,
        collab.generator,
        collab.embedder,
        &config.quality,
        collab.templates,
        state.rng.random(),
    );
    let (gql_final, result) = match &outcome {
        ValidationOutcome::RegenerateQuestion(reason) => return Err(format!("{reason:?}")),
        o => o.accepted().map(|(g, r)| (g.to_string(), r.clone())).expect("accepted"),
    };
    let answer = result.answer_values();

    let mut entities: Vec<String> = Vec::new();
    for id in bindings.iter().filter_map(|b| b.node.clone()).chain(answer_entities(&answer, &plan, graph)) {
        if !entities.contains(&id) {
            entities.push(id);
        }
    }
    if plan.pattern.is_some_and(|p| p != Pattern::P4) && !entities.iter().any(|e| state.entity_set.contains(e)) {
        return Err("question lost its link to earlier turns".into());
    }
    let turn = Turn {
        round,
        question_raw: raw,
        question_complete: complete,
        relations: edge_labels(&gql_final),
        gql: gql_final,
        answer,
        pattern: plan.pattern,
        entities,
    };
    Ok((turn, plan))
}

/// Runs a session until it reaches its target length. Each round gets
/// `retry_budget` fresh questions before the dialogue is abandoned.
pub fn run_dialogue(
    state: &mut SessionState,
    id: &str,
    graph: &PropertyGraph,
    collab: &Collaborators,
    config: &ForgeConfig,
) -> Result<Dialogue, ForgeError> {
    while (state.history.len() as u32) < state.target_rounds {
        let round = state.history.len() as u32 + 1;
        let mut last_reason = String::from("no attempt made");
        let mut done = false;
        for _ in 0..config.retry_budget {
            match attempt_round(state, round, graph, collab, config) {
                Ok((turn, plan)) => {
                    tracing::debug!(dialogue = id, round, pattern = ?turn.pattern, "turn accepted");
                    state.record(turn, plan, graph);
                    done = true;
                    break;
                }
                Err(reason) => {
                    tracing::debug!(dialogue = id, round, %reason, "round retried");
                    last_reason = reason;
                }
            }
        }
        if !done {
            return Err(ForgeError::DialogueAbandoned { round, reason: last_reason });
        }
    }
    let mut meta = std::collections::BTreeMap::new();
    meta.insert("seed".to_string(), serde_json::json!(state.seed));
    meta.insert("schema".to_string(), serde_json::json!(graph.schema().fingerprint()));
    meta.insert("target_rounds".to_string(), serde_json::json!(state.target_rounds));
    meta.insert("rounds_min".to_string(), serde_json::json!(config.rounds_min));
    meta.insert("rounds_max".to_string(), serde_json::json!(config.rounds_max));
    meta.insert("retry_budget".to_string(), serde_json::json!(config.retry_budget));
    Ok(Dialogue { id: id.to_string(), meta, turns: state.history.clone() })
}

#[derive(Debug, Clone, Default)]
pub struct BatchOutput {
    pub dialogues: Vec<Dialogue>,
    /// (id, reason) for every index that produced no dialogue.
    pub abandoned: Vec<(String, String)>,
}

/// Seed for the k-th sub-task of a seeded job (splitmix64 finalizer).
pub fn derive_seed(seed: u64, k: u64) -> u64 {
    let mut z = seed ^ k.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce5_e9b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generates `count` dialogues in parallel. Index i is seeded from the
/// batch seed alone, so output does not depend on the worker count. An
/// abandoned session is restarted with a derived seed up to `retry_budget`
/// times.
pub fn forge_batch(
    count: usize,
    graph: &PropertyGraph,
    collab: &Collaborators,
    config: &ForgeConfig,
) -> Result<BatchOutput, ForgeError> {
    new_session(config, 0)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.worker_count.max(1))
        .build()
        .map_err(|e| ForgeError::Config(e.to_string()))?;
    let results: Vec<(String, Result<Dialogue, ForgeError>)> = pool.install(|| {
        (0..count)
            .into_par_iter()
            .map(|i| {
                let id = format!("mt-{i:06}");
                let base = derive_seed(config.seed, i as u64);
                let mut last = Err(ForgeError::Config("retry budget is zero".into()));
                for k in 0..config.retry_budget.max(1) {
                    let seed = if k == 0 { base } else { derive_seed(base, k as u64) };
                    let mut state = new_session(config, seed).expect("checked above");
                    last = run_dialogue(&mut state, &id, graph, collab, config);
                    if last.is_ok() {
                        break;
                    }
                }
                (id, last)
            })
            .collect()
    });
    let mut out = BatchOutput::default();
    for (id, r) in results {
        match r {
            Ok(d) => out.dialogues.push(d),
            Err(e) => {
                tracing::warn!(dialogue = %id, error = %e, "dialogue abandoned");
                out.abandoned.push((id, e.to_string()));
            }
        }
    }
    Ok(out)
}

/// Structural checks on a generated dialogue: length within the configured
/// range, and every non-P4 turn sharing an entity with earlier turns.
pub fn check_forged(d: &Dialogue, rounds_min: u32, rounds_max: u32) -> Result<(), String> {
    let n = d.turns.len() as u32;
    if n < rounds_min || n > rounds_max {
        return Err(format!("{} has {n} turns, outside {rounds_min}..={rounds_max}", d.id));
    }
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for (k, t) in d.turns.iter().enumerate() {
        if k > 0 && t.pattern != Some(Pattern::P4) && !t.entities.iter().any(|e| seen.contains(e.as_str())) {
            return Err(format!("{} turn {} shares no entity with earlier turns", d.id, t.round));
        }
        if k == 0 && t.pattern.is_some() {
            return Err(format!("{} opens with a pattern", d.id));
        }
        if k > 0 && t.pattern.is_none() {
            return Err(format!("{} turn {} has no pattern", d.id, t.round));
        }
        seen.extend(t.entities.iter().map(String::as_str));
    }
    Ok(())
}
