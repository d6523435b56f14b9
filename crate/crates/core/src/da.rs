//! Dependency-aware inference: structured context, question reformulation,
//! sub-schema extraction, then generate, execute, check alignment and refine
//! at most once.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Dialogue;
use crate::eval::PredictionSet;
use crate::forge::derive_seed;
use crate::gql::{self, Expr, Literal, ResultTable};
use crate::graph::{find_placeholders, GraphSchema, PropertyGraph, Value};
use crate::quality::{cosine, Embedder};
use crate::textgen::nl::{humanize, Form};
use crate::textgen::{
    Lexicon, NlQuestion, PromptArgs, PromptKind, PromptTemplates, TextGenError, TextGenerator, EMPTY_RESULT,
    SEMANTIC_MISMATCH,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DaError {
    #[error("reformulation failed: {0}")]
    Reformulation(String),
    #[error("query generation failed: {0}")]
    Generation(TextGenError),
    #[error("refinement failed: {0}")]
    Refine(TextGenError),
    #[error("alignment check failed: {0}")]
    Alignment(TextGenError),
}

/// Entities and relations pulled out of one earlier turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextTurn {
    pub question: String,
    pub explicit: String,
    pub gql: String,
    pub answer: Vec<Value>,
    pub entities: Vec<String>,
    pub relations: Vec<String>,
    pub node_types: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StructuredContext {
    pub turns: Vec<ContextTurn>,
    pub entities: BTreeSet<String>,
    pub relations: BTreeSet<String>,
}

/// Entity names (string literals and string answers), edge labels and node
/// labels of a query. Unparseable queries contribute only their answers.
pub fn analyze(gql_text: &str, answer: &[Value]) -> (Vec<String>, Vec<String>, Vec<String>) {
    let mut entities: Vec<String> = Vec::new();
    let mut relations: Vec<String> = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    let push = |v: &mut Vec<String>, s: &str| {
        if !v.iter().any(|x| x == s) {
            v.push(s.to_string());
        }
    };
    if let Ok(q) = gql::parse(gql_text) {
        for n in q.nodes() {
            if let Some(l) = &n.label {
                push(&mut labels, l);
            }
            for (_, lit) in &n.props {
                if let Literal::Str(s) = lit {
                    push(&mut entities, s);
                }
            }
        }
        for e in q.edges() {
            push(&mut relations, &e.label);
        }
        for e in q.all_exprs() {
            e.walk(&mut |x| {
                if let Expr::Lit(Literal::Str(s)) = x {
                    push(&mut entities, s);
                }
            });
        }
    }
    for v in answer {
        if let Value::Str(s) = v {
            push(&mut entities, s);
        }
    }
    (entities, relations, labels)
}

impl StructuredContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, question: &str, explicit: &str, gql_text: &str, answer: Vec<Value>) {
        let (entities, relations, node_types) = analyze(gql_text, &answer);
        self.entities.extend(entities.iter().cloned());
        self.relations.extend(relations.iter().cloned());
        self.turns.push(ContextTurn {
            question: question.to_string(),
            explicit: explicit.to_string(),
            gql: gql_text.to_string(),
            answer,
            entities,
            relations,
            node_types,
        });
    }

    /// Numbered lines per turn: the question as asked, then its explicit form.
    pub fn render(&self) -> String {
        if self.turns.is_empty() {
            return "(empty)".into();
        }
        let mut s = String::new();
        for (k, t) in self.turns.iter().enumerate() {
            let r = k + 1;
            let answer = serde_json::to_string(&t.answer).expect("values serialize");
            let _ = writeln!(s, "Asked{r}: {}", t.question);
            let _ = writeln!(s, "Q{r}: {}", t.explicit);
            let _ = writeln!(s, "GQL{r}: {}", t.gql);
            let _ = writeln!(s, "A{r}: {answer}");
            let _ = writeln!(s, "Entities{r}: {}", t.entities.join(", "));
            let _ = writeln!(s, "Relations{r}: {}", t.relations.join(", "));
        }
        s.trim_end().to_string()
    }
}

fn fold(s: &str) -> String {
    humanize(s).to_lowercase()
}

fn mentions(text: &str, term: &str) -> bool {
    let term = fold(term);
    if term.is_empty() {
        return false;
    }
    text.match_indices(&term).any(|(i, _)| {
        let before = text[..i].chars().next_back();
        let after = text[i + term.len()..].chars().next();
        !before.is_some_and(char::is_alphanumeric) && !after.is_some_and(char::is_alphanumeric)
    })
}

/// Types touched by earlier turns, plus types whose name, property names or
/// known entity names occur in the question. A node type left without any
/// edge brings in its incident edges; every edge brings in both endpoints.
/// Falls back to the full schema when nothing matches.
pub fn extract_subschema(
    schema: &GraphSchema,
    context: &StructuredContext,
    explicit: &str,
    lexicon: &Lexicon,
) -> GraphSchema {
    let text = fold(explicit);
    let mut nodes: BTreeSet<String> = BTreeSet::new();
    let mut edges: BTreeSet<String> = BTreeSet::new();
    for t in &context.turns {
        nodes.extend(t.node_types.iter().filter(|n| schema.node_type(n).is_some()).cloned());
        edges.extend(t.relations.iter().filter(|e| schema.edge_type(e).is_some()).cloned());
    }
    for n in &schema.node_types {
        if mentions(&text, &n.name) || n.properties.iter().any(|p| mentions(&text, &p.name)) {
            nodes.insert(n.name.clone());
        }
    }
    for e in &schema.edge_types {
        if mentions(&text, &e.name) || e.properties.iter().any(|p| mentions(&text, &p.name)) {
            edges.insert(e.name.clone());
        }
    }
    for name in lexicon.names_in(explicit) {
        if let Some(t) = lexicon.type_of(name) {
            nodes.insert(t.to_string());
        }
    }
    if nodes.is_empty() && edges.is_empty() {
        return schema.clone();
    }
    let isolated: Vec<String> =
        nodes.iter().filter(|n| !schema.incident_edges(n).any(|e| edges.contains(&e.name))).cloned().collect();
    for n in isolated {
        edges.extend(schema.incident_edges(&n).map(|e| e.name.clone()));
    }
    for e in &edges {
        let et = schema.edge_type(e).expect("known edge");
        nodes.insert(et.source.clone());
        nodes.insert(et.target.clone());
    }
    GraphSchema {
        node_types: schema.node_types.iter().filter(|n| nodes.contains(&n.name)).cloned().collect(),
        edge_types: schema.edge_types.iter().filter(|e| edges.contains(&e.name)).cloned().collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum AlignMode {
    /// Non-empty result whose projected property is the one asked about.
    Shape,
    /// Reverse-generated question similar to the explicit one.
    Reverse { tau_sem: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DaConfig {
    pub align: AlignMode,
    pub seed: u64,
    pub worker_count: usize,
}

impl Default for DaConfig {
    fn default() -> Self {
        DaConfig { align: AlignMode::Shape, seed: 0, worker_count: 4 }
    }
}

#[derive(Clone, Copy)]
pub struct DaCollaborators<'a> {
    pub generator: &'a dyn TextGenerator,
    pub embedder: &'a dyn Embedder,
    pub templates: &'a PromptTemplates,
    pub lexicon: &'a Lexicon,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TurnInference {
    pub explicit: String,
    pub subschema: GraphSchema,
    pub gql: String,
    pub refined: bool,
    /// False when the returned query still fails to execute.
    pub executable: bool,
    pub answer: Vec<Value>,
}

/// Rewrites the question so it stands alone.
pub fn reformulate(
    question: &str,
    context: &StructuredContext,
    graph: &PropertyGraph,
    collab: &DaCollaborators,
    seed: u64,
) -> Result<String, DaError> {
    let entities: Vec<&str> = context.entities.iter().map(String::as_str).collect();
    let mut args = PromptArgs {
        schema: Some(graph.schema()),
        history: &[],
        pattern: None,
        gql: None,
        error: None,
        question: Some(question),
        extra: BTreeMap::new(),
    }
    .with("CONTEXT", context.render())
    .with("ENTITIES", entities.join(", "));
    if let Some(d) = graph.latest_date() {
        args = args.with("REFERENCE_DATE", d);
    }
    let prompt =
        collab.templates.build(PromptKind::Reformulate, &args).map_err(|e| DaError::Reformulation(e.to_string()))?;
    let out = collab.generator.generate(&prompt, seed).map_err(|e| DaError::Reformulation(e.to_string()))?.into_text();
    let out = out.trim().to_string();
    if out.is_empty() || !find_placeholders(&out).is_empty() {
        return Err(DaError::Reformulation(format!("unusable rewrite {out:?}")));
    }
    Ok(out)
}

fn projected_properties(gql_text: &str) -> Vec<String> {
    let Ok(q) = gql::parse(gql_text) else { return Vec::new() };
    let mut out = Vec::new();
    for r in &q.returns {
        r.walk(&mut |e| {
            if let Expr::Prop { key, .. } = e {
                out.push(key.clone());
            }
        });
    }
    out
}

/// The property a well-formed answer projects: the one asked about, or the
/// naming property of the listed type.
fn expected_projection(form: &Form, schema: &GraphSchema) -> Option<String> {
    match form {
        Form::Superlative { target, .. } | Form::Neighbour { target, .. } | Form::Filter { target, .. } => {
            schema.node_type(target)?.bound_property().map(|p| p.name.clone())
        }
        _ => form.asked_property().map(str::to_string),
    }
}

/// `Ok(None)` when aligned, otherwise the complaint handed to the refiner.
fn misalignment(
    explicit: &str,
    gql_text: &str,
    table: &Result<ResultTable, String>,
    schema: &GraphSchema,
    collab: &DaCollaborators,
    mode: AlignMode,
    seed: u64,
) -> Result<Option<String>, DaError> {
    match table {
        Err(e) => return Ok(Some(e.clone())),
        Ok(t) if t.is_empty() => return Ok(Some(format!("{EMPTY_RESULT}: the query returned no rows"))),
        Ok(_) => {}
    }
    match mode {
        AlignMode::Shape => {
            let asked = NlQuestion::parse(explicit, schema).and_then(|nl| expected_projection(&nl.form, schema));
            let projected = projected_properties(gql_text);
            Ok(match asked {
                Some(p) if !projected.contains(&p) => Some(format!(
                    "{SEMANTIC_MISMATCH}: the query returns {} but the question asks for {}",
                    projected.join(", "),
                    humanize(&p)
                )),
                _ => None,
            })
        }
        AlignMode::Reverse { tau_sem } => {
            let args = PromptArgs {
                schema: Some(schema),
                history: &[],
                pattern: None,
                gql: Some(gql_text),
                error: None,
                question: None,
                extra: BTreeMap::new(),
            };
            let prompt = collab.templates.build(PromptKind::Reverse, &args).map_err(DaError::Alignment)?;
            let back = collab.generator.generate(&prompt, seed).map_err(DaError::Alignment)?.into_text();
            let a = collab.embedder.embed(explicit).map_err(DaError::Alignment)?;
            let b = collab.embedder.embed(&back).map_err(DaError::Alignment)?;
            let sim = cosine(&a, &b);
            Ok((sim < tau_sem)
                .then(|| format!("{SEMANTIC_MISMATCH}: the query reads as \"{back}\" (similarity {sim:.3})")))
        }
    }
}

fn run(gql_text: &str, graph: &PropertyGraph) -> Result<ResultTable, String> {
    gql::execute_text(gql_text, graph).map_err(|e| e.to_string())
}

/// One turn: reformulate, narrow the schema, generate, execute, and refine
/// once if the result does not line up with the question.
pub fn infer_turn(
    question: &str,
    round: u32,
    context: &StructuredContext,
    graph: &PropertyGraph,
    collab: &DaCollaborators,
    config: &DaConfig,
    seed: u64,
) -> Result<TurnInference, DaError> {
    let explicit = reformulate(question, context, graph, collab, derive_seed(seed, 1))?;
    let subschema = extract_subschema(graph.schema(), context, &explicit, collab.lexicon);
    let args = PromptArgs {
        schema: Some(&subschema),
        history: &[],
        pattern: None,
        gql: None,
        error: None,
        question: Some(&explicit),
        extra: BTreeMap::new(),
    }
    .with("ROUND", round.to_string());
    let prompt = collab.templates.build(PromptKind::Gql, &args).map_err(DaError::Generation)?;
    let candidate = collab.generator.generate(&prompt, derive_seed(seed, 2)).map_err(DaError::Generation)?.into_text();
    let table = run(&candidate, graph);
    let complaint =
        misalignment(&explicit, &candidate, &table, &subschema, collab, config.align, derive_seed(seed, 3))?;

    let (gql_text, table, refined) = match complaint {
        None => (candidate, table, false),
        Some(error) => {
            tracing::debug!(round, %error, "refining");
            let args = PromptArgs {
                schema: Some(&subschema),
                history: &[],
                pattern: None,
                gql: Some(&candidate),
                error: Some(&error),
                question: Some(&explicit),
                extra: BTreeMap::new(),
            };
            let prompt = collab.templates.build(PromptKind::Repair, &args).map_err(DaError::Refine)?;
            let fixed = collab.generator.generate(&prompt, derive_seed(seed, 4)).map_err(DaError::Refine)?.into_text();
            let table = run(&fixed, graph);
            (fixed, table, true)
        }
    };
    let (executable, answer) = match table {
        Ok(t) => (true, t.answer_values()),
        Err(_) => (false, Vec::new()),
    };
    Ok(TurnInference { explicit, subschema, gql: gql_text, refined, executable, answer })
}

/// Runs every turn of a dialogue in order, feeding predictions (not gold
/// queries) back into the context.
pub fn infer_dialogue(
    dialogue: &Dialogue,
    graph: &PropertyGraph,
    collab: &DaCollaborators,
    config: &DaConfig,
    seed: u64,
) -> Result<Vec<TurnInference>, DaError> {
    let mut context = StructuredContext::new();
    let mut out = Vec::with_capacity(dialogue.turns.len());
    for t in &dialogue.turns {
        let inf =
            infer_turn(&t.question_raw, t.round, &context, graph, collab, config, derive_seed(seed, t.round as u64))?;
        context.record(&t.question_raw, &inf.explicit, &inf.gql, inf.answer.clone());
        out.push(inf);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DaStats {
    pub turns: usize,
    pub refined: usize,
    pub unexecutable: usize,
}

/// Predictions for every dialogue, computed in parallel.
pub fn infer_dataset(
    dialogues: &[Dialogue],
    graph: &PropertyGraph,
    collab: &DaCollaborators,
    config: &DaConfig,
) -> Result<(PredictionSet, DaStats), DaError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.worker_count.max(1))
        .build()
        .map_err(|e| DaError::Generation(TextGenError::Transport(e.to_string())))?;
    let results: Vec<Result<Vec<TurnInference>, DaError>> = pool.install(|| {
        dialogues
            .par_iter()
            .enumerate()
            .map(|(i, d)| infer_dialogue(d, graph, collab, config, derive_seed(config.seed, i as u64)))
            .collect()
    });
    let mut preds = PredictionSet::default();
    let mut stats = DaStats::default();
    for (d, r) in dialogues.iter().zip(results) {
        for (t, inf) in d.turns.iter().zip(r?) {
            stats.turns += 1;
            stats.refined += inf.refined as usize;
            stats.unexecutable += !inf.executable as usize;
            preds.entries.insert((d.id.clone(), t.round), inf.gql);
        }
    }
    Ok((preds, stats))
}
