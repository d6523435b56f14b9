use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Pattern;
use crate::gql::{self, AggFunc, Expr, Query};
use crate::graph::{GraphSchema, PropertyGraph, ValueKind};

use super::nl::{humanize, resolve_query, Focus, Form, Lexicon, NlQuestion};
use super::{reform, GeneratorOutput, Prompt, PromptKind, TextGenError, TextGenerator};

/// Error text prefixes the mock repairs by translating the question again.
pub const SEMANTIC_MISMATCH: &str = "semantic mismatch";
pub const EMPTY_RESULT: &str = "empty result";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FaultKind {
    /// `RETURN` becomes `RETRUN`; fixed from the syntax error.
    MisspelledKeyword,
    /// First `)` dropped; fixed from the syntax error.
    MissingParen,
    /// A node label the schema does not know; the mock cannot fix it.
    UnknownLabel,
    /// Executable query returning the wrong property.
    WrongProperty,
}

impl FaultKind {
    pub const ALL: [FaultKind; 4] =
        [FaultKind::MisspelledKeyword, FaultKind::MissingParen, FaultKind::UnknownLabel, FaultKind::WrongProperty];
}

/// When and how the mock breaks the queries it writes.
#[derive(Debug, Clone, PartialEq)]
pub struct FaultPlan {
    /// Chance of a fault on any query prompt, drawn from the seed.
    pub rate: f64,
    /// Rounds (from the ROUND slot) that always get a fault.
    pub rounds: BTreeSet<u32>,
    pub kinds: Vec<FaultKind>,
}

impl Default for FaultPlan {
    fn default() -> Self {
        FaultPlan {
            rate: 0.0,
            rounds: BTreeSet::new(),
            kinds: vec![FaultKind::MisspelledKeyword, FaultKind::MissingParen],
        }
    }
}

impl FaultPlan {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn always(kind: FaultKind) -> Self {
        FaultPlan { rate: 1.0, rounds: BTreeSet::new(), kinds: vec![kind] }
    }

    pub fn on_rounds(rounds: impl IntoIterator<Item = u32>, kind: FaultKind) -> Self {
        FaultPlan { rate: 0.0, rounds: rounds.into_iter().collect(), kinds: vec![kind] }
    }

    pub fn random(rate: f64) -> Self {
        FaultPlan { rate, ..Default::default() }
    }

    fn pick(&self, round: Option<u32>, seed: u64) -> Option<FaultKind> {
        if self.kinds.is_empty() {
            return None;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x00fa_0175_eed0);
        let forced = round.is_some_and(|r| self.rounds.contains(&r));
        let drawn = self.rate > 0.0 && rng.random_bool(self.rate.min(1.0));
        (forced || drawn).then(|| *self.kinds.choose(&mut rng).expect("non-empty"))
    }
}

/// Deterministic template-driven generator; output depends only on the
/// prompt, the seed and the generator's configuration.
#[derive(Debug, Clone, Default)]
pub struct MockGenerator {
    lexicon: Lexicon,
    faults: FaultPlan,
}

impl MockGenerator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Knows the entity names of `graph`, as a model trained on the domain would.
    pub fn for_graph(graph: &PropertyGraph) -> Self {
        MockGenerator { lexicon: Lexicon::from_graph(graph), ..Self::default() }
    }

    pub fn with_lexicon(mut self, lexicon: Lexicon) -> Self {
        self.lexicon = lexicon;
        self
    }

    pub fn with_faults(mut self, faults: FaultPlan) -> Self {
        self.faults = faults;
        self
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    /// Template translation of a question; falls back to a generic lookup.
    pub fn translate(&self, question: &str, schema: &GraphSchema) -> String {
        if let Some(nl) = NlQuestion::parse(question, schema) {
            if let Ok(q) = resolve_query(&nl, schema, &self.lexicon) {
                return q.to_string();
            }
        }
        let t = schema
            .node_types
            .iter()
            .find(|t| t.is_nameable())
            .or(schema.node_types.first())
            .map(|t| (t.name.clone(), t.bound_property().or(t.properties.first()).map(|p| p.name.clone())));
        match t {
            Some((name, Some(p))) => format!("MATCH (n:{name}) RETURN n.{p}"),
            Some((name, None)) => format!("MATCH (n:{name}) RETURN n"),
            None => "MATCH (n) RETURN n".to_string(),
        }
    }

    fn question(&self, prompt: &Prompt, schema: &GraphSchema, seed: u64) -> Result<GeneratorOutput, TextGenError> {
        let pattern = prompt
            .slot("QUESTION_EXPANDING_PATTERN")
            .and_then(|s| s.split_whitespace().next())
            .and_then(|t| t.parse::<Pattern>().ok());
        let focus = match prompt.slot("FOCUS").and_then(Focus::parse) {
            Some(f) => f,
            None => fallback_focus(schema, pattern, seed)?,
        };
        let nl = focus.question(schema).ok_or_else(|| {
            TextGenError::Unrenderable(format!("focus type {} has no placeholder", focus.entity_type))
        })?;
        let complete = nl.render();
        let last_q = prompt.slot("DIALOGUE_HISTORY").and_then(|h| reform::parse_context(h).pop()).map(|c| c.question);
        let explicit = prompt.slot("REFERENCE") == Some("explicit");
        let raw = raw_question(pattern, &nl, last_q.as_deref(), explicit).unwrap_or_else(|| complete.clone());
        Ok(GeneratorOutput::Question { raw, complete })
    }

    fn gql(&self, prompt: &Prompt, schema: &GraphSchema, seed: u64) -> Result<GeneratorOutput, TextGenError> {
        let question = prompt.slot("QUESTION").unwrap_or_default();
        let text = self.translate(question, schema);
        let round = prompt.slot("ROUND").and_then(|r| r.trim().parse().ok());
        let text = match self.faults.pick(round, seed) {
            Some(kind) => inject(&text, kind, schema),
            None => text,
        };
        Ok(GeneratorOutput::Text(text))
    }

    fn reverse(&self, prompt: &Prompt, schema: &GraphSchema) -> GeneratorOutput {
        let gql = prompt.slot("GQL").unwrap_or_default();
        let text = match gql::parse(gql) {
            Ok(q) => match NlQuestion::from_query(&q, schema) {
                Some(nl) => nl.render(),
                None => describe(&q),
            },
            Err(_) => "The query could not be read.".to_string(),
        };
        GeneratorOutput::Text(text)
    }

    fn repair(&self, prompt: &Prompt, schema: Option<&GraphSchema>) -> GeneratorOutput {
        let gql = prompt.slot("GQL").unwrap_or_default();
        let error = prompt.slot("ERROR").unwrap_or_default();
        let question = prompt.slot("QUESTION").unwrap_or_default();
        let fixed = if error.starts_with("syntax error") {
            fix_syntax(gql, error).unwrap_or_else(|| gql.to_string())
        } else if error.starts_with(SEMANTIC_MISMATCH) || error.starts_with(EMPTY_RESULT) {
            match schema {
                Some(s) => self.translate(question, s),
                None => gql.to_string(),
            }
        } else {
            gql.to_string()
        };
        GeneratorOutput::Text(fixed)
    }
}

impl TextGenerator for MockGenerator {
    fn generate(&self, prompt: &Prompt, seed: u64) -> Result<GeneratorOutput, TextGenError> {
        let schema = match prompt.slot("SCHEMA") {
            Some(text) => Some(
                GraphSchema::from_json_str(text)
                    .map_err(|e| TextGenError::Unrenderable(format!("schema slot: {e}")))?,
            ),
            None => None,
        };
        let need = || schema.as_ref().ok_or_else(|| TextGenError::MissingSlot("schema".into()));
        match prompt.kind {
            PromptKind::Question => self.question(prompt, need()?, seed),
            PromptKind::Gql => self.gql(prompt, need()?, seed),
            PromptKind::Reverse => Ok(self.reverse(prompt, need()?)),
            PromptKind::Repair => Ok(self.repair(prompt, schema.as_ref())),
            PromptKind::Reformulate => {
                let context = reform::parse_context(prompt.slot("CONTEXT").unwrap_or_default());
                let date = prompt.slot("REFERENCE_DATE").filter(|d| crate::graph::is_iso_date(d));
                let question = prompt.slot("QUESTION").unwrap_or_default();
                Ok(GeneratorOutput::Text(reform::reformulate(question, &context, need()?, &self.lexicon, date)))
            }
        }
    }
}

/// The casual form of a follow-up. With `explicit` only a same-type pivot
/// stays elliptical; everything else is asked in full.
fn raw_question(pattern: Option<Pattern>, nl: &NlQuestion, last_q: Option<&str>, explicit: bool) -> Option<String> {
    let p = pattern?;
    if explicit && p != Pattern::P4 {
        return None;
    }
    Some(match (p, &nl.form) {
        (Pattern::P1, Form::Attribute { property }) => format!("And what's its {}?", humanize(property)),
        (Pattern::P1, Form::Dated { property, date }) => format!("And what's its {} on {date}?", humanize(property)),
        (Pattern::P2, Form::Dated { property, date }) => {
            let same = last_q.is_some_and(|q| q.contains(&format!("the {} of", humanize(property))));
            if same {
                format!("And on {date}?")
            } else {
                format!("What was its {} on {date}?", humanize(property))
            }
        }
        (Pattern::P3, Form::Neighbour { target, .. }) => format!("Which {} is it connected to?", humanize(target)),
        (Pattern::P4, Form::Dated { date, .. }) => format!("What about {} on {date}?", nl.subject),
        (Pattern::P4, _) => format!("What about {}?", nl.subject),
        (Pattern::P5, Form::Aggregate { func: AggFunc::Count, target, .. }) => {
            format!("How many {} does it have?", humanize(target))
        }
        (Pattern::P5, Form::Aggregate { property: Some(p), target, .. }) => {
            let word = nl.render();
            let word = word.strip_prefix("What is the ").and_then(|r| r.split(' ').next()).unwrap_or("average");
            format!("And the {word} {} of its {}?", humanize(p), humanize(target))
        }
        (Pattern::P6, Form::Filter { conditions, .. }) if last_q.is_some_and(|q| q.contains(" is connected to ")) => {
            let c: Vec<String> = conditions.iter().map(|(q, n)| format!("{} of at least {n}", humanize(q))).collect();
            format!("Which of them have {}?", c.join(" and "))
        }
        _ => return None,
    })
}

/// A focus chosen from the schema alone, for prompts that carry none.
fn fallback_focus(schema: &GraphSchema, pattern: Option<Pattern>, seed: u64) -> Result<Focus, TextGenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut options: Vec<Focus> = Vec::new();
    for t in schema.node_types.iter().filter(|t| t.is_nameable()) {
        let bound = t.bound_property().map(|p| p.name.clone());
        let neighbours = || {
            schema
                .incident_edges(&t.name)
                .filter_map(|e| Some((e, schema.node_type(e.other_end(&t.name)?)?)))
                .filter(|(_, n)| n.bound_property().is_some())
        };
        let focus = |form| Focus { entity_type: t.name.clone(), form };
        match pattern {
            None | Some(Pattern::P1) | Some(Pattern::P4) => {
                for p in t.properties.iter().filter(|p| Some(&p.name) != bound.as_ref()) {
                    options.push(focus(Form::Attribute { property: p.name.clone() }));
                }
            }
            Some(Pattern::P2) => {
                for (_, n) in neighbours().filter(|(_, n)| n.is_date_keyed()) {
                    for p in n.numeric_properties() {
                        options.push(focus(Form::Dated { property: p.name.clone(), date: "[d]".into() }));
                    }
                }
            }
            Some(Pattern::P3) => {
                for (e, n) in neighbours() {
                    options.push(focus(Form::Neighbour { target: n.name.clone(), relation: e.name.clone() }));
                }
            }
            Some(Pattern::P5) => {
                for (e, n) in neighbours() {
                    for p in n.numeric_properties() {
                        options.push(focus(Form::Aggregate {
                            func: AggFunc::Avg,
                            property: Some(p.name.clone()),
                            target: n.name.clone(),
                            relation: e.name.clone(),
                        }));
                    }
                }
            }
            Some(Pattern::P6) => {
                for (e, n) in neighbours() {
                    for p in n.numeric_properties() {
                        options.push(focus(Form::Filter {
                            target: n.name.clone(),
                            relation: e.name.clone(),
                            conditions: vec![(p.name.clone(), "[m]".into())],
                        }));
                    }
                }
            }
        }
    }
    options.choose(&mut rng).cloned().ok_or_else(|| {
        TextGenError::Unrenderable(format!(
            "schema offers nothing for {}",
            pattern.map_or("an opening question", |p| p.name())
        ))
    })
}

fn describe(q: &Query) -> String {
    let labels: Vec<&str> = q.nodes().filter_map(|n| n.label.as_deref()).collect();
    let returns: Vec<String> = q.returns.iter().map(|e| e.to_string()).collect();
    format!("Which {} values come out of the {} pattern?", returns.join(", "), labels.join(" and "))
}

fn inject(text: &str, kind: FaultKind, schema: &GraphSchema) -> String {
    match kind {
        FaultKind::MisspelledKeyword => text.replacen("RETURN", "RETRUN", 1),
        FaultKind::MissingParen => text.replacen(')', "", 1),
        FaultKind::UnknownLabel => match gql::parse(text) {
            Ok(mut q) => {
                if let Some(l) = q.paths[0].start.label.as_mut() {
                    l.push_str("_unknown");
                }
                q.to_string()
            }
            Err(_) => text.to_string(),
        },
        FaultKind::WrongProperty => match gql::parse(text) {
            Ok(mut q) => {
                if swap_property(&mut q, schema) {
                    q.to_string()
                } else {
                    inject(text, FaultKind::MisspelledKeyword, schema)
                }
            }
            Err(_) => text.to_string(),
        },
    }
}

/// Replaces the first projected property with the least similar sibling of the same kind.
fn swap_property(q: &mut Query, schema: &GraphSchema) -> bool {
    let labels: Vec<(String, String)> = q.nodes().filter_map(|n| Some((n.var.clone()?, n.label.clone()?))).collect();
    let mut done = false;
    for e in q.returns.iter_mut() {
        e.walk_mut(&mut |x| {
            if done {
                return;
            }
            if let Expr::Prop { var, key } = x {
                let Some((_, label)) = labels.iter().find(|(v, _)| v == var) else { return };
                let Some(t) = schema.node_type(label) else { return };
                let Some(kind) = t.property(key).map(|p| p.kind) else { return };
                let pick = t
                    .properties
                    .iter()
                    .filter(|p| {
                        p.name != *key && p.kind == kind && (kind == ValueKind::Number || t.bound_property() != Some(p))
                    })
                    .min_by(|a, b| {
                        strsim::jaro_winkler(&a.name, key)
                            .total_cmp(&strsim::jaro_winkler(&b.name, key))
                            .then(a.name.cmp(&b.name))
                    });
                if let Some(p) = pick {
                    *key = p.name.clone();
                    done = true;
                }
            }
        });
    }
    done
}

/// Applies the fix a syntax error message points at.
fn fix_syntax(gql: &str, error: &str) -> Option<String> {
    let rest = error.strip_prefix("syntax error at offset ")?;
    let (offset, rest) = rest.split_once(": expected ")?;
    let offset: usize = offset.parse().ok()?;
    let (expected, found) = rest.rsplit_once(", found ")?;
    if !gql.is_char_boundary(offset.min(gql.len())) {
        return None;
    }
    let offset = offset.min(gql.len());
    if expected.contains("')'") {
        let next_is_word = gql[offset..].starts_with(|c: char| c.is_alphanumeric());
        return Some(format!("{}){}{}", &gql[..offset], if next_is_word { " " } else { "" }, &gql[offset..]));
    }
    let word = found.strip_prefix("identifier `")?.strip_suffix('`')?;
    if !gql[offset..].starts_with(word) {
        return None;
    }
    let keyword = expected
        .split(", ")
        .flat_map(|s| s.split(" or "))
        .map(str::trim)
        .filter(|s| !s.is_empty() && s.chars().all(|c| c.is_ascii_uppercase() || c == ' '))
        .max_by(|a, b| strsim::jaro_winkler(a, word).total_cmp(&strsim::jaro_winkler(b, word)).then(b.cmp(a)))?;
    Some(format!("{}{}{}", &gql[..offset], keyword, &gql[offset + word.len()..]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;
    use crate::gql::{execute_text, parse, print_canonical};
    use crate::graph::Value;
    use crate::textgen::{build_prompt, PromptArgs};

    fn gql_prompt(question: &str, round: Option<u32>) -> Prompt {
        let schema = fixture::schema();
        let mut args = PromptArgs { schema: Some(&schema), question: Some(question), ..Default::default() };
        if let Some(r) = round {
            args = args.with("ROUND", r.to_string());
        }
        build_prompt(PromptKind::Gql, &args).unwrap()
    }

    #[test]
    fn golden_question_executes() {
        let g = fixture::graph();
        let m = MockGenerator::for_graph(&g);
        let out = m.generate(&gql_prompt("What is the opening price of CITIC Securities?", None), 0).unwrap();
        assert_eq!(execute_text(out.text(), &g).unwrap().answer_values(), vec![Value::Float(30.26)]);
    }

    #[test]
    fn p1_question_shape() {
        let schema = fixture::schema();
        let focus = Focus { entity_type: "stock".into(), form: Form::Attribute { property: "opening_price".into() } };
        let args = PromptArgs { schema: Some(&schema), pattern: Some(Pattern::P1), ..Default::default() }
            .with("FOCUS", focus.render());
        let p = build_prompt(PromptKind::Question, &args).unwrap();
        let a = MockGenerator::new().generate(&p, 7).unwrap();
        assert_eq!(
            a,
            GeneratorOutput::Question {
                raw: "And what's its opening price?".into(),
                complete: "What is the opening price of [s]?".into()
            }
        );
        assert_eq!(MockGenerator::new().generate(&p, 7).unwrap(), a);
    }

    #[test]
    fn every_pattern_renders_without_focus() {
        let schema = fixture::schema();
        for pattern in std::iter::once(None).chain(Pattern::ALL.map(Some)) {
            for seed in 0..20 {
                let args = PromptArgs { schema: Some(&schema), pattern, ..Default::default() };
                let p = build_prompt(PromptKind::Question, &args).unwrap();
                let GeneratorOutput::Question { complete, .. } = MockGenerator::new().generate(&p, seed).unwrap()
                else {
                    panic!()
                };
                let out = MockGenerator::new().generate(&gql_prompt(&complete, None), seed).unwrap();
                parse(out.text()).unwrap_or_else(|e| panic!("{complete}: {e}"));
            }
        }
    }

    #[test]
    fn repairable_faults_are_repaired() {
        let g = fixture::graph();
        let schema = fixture::schema();
        let question = "What is the opening price of CITIC Securities on 2025-01-08?";
        let clean = MockGenerator::for_graph(&g).generate(&gql_prompt(question, Some(2)), 1).unwrap().into_text();
        for kind in [FaultKind::MisspelledKeyword, FaultKind::MissingParen] {
            let m = MockGenerator::for_graph(&g).with_faults(FaultPlan::on_rounds([2], kind));
            let broken = m.generate(&gql_prompt(question, Some(2)), 1).unwrap().into_text();
            let err = parse(&broken).unwrap_err();
            assert!(err.is_syntax(), "{kind:?}");
            let args = PromptArgs {
                schema: Some(&schema),
                question: Some(question),
                gql: Some(&broken),
                error: Some(&err.to_string()),
                ..Default::default()
            };
            let fixed = m.generate(&build_prompt(PromptKind::Repair, &args).unwrap(), 1).unwrap().into_text();
            assert_eq!(print_canonical(&parse(&fixed).unwrap()), print_canonical(&parse(&clean).unwrap()));
        }
    }

    #[test]
    fn faults_only_on_planned_rounds() {
        let g = fixture::graph();
        let m = MockGenerator::for_graph(&g).with_faults(FaultPlan::on_rounds([3], FaultKind::MissingParen));
        let q = "What is the market cap of CITIC Securities?";
        assert!(parse(m.generate(&gql_prompt(q, Some(2)), 0).unwrap().text()).is_ok());
        assert!(parse(m.generate(&gql_prompt(q, Some(3)), 0).unwrap().text()).is_err());
    }

    #[test]
    fn unknown_label_is_left_alone() {
        let g = fixture::graph();
        let schema = fixture::schema();
        let m = MockGenerator::for_graph(&g).with_faults(FaultPlan::always(FaultKind::UnknownLabel));
        let q = "What is the market cap of CITIC Securities?";
        let broken = m.generate(&gql_prompt(q, None), 0).unwrap().into_text();
        let err = execute_text(&broken, &g).unwrap_err();
        let args = PromptArgs {
            schema: Some(&schema),
            question: Some(q),
            gql: Some(&broken),
            error: Some(&err.to_string()),
            ..Default::default()
        };
        let out = m.generate(&build_prompt(PromptKind::Repair, &args).unwrap(), 0).unwrap();
        assert_eq!(out.text(), broken);
    }

    #[test]
    fn wrong_property_changes_the_answer_but_executes() {
        let g = fixture::graph();
        let m = MockGenerator::for_graph(&g).with_faults(FaultPlan::always(FaultKind::WrongProperty));
        let q = "What is the opening price of CITIC Securities on 2025-01-08?";
        let out = m.generate(&gql_prompt(q, None), 0).unwrap().into_text();
        let got = execute_text(&out, &g).unwrap().answer_values();
        assert_ne!(got, vec![Value::Float(30.26)]);
    }

    #[test]
    fn reverse_inverts_translation() {
        let g = fixture::graph();
        let schema = fixture::schema();
        let m = MockGenerator::for_graph(&g);
        let q = "Which stock in securities has the highest opening price?";
        let gql = m.generate(&gql_prompt(q, None), 0).unwrap().into_text();
        let args = PromptArgs { schema: Some(&schema), gql: Some(&gql), ..Default::default() };
        let back = m.generate(&build_prompt(PromptKind::Reverse, &args).unwrap(), 0).unwrap();
        assert_eq!(back.text(), q);
    }
}
