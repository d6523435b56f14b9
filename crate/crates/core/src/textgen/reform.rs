//! Rule-based stand-in for context-resolving question rewriting.

use chrono::{Days, NaiveDate};

use crate::gql::AggFunc;
use crate::graph::{is_iso_date, GraphSchema, Value};

use super::nl::{agg_from_word, humanize, Form, Lexicon, NlQuestion};

#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct ContextEntry {
    /// The wording the user typed, when the context carries it.
    pub asked: Option<String>,
    pub question: String,
    pub answer: Vec<Value>,
}

/// Reads back the `Q<n>:` / `A<n>:` lines written by `render_history`, and
/// the `Asked<n>:` lines of the structured context.
pub(crate) fn parse_context(text: &str) -> Vec<ContextEntry> {
    let mut out: Vec<ContextEntry> = Vec::new();
    let mut asked: Option<String> = None;
    let numbered = |n: &str| !n.is_empty() && n.chars().all(|c| c.is_ascii_digit());
    for line in text.lines() {
        let Some((head, body)) = line.split_once(": ") else { continue };
        if let Some(n) = head.strip_prefix("Asked") {
            if numbered(n) {
                asked = Some(body.to_string());
            }
        } else if let Some(n) = head.strip_prefix('Q') {
            if numbered(n) {
                out.push(ContextEntry { asked: asked.take(), question: body.to_string(), answer: vec![] });
            }
        } else if let Some(n) = head.strip_prefix('A') {
            if numbered(n) {
                if let (Some(last), Ok(v)) = (out.last_mut(), serde_json::from_str(body)) {
                    last.answer = v;
                }
            }
        }
    }
    out
}

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).map(str::to_lowercase).collect()
}

fn stem_match(a: &str, b: &str) -> bool {
    if a == b {
        return true;
    }
    let common = a.chars().zip(b.chars()).take_while(|(x, y)| x == y).count();
    common >= 4
}

fn overlap(question: &[String], name: &str) -> usize {
    words(&humanize(name)).iter().filter(|w| question.iter().any(|q| stem_match(q, w))).count()
}

fn date_in(text: &str) -> Option<String> {
    text.split(|c: char| c.is_whitespace() || matches!(c, '?' | ',' | '!'))
        .map(|w| w.trim_end_matches('.'))
        .find(|w| is_iso_date(w))
        .map(str::to_string)
}

fn says_when(text: &str) -> bool {
    words(text).iter().any(|w| w == "today" || w == "yesterday")
}

fn shift_back(date: &str) -> Option<String> {
    let d = NaiveDate::parse_from_str(date, "%Y-%m-%d").ok()?;
    Some(d.checked_sub_days(Days::new(1))?.format("%Y-%m-%d").to_string())
}

fn subject_type(subject: &str, schema: &GraphSchema, lexicon: &Lexicon) -> Option<String> {
    lexicon
        .type_of(subject)
        .map(str::to_string)
        .or_else(|| schema.node_types.iter().find(|t| t.is_nameable()).map(|t| t.name.clone()))
}

fn has_dated_property(schema: &GraphSchema, node_type: &str, property: &str) -> bool {
    schema
        .incident_edges(node_type)
        .filter_map(|e| schema.node_type(e.other_end(node_type)?))
        .any(|n| n.is_date_keyed() && n.property(property).is_some())
}

pub(crate) fn reformulate(
    question: &str,
    context: &[ContextEntry],
    schema: &GraphSchema,
    lexicon: &Lexicon,
    reference_date: Option<&str>,
) -> String {
    let question = question.trim();
    if NlQuestion::parse(question, schema).is_some() {
        return question.to_string();
    }
    let qwords = words(question);
    if let Some(s) = superlative(question, &qwords, schema, lexicon) {
        return s;
    }
    let Some(prev_entry) = context.last() else { return question.to_string() };
    let Some(prev) = NlQuestion::parse(&prev_entry.question, schema) else { return question.to_string() };
    let yesterday = qwords.iter().any(|w| w == "yesterday");
    let anchor = |shift: bool, fallback: Option<&str>| -> Option<String> {
        let base = reference_date.or(fallback)?;
        if shift {
            shift_back(base)
        } else {
            Some(base.to_string())
        }
    };

    let stated = date_in(question);
    let lower = question.to_lowercase();
    let swap = ["how about ", "what about "].iter().find_map(|p| lower.find(p).map(|i| i + p.len()));
    if let Some(start) = swap {
        let mut who = question[start..].trim_end_matches(['?', '.', '!']).trim();
        if let Some(d) = &stated {
            who = who.strip_suffix(d.as_str()).map(|w| w.trim_end().trim_end_matches(" on")).unwrap_or(who).trim();
        }
        if !who.is_empty() {
            let subject = lexicon.complete(who).unwrap_or(who).to_string();
            let mut out = NlQuestion { subject, form: prev.form.clone() };
            if let Form::Dated { property, date } = &prev.form {
                let date = stated.clone().or_else(|| anchor(yesterday, Some(date))).unwrap_or_else(|| date.clone());
                out.form = Form::Dated { property: property.clone(), date };
            }
            return out.render();
        }
    }

    if yesterday && qwords.len() <= 3 {
        match &prev.form {
            Form::Dated { property, date } => {
                if let Some(d) = anchor(true, Some(date)) {
                    let form = Form::Dated { property: property.clone(), date: d };
                    return NlQuestion { subject: prev.subject.clone(), form }.render();
                }
            }
            Form::Attribute { property } => {
                let ty = subject_type(&prev.subject, schema, lexicon);
                if let (Some(ty), Some(d)) = (ty, anchor(true, None)) {
                    if has_dated_property(schema, &ty, property) {
                        let form = Form::Dated { property: property.clone(), date: d };
                        return NlQuestion { subject: prev.subject.clone(), form }.render();
                    }
                }
            }
            _ => {}
        }
    }

    if let Some(s) = structural(question, &qwords, &prev, prev_entry, schema, lexicon) {
        return s;
    }
    let when =
        Cue { stated, yesterday, anchored: says_when(question) || prev_entry.asked.as_deref().is_some_and(says_when) };
    elliptical(question, &qwords, &prev, prev_entry, schema, lexicon, reference_date, &when)
        .unwrap_or_else(|| question.to_string())
}

struct Cue {
    stated: Option<String>,
    yesterday: bool,
    /// Some turn word ties the conversation to a day.
    anchored: bool,
}

/// Who "it" is: a name in the question, else a single named answer, else
/// the last subject.
fn referent(question: &str, prev: &NlQuestion, prev_entry: &ContextEntry, lexicon: &Lexicon) -> String {
    let from_answer = match prev_entry.answer.as_slice() {
        [Value::Str(s)] if lexicon.type_of(s).is_some() => Some(s.clone()),
        _ => None,
    };
    let named_here = lexicon.names_in(question).first().map(|s| s.to_string());
    named_here.or(from_answer).unwrap_or_else(|| prev.subject.clone())
}

/// The humanized type name written in `lower` (longest match), with the
/// edge joining it to `from`.
fn joined_type(lower: &str, from: &str, schema: &GraphSchema) -> Option<(String, String)> {
    let padded = format!(" {lower} ");
    let mut hits: Vec<(String, String)> = schema
        .incident_edges(from)
        .filter_map(|e| Some((e.other_end(from)?.to_string(), e.name.clone())))
        .filter(|(t, _)| padded.contains(&format!(" {} ", humanize(t))))
        .collect();
    hits.sort_by_key(|(t, _)| std::cmp::Reverse(t.len()));
    hits.into_iter().next()
}

/// Follow-ups that change the question's shape: neighbours, counts,
/// aggregates over neighbours, and narrowing of the last list.
fn structural(
    question: &str,
    qwords: &[String],
    prev: &NlQuestion,
    prev_entry: &ContextEntry,
    schema: &GraphSchema,
    lexicon: &Lexicon,
) -> Option<String> {
    let lower = qwords.join(" ");
    if lower.starts_with("which of them have ") {
        let (target, relation, subject) = match &prev.form {
            Form::Neighbour { target, relation } | Form::Filter { target, relation, .. } => {
                (target.clone(), relation.clone(), prev.subject.clone())
            }
            _ => return None,
        };
        let t = schema.node_type(&target)?;
        let body = question.trim_end_matches(['?', '.', '!']);
        let body = &body[body.to_lowercase().find(" have ")? + 6..];
        let mut conditions = Vec::new();
        for part in body.split(" and ") {
            let (name, value) = part.split_once(" of at least ")?;
            let p = t.properties.iter().find(|p| humanize(&p.name) == name.trim())?;
            conditions.push((p.name.clone(), value.trim().to_string()));
        }
        return Some(NlQuestion { subject, form: Form::Filter { target, relation, conditions } }.render());
    }

    let subject = referent(question, prev, prev_entry, lexicon);
    let ty = subject_type(&subject, schema, lexicon)?;
    let pronoun = qwords.iter().any(|w| w == "it" || w == "its");
    if !pronoun {
        return None;
    }
    let form = if lower.starts_with("which ") && lower.contains(" connected to") {
        let (target, relation) = joined_type(&lower, &ty, schema)?;
        Form::Neighbour { target, relation }
    } else if lower.starts_with("how many ") {
        let (target, relation) = joined_type(&lower, &ty, schema)?;
        Form::Aggregate { func: AggFunc::Count, property: None, target, relation }
    } else {
        let func = qwords.iter().find_map(|w| agg_from_word(w))?;
        let tail = &lower[lower.find(" of its ")? + 8..];
        let (target, relation) = joined_type(tail, &ty, schema)?;
        let property = schema
            .node_type(&target)?
            .numeric_properties()
            .map(|p| (overlap(qwords, &p.name), p))
            .filter(|(s, _)| *s > 0)
            .max_by(|a, b| a.0.cmp(&b.0).then_with(|| b.1.name.cmp(&a.1.name)))?
            .1
            .name
            .clone();
        Form::Aggregate { func, property: Some(property), target, relation }
    };
    Some(NlQuestion { subject, form }.render())
}

/// "Which A ... highest ... p" with a known entity of a type joined to A.
fn superlative(question: &str, qwords: &[String], schema: &GraphSchema, lexicon: &Lexicon) -> Option<String> {
    let highest = qwords.iter().any(|w| ["highest", "largest", "most", "top", "biggest"].contains(&w.as_str()));
    let lowest = qwords.iter().any(|w| ["lowest", "smallest", "least"].contains(&w.as_str()));
    if !highest && !lowest {
        return None;
    }
    let lower = format!(" {} ", qwords.join(" "));
    let mut types: Vec<_> = schema.node_types.iter().filter(|t| t.bound_property().is_some()).collect();
    types.sort_by_key(|t| std::cmp::Reverse(t.name.len()));
    let target = types.iter().find(|t| lower.contains(&format!(" {} ", humanize(&t.name))))?;
    let subject = lexicon.names_in(question).into_iter().find(|n| {
        lexicon.type_of(n).is_some_and(|ty| {
            ty != target.name && schema.incident_edges(&target.name).any(|e| e.other_end(&target.name) == Some(ty))
        })
    })?;
    let property = target
        .numeric_properties()
        .map(|p| (overlap(qwords, &p.name), p))
        .filter(|(s, _)| *s > 0)
        .max_by(|a, b| a.0.cmp(&b.0).then_with(|| b.1.name.cmp(&a.1.name)))?
        .1;
    let form = Form::Superlative { target: target.name.clone(), highest: !lowest, property: property.name.clone() };
    Some(NlQuestion { subject: subject.to_string(), form }.render())
}

#[allow(clippy::too_many_arguments)]
fn elliptical(
    question: &str,
    qwords: &[String],
    prev: &NlQuestion,
    prev_entry: &ContextEntry,
    schema: &GraphSchema,
    lexicon: &Lexicon,
    reference_date: Option<&str>,
    when: &Cue,
) -> Option<String> {
    let subject = referent(question, prev, prev_entry, lexicon);
    let ty = subject_type(&subject, schema, lexicon)?;
    let t = schema.node_type(&ty)?;
    let bound = t.bound_property().map(|p| p.name.clone());
    let mut candidates: Vec<String> =
        t.properties.iter().filter(|p| Some(&p.name) != bound.as_ref()).map(|p| p.name.clone()).collect();
    for e in schema.incident_edges(&ty) {
        if let Some(n) = e.other_end(&ty).and_then(|o| schema.node_type(o)).filter(|n| n.is_date_keyed()) {
            for p in n.numeric_properties() {
                if !candidates.contains(&p.name) {
                    candidates.push(p.name.clone());
                }
            }
        }
    }
    let prev_prop = match &prev.form {
        Form::Superlative { property, .. } => Some(property.as_str()),
        f => f.asked_property(),
    };
    let (score, property) = candidates
        .iter()
        .enumerate()
        .map(|(i, p)| ((overlap(qwords, p), Some(p.as_str()) == prev_prop, std::cmp::Reverse(i)), p))
        .max_by(|a, b| a.0.cmp(&b.0))?;
    let property = match (score.0, prev_prop) {
        (0, Some(p)) if when.stated.is_some() => p.to_string(),
        (0, _) => return None,
        _ => property.clone(),
    };
    let prev_date = match &prev.form {
        Form::Dated { date, .. } => Some(date.as_str()),
        _ => None,
    };
    let date = when.stated.clone().or_else(|| {
        reference_date.or(prev_date).and_then(|d| if when.yesterday { shift_back(d) } else { Some(d.to_string()) })
    });
    let own = t.property(&property).is_some();
    let timed = when.stated.is_some() || when.yesterday || when.anchored || !own;
    let form = match date {
        Some(date) if timed && has_dated_property(schema, &ty, &property) => Form::Dated { property, date },
        _ if own => Form::Attribute { property },
        _ => return None,
    };
    Some(NlQuestion { subject, form }.render())
}
