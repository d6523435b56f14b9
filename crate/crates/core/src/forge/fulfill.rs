use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::graph::{find_placeholders, format_float, PlaceholderToken, PropertyGraph, Value, ValueKind};
use crate::textgen::nl::humanize;

use super::state::numeric_values;
use super::ForgeError;

/// One filled placeholder. `node` is the node the value names, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct Binding {
    pub token: PlaceholderToken,
    pub value: String,
    pub node: Option<String>,
}

fn render_number(v: &Value) -> String {
    match v {
        Value::Int(i) => i.to_string(),
        Value::Float(f) => format_float(*f),
        other => other.to_string(),
    }
}

/// The numeric property named closest before byte offset `at`.
fn preceding_property(text: &str, at: usize, graph: &PropertyGraph) -> Option<String> {
    let head = text[..at].to_lowercase();
    let mut best: Option<(usize, usize, String)> = None;
    for t in &graph.schema().node_types {
        for p in t.properties.iter().filter(|p| p.kind == ValueKind::Number) {
            let word = humanize(&p.name).to_lowercase();
            if let Some(pos) = head.rfind(&word) {
                let end = pos + word.len();
                if best.as_ref().is_none_or(|(e, len, _)| end > *e || (end == *e && word.len() > *len)) {
                    best = Some((end, word.len(), p.name.clone()));
                }
            }
        }
    }
    best.map(|(.., name)| name)
}

/// Fills every placeholder in `text`, left to right. Named entities come
/// from `chosen` when one has the right type (the subject first), dates from
/// the subject's dated neighbours (unseen ones preferred) and numbers from
/// the values the nearest preceding property takes around the subject.
pub fn fulfill_placeholders(
    text: &str,
    chosen: &[String],
    seen: &BTreeSet<String>,
    graph: &PropertyGraph,
    rng: &mut impl Rng,
) -> Result<(String, Vec<Binding>), ForgeError> {
    let schema = graph.schema();
    let mut out = String::with_capacity(text.len());
    let mut bindings: Vec<Binding> = Vec::new();
    let mut cursor = 0;
    let mut anchor: Option<usize> = chosen.first().and_then(|id| graph.node_index(id));
    for (at, token) in find_placeholders(text) {
        out.push_str(&text[cursor..at]);
        cursor = at + 3;
        let unbound = || ForgeError::UnboundPlaceholder(token.as_str().to_string());
        if token == PlaceholderToken::Number {
            let prop = preceding_property(text, at, graph).ok_or_else(unbound)?;
            let around: Vec<usize> = match anchor {
                Some(a) => graph.neighbours(a).map(|(_, n)| n).collect(),
                None => Vec::new(),
            };
            let mut values = numeric_values(graph, &around, &prop);
            if values.is_empty() {
                let all: Vec<usize> = (0..graph.nodes().len()).collect();
                values = numeric_values(graph, &all, &prop);
            }
            let pick = match values.len() {
                0 => return Err(unbound()),
                1 => values[0].clone(),
                _ => values[1..].choose(rng).expect("non-empty").clone(),
            };
            let value = render_number(&pick);
            out.push_str(&value);
            bindings.push(Binding { token, value, node: None });
            continue;
        }
        let t = schema.node_type_for_token(token).ok_or_else(unbound)?;
        let bound = t.bound_property().ok_or_else(unbound)?.name.clone();
        let node = if t.is_date_keyed() {
            let property = preceding_property(text, at, graph);
            let mut near: Vec<usize> = match anchor {
                Some(a) => graph.neighbours(a).map(|(_, n)| n).filter(|&n| graph.node(n).label == t.name).collect(),
                None => Vec::new(),
            };
            near.sort_unstable();
            near.dedup();
            if let Some(p) = &property {
                let holding: Vec<usize> = near.iter().copied().filter(|&n| !graph.node(n).prop(p).is_null()).collect();
                if !holding.is_empty() {
                    near = holding;
                }
            }
            let fresh: Vec<usize> = near.iter().copied().filter(|&n| !seen.contains(&graph.node(n).id)).collect();
            let pool: &[usize] = if !fresh.is_empty() {
                &fresh
            } else if !near.is_empty() {
                &near
            } else {
                graph.nodes_of(&t.name)
            };
            *pool.choose(rng).ok_or_else(unbound)?
        } else {
            let given = chosen.iter().filter_map(|id| graph.node_index(id)).find(|&i| graph.node(i).label == t.name);
            match given {
                Some(i) => i,
                None => *graph.nodes_of(&t.name).choose(rng).ok_or_else(unbound)?,
            }
        };
        let value = match graph.node(node).prop(&bound) {
            Value::Str(s) => s.clone(),
            Value::Null => return Err(unbound()),
            v => v.to_string(),
        };
        if anchor.is_none() && !t.is_date_keyed() {
            anchor = Some(node);
        }
        out.push_str(&value);
        bindings.push(Binding { token, value, node: Some(graph.node(node).id.clone()) });
    }
    out.push_str(&text[cursor..]);
    Ok((out, bindings))
}

/// Substitutes placeholders in a second text (the raw question) with the
/// values already bound for the same tokens, occurrence by occurrence.
pub fn apply_bindings(text: &str, bindings: &[Binding]) -> Result<String, ForgeError> {
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    let mut used: Vec<(PlaceholderToken, usize)> = Vec::new();
    for (at, token) in find_placeholders(text) {
        out.push_str(&text[cursor..at]);
        cursor = at + 3;
        let k = match used.iter_mut().find(|(t, _)| *t == token) {
            Some((_, n)) => {
                *n += 1;
                *n
            }
            None => {
                used.push((token, 0));
                0
            }
        };
        let same: Vec<&Binding> = bindings.iter().filter(|b| b.token == token).collect();
        let b =
            same.get(k).or(same.first()).ok_or_else(|| ForgeError::UnboundPlaceholder(token.as_str().to_string()))?;
        out.push_str(&b.value);
    }
    out.push_str(&text[cursor..]);
    Ok(out)
}
