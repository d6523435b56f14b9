use std::collections::BTreeMap;
use std::path::Path;

use crate::corpus::{Pattern, Turn};
use crate::graph::GraphSchema;

use super::TextGenError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PromptKind {
    Question,
    Gql,
    Reverse,
    Repair,
    /// Context-resolving rewrite used at inference time.
    Reformulate,
}

impl PromptKind {
    pub const ALL: [PromptKind; 5] =
        [PromptKind::Question, PromptKind::Gql, PromptKind::Reverse, PromptKind::Repair, PromptKind::Reformulate];

    pub fn file_name(self) -> &'static str {
        match self {
            PromptKind::Question => "question.txt",
            PromptKind::Gql => "gql.txt",
            PromptKind::Reverse => "reverse.txt",
            PromptKind::Repair => "repair.txt",
            PromptKind::Reformulate => "reformulate.txt",
        }
    }

    pub fn mandatory_slots(self) -> &'static [&'static str] {
        match self {
            PromptKind::Question => &["SCHEMA", "DIALOGUE_HISTORY", "QUESTION_EXPANDING_PATTERN"],
            PromptKind::Gql => &["SCHEMA", "QUESTION"],
            PromptKind::Reverse => &["SCHEMA", "GQL"],
            PromptKind::Repair => &["QUESTION", "GQL", "ERROR"],
            PromptKind::Reformulate => &["SCHEMA", "CONTEXT", "QUESTION"],
        }
    }

    pub fn optional_slots(self) -> &'static [&'static str] {
        match self {
            PromptKind::Question => &["FOCUS", "REFERENCE"],
            PromptKind::Gql => &["ROUND"],
            PromptKind::Reverse => &[],
            PromptKind::Repair => &["SCHEMA"],
            PromptKind::Reformulate => &["ENTITIES", "REFERENCE_DATE"],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub kind: PromptKind,
    pub rendered_text: String,
    pub slots: BTreeMap<String, String>,
}

impl Prompt {
    pub fn slot(&self, name: &str) -> Option<&str> {
        self.slots.get(name).map(String::as_str)
    }
}

/// Inputs to prompt construction. Slots not derived from the typed fields
/// (FOCUS, REFERENCE, ROUND, ENTITIES, REFERENCE_DATE, CONTEXT) go through `extra`.
#[derive(Debug, Clone, Default)]
pub struct PromptArgs<'a> {
    pub schema: Option<&'a GraphSchema>,
    pub history: &'a [Turn],
    pub pattern: Option<Pattern>,
    pub gql: Option<&'a str>,
    pub error: Option<&'a str>,
    pub question: Option<&'a str>,
    pub extra: BTreeMap<String, String>,
}

impl<'a> PromptArgs<'a> {
    pub fn with(mut self, slot: &str, value: impl Into<String>) -> Self {
        self.extra.insert(slot.to_string(), value.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    texts: BTreeMap<PromptKind, String>,
}

const BUILTIN: [(PromptKind, &str); 5] = [
    (PromptKind::Question, include_str!("../../prompts/question.txt")),
    (PromptKind::Gql, include_str!("../../prompts/gql.txt")),
    (PromptKind::Reverse, include_str!("../../prompts/reverse.txt")),
    (PromptKind::Repair, include_str!("../../prompts/repair.txt")),
    (PromptKind::Reformulate, include_str!("../../prompts/reformulate.txt")),
];

impl Default for PromptTemplates {
    fn default() -> Self {
        Self::builtin()
    }
}

impl PromptTemplates {
    pub fn builtin() -> Self {
        PromptTemplates { texts: BUILTIN.iter().map(|(k, t)| (*k, t.to_string())).collect() }
    }

    /// Loads `<dir>/<kind>.txt` for each kind; absent files keep the built-in text.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self, TextGenError> {
        let mut out = Self::builtin();
        for kind in PromptKind::ALL {
            let path = dir.as_ref().join(kind.file_name());
            match std::fs::read_to_string(&path) {
                Ok(text) => out.set(kind, text)?,
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                Err(e) => return Err(TextGenError::Template(format!("{}: {e}", path.display()))),
            }
        }
        Ok(out)
    }

    pub fn set(&mut self, kind: PromptKind, text: String) -> Result<(), TextGenError> {
        for slot in kind.mandatory_slots() {
            if !text.contains(&format!("{{{slot}}}")) {
                return Err(TextGenError::Template(format!("{} lacks {{{slot}}}", kind.file_name())));
            }
        }
        self.texts.insert(kind, text);
        Ok(())
    }

    pub fn text(&self, kind: PromptKind) -> &str {
        &self.texts[&kind]
    }

    pub fn build(&self, kind: PromptKind, args: &PromptArgs<'_>) -> Result<Prompt, TextGenError> {
        let mut slots = BTreeMap::new();
        if let Some(s) = args.schema {
            slots.insert("SCHEMA".to_string(), s.to_json_pretty());
        }
        match kind {
            PromptKind::Question => {
                slots.insert("DIALOGUE_HISTORY".into(), render_history(args.history));
                slots.insert("QUESTION_EXPANDING_PATTERN".into(), render_pattern(args.pattern));
            }
            PromptKind::Reformulate => {
                slots.insert("CONTEXT".into(), render_history(args.history));
            }
            _ => {}
        }
        if let Some(q) = args.question {
            slots.insert("QUESTION".into(), q.to_string());
        }
        if let Some(g) = args.gql {
            slots.insert("GQL".into(), g.to_string());
        }
        if let Some(e) = args.error {
            slots.insert("ERROR".into(), e.to_string());
        }
        for (k, v) in &args.extra {
            slots.insert(k.clone(), v.clone());
        }
        for slot in kind.mandatory_slots() {
            if !slots.contains_key(*slot) {
                return Err(TextGenError::MissingSlot(slot.to_lowercase()));
            }
        }
        let allowed = |name: &str| kind.mandatory_slots().contains(&name) || kind.optional_slots().contains(&name);
        slots.retain(|k, _| allowed(k));
        let rendered_text = substitute(self.text(kind), &slots, kind)?;
        Ok(Prompt { kind, rendered_text, slots })
    }
}

pub fn build_prompt(kind: PromptKind, args: &PromptArgs<'_>) -> Result<Prompt, TextGenError> {
    PromptTemplates::builtin().build(kind, args)
}

fn substitute(template: &str, slots: &BTreeMap<String, String>, kind: PromptKind) -> Result<String, TextGenError> {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let name_len = after.find(|c: char| !(c.is_ascii_uppercase() || c == '_')).unwrap_or(after.len());
        if name_len > 0 && after[name_len..].starts_with('}') {
            let name = &after[..name_len];
            match slots.get(name) {
                Some(v) => out.push_str(v),
                None if kind.optional_slots().contains(&name) => out.push_str("none"),
                None => return Err(TextGenError::Template(format!("unknown slot {{{name}}} in {}", kind.file_name()))),
            }
            rest = &after[name_len + 1..];
        } else {
            out.push('{');
            rest = after;
        }
    }
    out.push_str(rest);
    Ok(out)
}

fn render_pattern(p: Option<Pattern>) -> String {
    match p {
        None => "None. This is the opening turn.".to_string(),
        Some(p) => format!("{} {}: {}", p.tag(), p.name(), p.description()),
    }
}

/// Numbered question, query and answer lines per turn.
pub fn render_history(turns: &[Turn]) -> String {
    if turns.is_empty() {
        return "(empty)".to_string();
    }
    let mut out = String::new();
    for t in turns {
        let answer = serde_json::to_string(&t.answer).expect("values serialize");
        out.push_str(&format!("Q{r}: {}\nGQL{r}: {}\nA{r}: {answer}\n", t.question_complete, t.gql, r = t.round));
    }
    out.pop();
    out
}

pub fn render_sections(raw: &str, complete: &str) -> String {
    format!("Question:\n{raw}\nComplete Question:\n{complete}\n")
}

/// Splits a reply on the exact header lines `Question:` and `Complete Question:`.
pub fn parse_sections(text: &str) -> Result<(String, String), TextGenError> {
    let lines: Vec<&str> = text.lines().collect();
    let q = lines.iter().position(|l| l.trim() == "Question:");
    let c = lines.iter().position(|l| l.trim() == "Complete Question:");
    let (q, c) = match (q, c) {
        (None, _) => return Err(TextGenError::MalformedResponse("missing \"Question:\" section".into())),
        (_, None) => return Err(TextGenError::MalformedResponse("missing \"Complete Question:\" section".into())),
        (Some(q), Some(c)) if q > c => {
            return Err(TextGenError::MalformedResponse("sections out of order".into()));
        }
        (Some(q), Some(c)) => (q, c),
    };
    let raw = lines[q + 1..c].join("\n").trim().to_string();
    let complete = lines[c + 1..].join("\n").trim().to_string();
    if raw.is_empty() || complete.is_empty() {
        return Err(TextGenError::MalformedResponse("empty section".into()));
    }
    Ok((raw, complete))
}
