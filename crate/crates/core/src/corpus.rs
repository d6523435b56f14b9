//! Dialogues, turns and datasets: JSONL storage, structural checks and
//! descriptive statistics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::gql;
use crate::graph::{find_placeholders, Value};

/// Follow-up expansion patterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pattern {
    P1,
    P2,
    P3,
    P4,
    P5,
    P6,
}

impl Pattern {
    pub const ALL: [Pattern; 6] = [Pattern::P1, Pattern::P2, Pattern::P3, Pattern::P4, Pattern::P5, Pattern::P6];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Pattern::P1 => "Attribute Follow-up",
            Pattern::P2 => "Temporal Shift",
            Pattern::P3 => "Relation Extension",
            Pattern::P4 => "Same-Type Entity",
            Pattern::P5 => "Aggregation Calculation",
            Pattern::P6 => "Conditional Filtering",
        }
    }

    /// Short instruction used when prompting for a follow-up.
    pub fn description(self) -> &'static str {
        match self {
            Pattern::P1 => "Ask a follow-up about an attribute of an entity from the previous turn.",
            Pattern::P2 => "Move along the time axis and ask about historical data.",
            Pattern::P3 => "Follow a relationship to reach connected entities.",
            Pattern::P4 => {
                "Switch to another entity of the same type; used for comparative reasoning between multiple entities."
            }
            Pattern::P5 => "Ask for an aggregate such as an average or a sum.",
            Pattern::P6 => "Narrow the earlier results with a condition.",
        }
    }

    pub fn tag(self) -> &'static str {
        ["P1", "P2", "P3", "P4", "P5", "P6"][self.index()]
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Pattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Pattern::ALL.into_iter().find(|p| p.tag() == s).ok_or_else(|| format!("unknown pattern {s:?}"))
    }
}

/// Serializes `None` as "Initial".
mod pattern_tag {
    use super::Pattern;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(p: &Option<Pattern>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(p.map_or("Initial", Pattern::tag))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Pattern>, D::Error> {
        let s = String::deserialize(d)?;
        if s == "Initial" {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(serde::de::Error::custom)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub round: u32,
    pub question_raw: String,
    pub question_complete: String,
    pub gql: String,
    pub answer: Vec<Value>,
    #[serde(with = "pattern_tag")]
    pub pattern: Option<Pattern>,
    pub entities: Vec<String>,
    pub relations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dialogue {
    pub id: String,
    #[serde(default)]
    pub meta: BTreeMap<String, serde_json::Value>,
    pub turns: Vec<Turn>,
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("dialogue {id}: {message}")]
    Invariant { id: String, message: String },
}

fn invariant(id: &str, message: String) -> CorpusError {
    CorpusError::Invariant { id: id.to_string(), message }
}

/// Structural checks every stored dialogue must pass.
pub fn validate_dialogue(d: &Dialogue) -> Result<(), CorpusError> {
    if d.id.is_empty() {
        return Err(invariant("<empty>", "dialogue id is empty".into()));
    }
    if d.turns.is_empty() {
        return Err(invariant(&d.id, "dialogue has no turns".into()));
    }
    for (i, t) in d.turns.iter().enumerate() {
        let expected = i as u32 + 1;
        if t.round != expected {
            return Err(invariant(&d.id, format!("round {} found where {expected} was expected", t.round)));
        }
        if let Some((_, tok)) = find_placeholders(&t.question_complete).first() {
            return Err(invariant(&d.id, format!("round {expected}: complete question still holds {tok}")));
        }
        if let Err(e) = gql::parse(&t.gql) {
            return Err(invariant(&d.id, format!("round {expected}: gql does not parse: {e}")));
        }
    }
    Ok(())
}

pub fn to_jsonl(dialogues: &[Dialogue]) -> String {
    let mut out = String::new();
    for d in dialogues {
        out.push_str(&serde_json::to_string(d).expect("dialogue serializes"));
        out.push('\n');
    }
    out
}

pub fn from_jsonl(text: &str) -> Result<Vec<Dialogue>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if let Some(d) = parse_line(line, i + 1)? {
            out.push(d);
        }
    }
    Ok(out)
}

fn parse_line(line: &str, line_no: usize) -> Result<Option<Dialogue>, CorpusError> {
    if line.trim().is_empty() {
        return Ok(None);
    }
    let d: Dialogue =
        serde_json::from_str(line).map_err(|e| CorpusError::Parse { line: line_no, message: e.to_string() })?;
    validate_dialogue(&d)?;
    Ok(Some(d))
}

pub fn write_dataset(dialogues: &[Dialogue], path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    for d in dialogues {
        validate_dialogue(d)?;
    }
    let io = |source| CorpusError::Io { path: path.display().to_string(), source };
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    f.write_all(to_jsonl(dialogues).as_bytes()).map_err(io)?;
    f.flush().map_err(io)
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Vec<Dialogue>, CorpusError> {
    let path = path.as_ref();
    let io = |source| CorpusError::Io { path: path.display().to_string(), source };
    let reader = BufReader::new(std::fs::File::open(path).map_err(io)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        if let Some(d) = parse_line(&line.map_err(io)?, i + 1)? {
            out.push(d);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub data_points: usize,
    pub total_gqls: usize,
    pub total_entities: usize,
    pub total_relations: usize,
    pub avg_turns: f64,
    pub avg_entities: f64,
    pub avg_relations: f64,
}

/// Entities and relations are counted as distinct values per dialogue.
pub fn compute_stats(dialogues: &[Dialogue]) -> DatasetStats {
    let mut s = DatasetStats { data_points: dialogues.len(), ..Default::default() };
    for d in dialogues {
        s.total_gqls += d.turns.len();
        let ents: BTreeSet<&str> = d.turns.iter().flat_map(|t| t.entities.iter().map(String::as_str)).collect();
        let rels: BTreeSet<&str> = d.turns.iter().flat_map(|t| t.relations.iter().map(String::as_str)).collect();
        s.total_entities += ents.len();
        s.total_relations += rels.len();
    }
    if s.data_points > 0 {
        let n = s.data_points as f64;
        s.avg_turns = s.total_gqls as f64 / n;
        s.avg_entities = s.total_entities as f64 / n;
        s.avg_relations = s.total_relations as f64 / n;
    }
    s
}

/// Deterministic shuffle, e.g. before splitting.
pub fn shuffle(dialogues: &mut [Dialogue], seed: u64) {
    dialogues.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
}

/// Splits after a seeded shuffle; `first` is the size of the first part.
pub fn split(mut dialogues: Vec<Dialogue>, first: usize, seed: u64) -> (Vec<Dialogue>, Vec<Dialogue>) {
    shuffle(&mut dialogues, seed);
    let rest = dialogues.split_off(first.min(dialogues.len()));
    (dialogues, rest)
}
