//! Turn- and dialogue-level scoring of predicted queries, plus keyword and
//! query-type analytics over a dataset.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dialogue, Pattern};
use crate::gql::{self, classify_query_type, count_keywords, print_canonical, GqlError, QueryType, STRUCTURAL};
use crate::graph::PropertyGraph;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("gold query of {id} round {round} does not parse: {source}")]
    GoldParse { id: String, round: u32, source: GqlError },
    #[error("gold query of {id} round {round} does not execute: {source}")]
    GoldExecution { id: String, round: u32, source: GqlError },
    #[error("prediction for unknown turn {id} round {round}")]
    Alignment { id: String, round: u32 },
    #[error("more than one prediction for {id} round {round}")]
    DuplicatePrediction { id: String, round: u32 },
    #[error("predictions line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub round: u32,
    pub gql: String,
}

/// Predicted query text per (dialogue id, round).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PredictionSet {
    pub entries: BTreeMap<(String, u32), String>,
}

impl PredictionSet {
    pub fn insert(&mut self, id: &str, round: u32, gql: &str) -> Result<(), EvalError> {
        let key = (id.to_string(), round);
        if self.entries.contains_key(&key) {
            return Err(EvalError::DuplicatePrediction { id: key.0, round });
        }
        self.entries.insert(key, gql.to_string());
        Ok(())
    }

    pub fn get(&self, id: &str, round: u32) -> Option<&str> {
        self.entries.get(&(id.to_string(), round)).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The gold queries themselves, as a prediction set.
    pub fn from_gold(dialogues: &[Dialogue]) -> Self {
        let mut out = PredictionSet::default();
        for d in dialogues {
            for t in &d.turns {
                out.entries.insert((d.id.clone(), t.round), t.gql.clone());
            }
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, EvalError> {
        let mut out = PredictionSet::default();
        for (k, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let r: PredictionRecord =
                serde_json::from_str(line).map_err(|e| EvalError::Parse { line: k + 1, message: e.to_string() })?;
            out.insert(&r.id, r.round, &r.gql)?;
        }
        Ok(out)
    }

    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for ((id, round), gql) in &self.entries {
            let r = PredictionRecord { id: id.clone(), round: *round, gql: gql.clone() };
            s.push_str(&serde_json::to_string(&r).expect("plain record"));
            s.push('\n');
        }
        s
    }
}

/// Canonical-form equality. An unparseable prediction is simply wrong.
pub fn exact_match(pred: &str, gold: &str) -> Result<bool, GqlError> {
    let g = gql::parse(gold)?;
    Ok(match gql::parse(pred) {
        Ok(p) => print_canonical(&p) == print_canonical(&g),
        Err(_) => false,
    })
}

/// Result equality on the graph: ordered when the gold query sorts, as
/// multisets otherwise. Prediction failures count as a mismatch.
pub fn execution_match(pred: &str, gold: &str, graph: &PropertyGraph) -> Result<bool, GqlError> {
    let g = gql::parse(gold)?;
    let expected = gql::execute(&g, graph)?;
    let ordered = !g.order_by.is_empty();
    Ok(match gql::execute_text(pred, graph) {
        Ok(t) => t.approx_eq(&expected, ordered),
        Err(_) => false,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketScore {
    pub turns: usize,
    pub em: usize,
    pub ex: usize,
}

impl BucketScore {
    pub fn em_rate(&self) -> f64 {
        ratio(self.em, self.turns)
    }

    pub fn ex_rate(&self) -> f64 {
        ratio(self.ex, self.turns)
    }
}

fn ratio(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub em: f64,
    pub aem: f64,
    pub ex: f64,
    pub aex: f64,
    pub turns: usize,
    pub dialogues: usize,
    pub em_turns: usize,
    pub ex_turns: usize,
    pub aem_dialogues: usize,
    pub aex_dialogues: usize,
    /// Keys R1..R4 and R5+.
    pub by_round: BTreeMap<String, BucketScore>,
    /// Keys P1..P6, plus Initial for opening turns.
    pub by_pattern: BTreeMap<String, BucketScore>,
}

pub fn round_bucket(round: u32) -> String {
    if round >= 5 {
        "R5+".to_string()
    } else {
        format!("R{round}")
    }
}

fn pattern_bucket(p: Option<Pattern>) -> String {
    p.map_or_else(|| "Initial".to_string(), |p| p.tag().to_string())
}

/// Scores `preds` against the gold dialogues. A missing prediction is
/// wrong; a prediction for a turn not in the gold set is an error.
pub fn compute_metrics(
    preds: &PredictionSet,
    gold: &[Dialogue],
    graph: &PropertyGraph,
) -> Result<MetricsReport, EvalError> {
    let mut known: BTreeMap<&str, Vec<u32>> = BTreeMap::new();
    for d in gold {
        known.entry(&d.id).or_default().extend(d.turns.iter().map(|t| t.round));
    }
    for (id, round) in preds.entries.keys() {
        if !known.get(id.as_str()).is_some_and(|rs| rs.contains(round)) {
            return Err(EvalError::Alignment { id: id.clone(), round: *round });
        }
    }

    type Scored = Vec<(u32, Option<Pattern>, bool, bool)>;
    let scored: Vec<Scored> = gold
        .par_iter()
        .map(|d| {
            d.turns
                .iter()
                .map(|t| {
                    let pred = preds.get(&d.id, t.round);
                    let em = match pred {
                        Some(p) => exact_match(p, &t.gql).map_err(|source| EvalError::GoldParse {
                            id: d.id.clone(),
                            round: t.round,
                            source,
                        })?,
                        None => false,
                    };
                    let ex = match pred {
                        Some(p) => execution_match(p, &t.gql, graph).map_err(|source| match source {
                            e if e.is_syntax() => EvalError::GoldParse { id: d.id.clone(), round: t.round, source: e },
                            e => EvalError::GoldExecution { id: d.id.clone(), round: t.round, source: e },
                        })?,
                        None => {
                            // still require the gold to be valid
                            let q = gql::parse(&t.gql).map_err(|source| EvalError::GoldParse {
                                id: d.id.clone(),
                                round: t.round,
                                source,
                            })?;
                            gql::execute(&q, graph).map_err(|source| EvalError::GoldExecution {
                                id: d.id.clone(),
                                round: t.round,
                                source,
                            })?;
                            false
                        }
                    };
                    Ok((t.round, t.pattern, em, ex))
                })
                .collect::<Result<Scored, EvalError>>()
        })
        .collect::<Result<Vec<Scored>, EvalError>>()?;

    let mut r = MetricsReport { dialogues: gold.len(), ..MetricsReport::default() };
    for turns in &scored {
        if turns.iter().all(|t| t.2) {
            r.aem_dialogues += 1;
        }
        if turns.iter().all(|t| t.3) {
            r.aex_dialogues += 1;
        }
        for &(round, pattern, em, ex) in turns {
            r.turns += 1;
            r.em_turns += em as usize;
            r.ex_turns += ex as usize;
            for b in [
                r.by_round.entry(round_bucket(round)).or_default(),
                r.by_pattern.entry(pattern_bucket(pattern)).or_default(),
            ] {
                b.turns += 1;
                b.em += em as usize;
                b.ex += ex as usize;
            }
        }
    }
    r.em = ratio(r.em_turns, r.turns);
    r.ex = ratio(r.ex_turns, r.turns);
    r.aem = ratio(r.aem_dialogues, r.dialogues);
    r.aex = ratio(r.aex_dialogues, r.dialogues);
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Breakdown {
    #[default]
    None,
    Round,
    Pattern,
}

impl std::str::FromStr for Breakdown {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(Breakdown::None),
            "round" => Ok(Breakdown::Round),
            "pattern" => Ok(Breakdown::Pattern),
            other => Err(format!("unknown breakdown {other:?} (expected round, pattern or none)")),
        }
    }
}

fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

impl MetricsReport {
    /// Plain-text table; the pattern breakdown leaves out opening turns.
    pub fn render_table(&self, breakdown: Breakdown) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<8} {:>8} {:>8} {:>8} {:>8}", "", "EM", "AEM", "EX", "AEX");
        let _ = writeln!(
            s,
            "{:<8} {:>8} {:>8} {:>8} {:>8}",
            "all",
            pct(self.em),
            pct(self.aem),
            pct(self.ex),
            pct(self.aex)
        );
        let _ = writeln!(s, "turns {} / dialogues {}", self.turns, self.dialogues);
        let rows: Vec<(&String, &BucketScore)> = match breakdown {
            Breakdown::None => Vec::new(),
            Breakdown::Round => self.by_round.iter().collect(),
            Breakdown::Pattern => self.by_pattern.iter().filter(|(k, _)| k.as_str() != "Initial").collect(),
        };
        if !rows.is_empty() {
            let _ = writeln!(s);
            let _ = writeln!(s, "{:<8} {:>8} {:>8} {:>8}", "bucket", "turns", "EM", "EX");
            for (k, b) in rows {
                let _ = writeln!(s, "{:<8} {:>8} {:>8} {:>8}", k, b.turns, pct(b.em_rate()), pct(b.ex_rate()));
            }
        }
        s
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetAnalytics {
    pub gql_count: usize,
    /// Every counted keyword, structural ones included.
    pub keyword_counts: BTreeMap<String, usize>,
    pub total_keywords: usize,
    /// Keywords other than MATCH and RETURN.
    pub informative_keywords: usize,
    pub average_per_gql: f64,
    pub query_types: BTreeMap<QueryType, usize>,
    /// Queries that tokenize but do not parse, so have no type.
    pub unclassified: usize,
}

pub fn analyze_dataset(dialogues: &[Dialogue]) -> DatasetAnalytics {
    let mut a = DatasetAnalytics::default();
    let mut merged = gql::KeywordCounts::default();
    for t in dialogues.iter().flat_map(|d| &d.turns) {
        a.gql_count += 1;
        merged.merge(&count_keywords(&t.gql));
        match gql::parse(&t.gql) {
            Ok(q) => *a.query_types.entry(classify_query_type(&q)).or_default() += 1,
            Err(_) => a.unclassified += 1,
        }
    }
    a.total_keywords = merged.counts.values().sum();
    a.informative_keywords = merged.informative_total;
    debug_assert_eq!(
        a.informative_keywords,
        a.total_keywords - STRUCTURAL.iter().map(|k| merged.get(k)).sum::<usize>()
    );
    a.keyword_counts = merged.counts;
    a.average_per_gql = ratio(a.informative_keywords, a.gql_count);
    a
}

impl DatasetAnalytics {
    pub fn render_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "queries              {}", self.gql_count);
        let _ = writeln!(s, "keywords (all)       {}", self.total_keywords);
        let _ = writeln!(s, "keywords (counted)   {}", self.informative_keywords);
        let _ = writeln!(s, "average per query    {:.2}", self.average_per_gql);
        let _ = writeln!(s);
        for (k, v) in &self.keyword_counts {
            let _ = writeln!(s, "  {k:<12} {v}");
        }
        let _ = writeln!(s);
        for (t, v) in &self.query_types {
            let _ = writeln!(s, "  {:<24} {v}", t.label());
        }
        if self.unclassified > 0 {
            let _ = writeln!(s, "  {:<24} {}", "unclassified", self.unclassified);
        }
        s
    }
}
