use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::lexer::{tokenize_lenient, Kw, Tok};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum KeywordGroup {
    QueryControl,
    Logical,
    GraphTraversal,
    Aggregation,
}

/// Every counted keyword with its group. `ORDER BY` and `GROUP BY` are
/// single entries.
pub const KEYWORDS: &[(&str, KeywordGroup)] = &[
    ("MATCH", KeywordGroup::QueryControl),
    ("GO", KeywordGroup::QueryControl),
    ("FETCH", KeywordGroup::QueryControl),
    ("LOOKUP", KeywordGroup::QueryControl),
    ("WHERE", KeywordGroup::QueryControl),
    ("YIELD", KeywordGroup::QueryControl),
    ("WITH", KeywordGroup::QueryControl),
    ("LIMIT", KeywordGroup::QueryControl),
    ("ORDER BY", KeywordGroup::QueryControl),
    ("GROUP BY", KeywordGroup::QueryControl),
    ("RETURN", KeywordGroup::QueryControl),
    ("AND", KeywordGroup::Logical),
    ("OR", KeywordGroup::Logical),
    ("NOT", KeywordGroup::Logical),
    ("XOR", KeywordGroup::Logical),
    ("VERTEX", KeywordGroup::GraphTraversal),
    ("EDGE", KeywordGroup::GraphTraversal),
    ("OVER", KeywordGroup::GraphTraversal),
    ("REVERSELY", KeywordGroup::GraphTraversal),
    ("BIDIRECT", KeywordGroup::GraphTraversal),
    ("COUNT", KeywordGroup::Aggregation),
    ("SUM", KeywordGroup::Aggregation),
    ("AVG", KeywordGroup::Aggregation),
    ("MAX", KeywordGroup::Aggregation),
    ("MIN", KeywordGroup::Aggregation),
    ("COLLECT", KeywordGroup::Aggregation),
    ("DISTINCT", KeywordGroup::Aggregation),
];

/// Keywords left out of the informative total.
pub const STRUCTURAL: [&str; 2] = ["MATCH", "RETURN"];

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordCounts {
    pub counts: BTreeMap<String, usize>,
    pub informative_total: usize,
}

impl KeywordCounts {
    pub fn get(&self, kw: &str) -> usize {
        self.counts.get(kw).copied().unwrap_or(0)
    }

    pub fn merge(&mut self, other: &KeywordCounts) {
        for (k, v) in &other.counts {
            *self.counts.entry(k.clone()).or_default() += v;
        }
        self.informative_total += other.informative_total;
    }
}

pub fn keyword_group(kw: &str) -> Option<KeywordGroup> {
    KEYWORDS.iter().find(|(k, _)| *k == kw).map(|(_, g)| *g)
}

/// Counts keyword occurrences on the token stream; the text need not parse.
pub fn count_keywords(text: &str) -> KeywordCounts {
    let tokens = tokenize_lenient(text);
    let mut out = KeywordCounts::default();
    let mut i = 0;
    while i < tokens.len() {
        let name = match &tokens[i].tok {
            Tok::Kw(k @ (Kw::Order | Kw::Group), _)
                if matches!(tokens.get(i + 1).map(|t| &t.tok), Some(Tok::Kw(Kw::By, _))) =>
            {
                i += 1;
                Some(if *k == Kw::Order { "ORDER BY" } else { "GROUP BY" })
            }
            Tok::Kw(k, _) => keyword_group(k.as_str()).map(|_| k.as_str()),
            _ => None,
        };
        if let Some(name) = name {
            *out.counts.entry(name.to_string()).or_default() += 1;
            if !STRUCTURAL.contains(&name) {
                out.informative_total += 1;
            }
        }
        i += 1;
    }
    out
}
