//! The bundled two-stock securities fixture and its golden dialogue.

use crate::corpus::{Dialogue, Pattern, Turn};
use crate::graph::{GraphSchema, PropertyGraph, Value};

pub const SCHEMA_JSON: &str = include_str!("../fixtures/schema.json");
pub const GRAPH_JSON: &str = include_str!("../fixtures/graph.json");

pub fn schema() -> GraphSchema {
    GraphSchema::from_json_str(SCHEMA_JSON).expect("bundled schema is valid")
}

pub fn graph() -> PropertyGraph {
    PropertyGraph::from_json_str(&schema(), GRAPH_JSON).expect("bundled graph is valid")
}

/// Gold queries of the four-turn securities conversation, in order.
pub const GOLDEN_GQL: [&str; 4] = [
    "match (s:stock)-[:belong_to]->(i:industry) WHERE i.name = 'securities' return s.name order by s.opening_price desc limit 1",
    "match (s:stock {name: 'CITIC Securities'})-[:has_data]->(d:stock_data {date: '2025-01-08'}) return d.opening_price",
    "match (s:stock {name: 'CITIC Securities'})-[:has_data]->(d:stock_data {date: '2025-01-07'}) return d.opening_price",
    "match (s:stock {name: 'Guotai Junan Securities'})-[:has_data]->(d:stock_data {date: '2025-01-08'}) return d.opening_price",
];

pub fn golden_answers() -> [Value; 4] {
    [Value::from("CITIC Securities"), Value::Float(30.26), Value::Float(36.25), Value::Float(20.0)]
}

/// Raw question, complete question, pattern, entities, relation.
type Row<'a> = (&'a str, &'a str, Option<Pattern>, &'a [&'a str], &'a str);

pub fn golden_dialogue() -> Dialogue {
    let answers = golden_answers();
    let rows: [Row; 4] = [
        (
            "Which securities stock opened at the highest price today?",
            "Which stock in securities has the highest opening price?",
            None,
            &["industry:securities", "stock:600030"],
            "belong_to",
        ),
        (
            "What price?",
            "What is the opening price of CITIC Securities on 2025-01-08?",
            Some(Pattern::P1),
            &["stock:600030", "sd:600030:2025-01-08"],
            "has_data",
        ),
        (
            "And yesterday?",
            "What is the opening price of CITIC Securities on 2025-01-07?",
            Some(Pattern::P2),
            &["stock:600030", "sd:600030:2025-01-07"],
            "has_data",
        ),
        (
            "How about Guotai Junan?",
            "What is the opening price of Guotai Junan Securities on 2025-01-08?",
            Some(Pattern::P4),
            &["stock:601211", "sd:601211:2025-01-08"],
            "has_data",
        ),
    ];
    let turns = rows
        .iter()
        .zip(GOLDEN_GQL)
        .zip(answers)
        .enumerate()
        .map(|(i, (((raw, complete, pattern, ents, rel), gql), answer))| Turn {
            round: i as u32 + 1,
            question_raw: raw.to_string(),
            question_complete: complete.to_string(),
            gql: gql.to_string(),
            answer: vec![answer],
            pattern: *pattern,
            entities: ents.iter().map(|e| e.to_string()).collect(),
            relations: vec![rel.to_string()],
        })
        .collect();
    Dialogue { id: "golden".into(), meta: Default::default(), turns }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gql::execute_text;

    #[test]
    fn golden_queries_reproduce_the_answers() {
        let g = graph();
        for (q, want) in GOLDEN_GQL.iter().zip(golden_answers()) {
            let got = execute_text(q, &g).unwrap().answer_values();
            assert_eq!(got.len(), 1, "{q}");
            assert!(got[0].approx_eq(&want), "{q}: {:?}", got);
        }
    }
}
