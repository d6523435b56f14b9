//! Seeded random graphs over the fixture schema and queries drawn from the
//! follow-up template families.

use gqlforge_core::fixture;
use gqlforge_core::graph::{EdgeRecord, GraphFile, NodeRecord, PropMap, PropertyGraph, Value};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STOCK_NAMES: [&str; 5] = ["Alpha", "Beta", "Gamma", "Delta", "Beta"];
pub const INDUSTRY_NAMES: [&str; 3] = ["banking", "securities", "energy"];
pub const DATES: [&str; 4] = ["2025-01-06", "2025-01-07", "2025-01-08", "2025-01-09"];
const STOCK_NUM: [&str; 3] = ["opening_price", "closing_price", "market_cap"];
const SD_NUM: [&str; 5] = ["opening_price", "closing_price", "highest_price", "lowest_price", "volume"];

fn number(rng: &mut ChaCha8Rng) -> Value {
    if rng.random_bool(0.3) {
        Value::Int(rng.random_range(0..20))
    } else {
        Value::Float(rng.random_range(0..2000) as f64 / 100.0)
    }
}

fn maybe(rng: &mut ChaCha8Rng, props: &mut PropMap, key: &str, v: Value) {
    if rng.random_bool(0.85) {
        props.insert(key.to_string(), v);
    }
}

/// A graph with at most 30 nodes.
pub fn random_graph(seed: u64) -> PropertyGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_ind = rng.random_range(1..=3);
    let n_stock = rng.random_range(1..=10);
    let n_sd = rng.random_range(0..=(30 - n_ind - n_stock).min(15));
    let mut nodes = Vec::new();
    for i in 0..n_ind {
        let mut props = PropMap::new();
        let v = Value::from(*INDUSTRY_NAMES.choose(&mut rng).unwrap());
        maybe(&mut rng, &mut props, "name", v);
        nodes.push(NodeRecord { id: format!("i{i}"), label: "industry".into(), props });
    }
    for i in 0..n_stock {
        let mut props = PropMap::new();
        let v = Value::from(*STOCK_NAMES.choose(&mut rng).unwrap());
        maybe(&mut rng, &mut props, "name", v);
        let v = Value::Str(format!("{}", 600000 + rng.random_range(0..4)));
        maybe(&mut rng, &mut props, "code", v);
        for p in STOCK_NUM {
            let v = number(&mut rng);
            maybe(&mut rng, &mut props, p, v);
        }
        nodes.push(NodeRecord { id: format!("s{i:02}"), label: "stock".into(), props });
    }
    for i in 0..n_sd {
        let mut props = PropMap::new();
        let v = Value::from(*DATES.choose(&mut rng).unwrap());
        maybe(&mut rng, &mut props, "date", v);
        for p in SD_NUM {
            let v = number(&mut rng);
            maybe(&mut rng, &mut props, p, v);
        }
        nodes.push(NodeRecord { id: format!("d{i:02}"), label: "stock_data".into(), props });
    }
    let mut edges = Vec::new();
    for s in 0..n_stock {
        for _ in 0..rng.random_range(0..=2) {
            let mut props = PropMap::new();
            let v = Value::from(*DATES.choose(&mut rng).unwrap());
            maybe(&mut rng, &mut props, "since", v);
            edges.push(EdgeRecord {
                src: format!("s{s:02}"),
                label: "belong_to".into(),
                dst: format!("i{}", rng.random_range(0..n_ind)),
                props,
            });
        }
    }
    for d in 0..n_sd {
        for _ in 0..rng.random_range(0..=2) {
            edges.push(EdgeRecord {
                src: format!("s{:02}", rng.random_range(0..n_stock)),
                label: "has_data".into(),
                dst: format!("d{d:02}"),
                props: PropMap::new(),
            });
        }
    }
    PropertyGraph::build(&fixture::schema(), GraphFile { nodes, edges }).expect("generated graph conforms")
}

fn lit_num(rng: &mut ChaCha8Rng) -> String {
    if rng.random_bool(0.5) {
        format!("{}", rng.random_range(0..20))
    } else {
        format!("{:.2}", rng.random_range(0..2000) as f64 / 100.0)
    }
}

fn q(s: &str) -> String {
    format!("'{s}'")
}

/// One query from the template families: attribute lookup, dated lookup,
/// superlative, relation hop, aggregation, conditional filter, plus boolean
/// connectives, yes/no, pairwise comparison and edge-property shapes.
pub fn random_query(rng: &mut ChaCha8Rng) -> String {
    let stock = q(STOCK_NAMES.choose(rng).unwrap());
    let stock2 = q(STOCK_NAMES.choose(rng).unwrap());
    let ind = q(INDUSTRY_NAMES.choose(rng).unwrap());
    let date = q(DATES.choose(rng).unwrap());
    let sp = *STOCK_NUM.choose(rng).unwrap();
    let sp2 = *STOCK_NUM.choose(rng).unwrap();
    let dp = *SD_NUM.choose(rng).unwrap();
    let dir = if rng.random_bool(0.5) { "DESC" } else { "ASC" };
    let cmp = *["=", "<>", "<", "<=", ">", ">="].choose(rng).unwrap();
    let agg = *["COUNT", "SUM", "AVG", "MAX", "MIN", "COLLECT"].choose(rng).unwrap();
    let distinct = if rng.random_bool(0.3) { "DISTINCT " } else { "" };
    let k = rng.random_range(0..4);
    let x = lit_num(rng);
    let y = lit_num(rng);
    match rng.random_range(0..14) {
        0 => format!("MATCH (a:stock {{name: {stock}}}) RETURN a.{sp}"),
        1 => format!("MATCH (a:stock {{name: {stock}}})-[:has_data]->(d:stock_data {{date: {date}}}) RETURN d.{dp}"),
        2 => format!(
            "MATCH (a:stock)-[:belong_to]->(b:industry) WHERE b.name = {ind} RETURN a.name ORDER BY a.{sp} {dir} LIMIT {k}"
        ),
        3 => format!("MATCH (a:stock {{name: {stock}}})-[:belong_to]->(b:industry) RETURN b.name"),
        4 => format!("MATCH (b:industry {{name: {ind}}})<-[:belong_to]-(a:stock) RETURN {distinct}a.name, a.code"),
        5 => format!("MATCH (a:stock {{name: {stock}}})-[:has_data]->(d:stock_data) RETURN {agg}({distinct}d.{dp})"),
        6 => format!("MATCH (a:stock)-[:has_data]->(d:stock_data) RETURN a.name, {agg}(d.{dp}), COUNT(*)"),
        7 => format!("MATCH (b:industry {{name: {ind}}})<-[:belong_to]-(a:stock) WHERE a.{sp} >= {x} RETURN a.name"),
        8 => format!(
            "MATCH (a:stock) WHERE (a.{sp} {cmp} {x} OR NOT a.{sp2} < {y}) XOR a.name = {stock} RETURN {distinct}a.name, a.{sp}"
        ),
        9 => format!(
            "MATCH (d:stock_data)<-[:has_data]-(a:stock)-[:belong_to]->(b:industry) WHERE d.{dp} {cmp} {x} AND d.date >= {date} RETURN b.name, d.{dp}"
        ),
        10 => format!("MATCH (d:stock_data)<-[:has_data]-(a:stock)-[:belong_to]->(b:industry) RETURN {distinct}b.name, a.name"),
        11 => format!("MATCH (a:stock {{name: {stock}}}) RETURN a.{sp} {cmp} {x}, COUNT(*) > 0"),
        12 => format!(
            "MATCH (a:stock {{name: {stock}}}), (b:stock {{name: {stock2}}}) WHERE a.{sp} {cmp} b.{sp} RETURN a.code, b.code ORDER BY a.code {dir}, b.code LIMIT {k}"
        ),
        _ => format!(
            "MATCH (a:stock)-[r:belong_to]->(b:industry) WHERE r.since {cmp} {date} RETURN a.name, r.since ORDER BY r.since {dir} LIMIT {k}"
        ),
    }
}
