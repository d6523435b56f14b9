//! Proptest strategies producing well-formed query ASTs.

use gqlforge_core::gql::{
    AggFunc, CmpOp, Direction, EdgePattern, Expr, Literal, NodePattern, OrderKey, PathPattern, Query,
};
use gqlforge_core::graph::PlaceholderToken;
use proptest::prelude::*;

const NODE_VARS: [&str; 6] = ["a", "b", "c", "node1", "x_y", "Z"];
const LABELS: [&str; 4] = ["stock", "industry", "stock_data", "Person"];
const EDGE_LABELS: [&str; 3] = ["belong_to", "has_data", "KNOWS"];
const KEYS: [&str; 6] = ["name", "opening_price", "date", "count", "order", "v"];

fn literal() -> impl Strategy<Value = Literal> {
    prop_oneof![
        Just(Literal::Null),
        any::<bool>().prop_map(Literal::Bool),
        (-100_000i64..100_000).prop_map(Literal::Int),
        (-1.0e6f64..1.0e6).prop_map(Literal::Float),
        "[a-zA-Z0-9 '\"\\\\_.é]{0,10}".prop_map(Literal::Str),
        prop::sample::select(PlaceholderToken::ALL.to_vec()).prop_map(Literal::Placeholder),
    ]
}

fn node_pattern() -> impl Strategy<Value = NodePattern> {
    (
        prop::option::weighted(0.8, prop::sample::select(NODE_VARS.to_vec())),
        prop::option::weighted(0.8, prop::sample::select(LABELS.to_vec())),
        prop::collection::vec((prop::sample::select(KEYS.to_vec()), literal()), 0..3),
    )
        .prop_map(|(var, label, props)| NodePattern {
            var: var.map(str::to_string),
            label: label.map(str::to_string),
            props: props.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        })
}

fn edge_pattern() -> impl Strategy<Value = (bool, &'static str, bool)> {
    (any::<bool>(), prop::sample::select(EDGE_LABELS.to_vec()), any::<bool>())
}

fn paths() -> impl Strategy<Value = Vec<PathPattern>> {
    prop::collection::vec((node_pattern(), prop::collection::vec((edge_pattern(), node_pattern()), 0..3)), 1..3)
        .prop_map(|raw| {
            let mut edge_no = 0;
            let mut out: Vec<PathPattern> = raw
                .into_iter()
                .map(|(start, steps)| PathPattern {
                    start,
                    steps: steps
                        .into_iter()
                        .map(|((named, label, out), node)| {
                            edge_no += 1;
                            let var = named.then(|| format!("r{edge_no}"));
                            let direction = if out { Direction::Out } else { Direction::In };
                            (EdgePattern { var, label: label.to_string(), direction }, node)
                        })
                        .collect(),
                })
                .collect();
            // a variable keeps the label of its first labelled occurrence
            let mut seen: Vec<(String, Option<String>)> = Vec::new();
            for p in &mut out {
                for n in std::iter::once(&mut p.start).chain(p.steps.iter_mut().map(|(_, n)| n)) {
                    let Some(v) = &n.var else { continue };
                    match seen.iter().find(|(s, _)| s == v) {
                        Some((_, first)) => {
                            if n.label.is_some() {
                                n.label = first.clone();
                            }
                        }
                        None => seen.push((v.clone(), n.label.clone())),
                    }
                }
            }
            for p in &mut out {
                for n in std::iter::once(&mut p.start).chain(p.steps.iter_mut().map(|(_, n)| n)) {
                    if let Some(v) = &n.var {
                        let first = seen.iter().find(|(s, _)| s == v).unwrap().1.clone();
                        if first.is_none() {
                            n.label = None;
                        }
                    }
                }
            }
            out
        })
}

fn leaf(vars: Vec<String>) -> BoxedStrategy<Expr> {
    let v1 = vars.clone();
    prop_oneof![
        2 => literal().prop_map(Expr::Lit),
        3 => (prop::sample::select(v1), prop::sample::select(KEYS.to_vec()))
            .prop_map(|(var, key)| Expr::Prop { var, key: key.to_string() }),
        1 => prop::sample::select(vars).prop_map(Expr::Var),
    ]
    .boxed()
}

fn cmp_op() -> impl Strategy<Value = CmpOp> {
    prop::sample::select(vec![CmpOp::Eq, CmpOp::Neq, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge])
}

/// Boolean and scalar expressions without aggregates.
fn plain_expr(vars: Vec<String>) -> BoxedStrategy<Expr> {
    leaf(vars)
        .prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                (cmp_op(), inner.clone(), inner.clone()).prop_map(|(op, l, r)| Expr::cmp(op, l, r)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::And(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Or(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Xor(Box::new(a), Box::new(b))),
                inner.prop_map(|a| Expr::Not(Box::new(a))),
            ]
        })
        .boxed()
}

fn agg_func() -> impl Strategy<Value = AggFunc> {
    prop::sample::select(vec![AggFunc::Count, AggFunc::Sum, AggFunc::Avg, AggFunc::Max, AggFunc::Min, AggFunc::Collect])
}

fn return_item(vars: Vec<String>) -> BoxedStrategy<Expr> {
    let agg = (agg_func(), any::<bool>(), prop::option::weighted(0.8, plain_expr(vars.clone())))
        .prop_map(|(func, distinct, arg)| match arg {
            None => Expr::Agg { func: AggFunc::Count, distinct: false, arg: None },
            Some(a) => Expr::Agg { func, distinct, arg: Some(Box::new(a)) },
        })
        .boxed();
    prop_oneof![
        3 => plain_expr(vars),
        1 => agg.clone(),
        1 => (cmp_op(), agg, literal()).prop_map(|(op, a, l)| Expr::cmp(op, a, Expr::Lit(l))),
    ]
    .boxed()
}

pub fn query() -> impl Strategy<Value = Query> {
    paths().prop_flat_map(|paths| {
        let probe = Query {
            paths: paths.clone(),
            where_clause: None,
            distinct: false,
            returns: vec![],
            order_by: vec![],
            limit: None,
        };
        let vars = probe.pattern_variables();
        let exprs_possible = !vars.is_empty();
        let vars = if exprs_possible { vars } else { vec!["unused".to_string()] };
        let where_s =
            if exprs_possible { prop::option::of(plain_expr(vars.clone())).boxed() } else { Just(None).boxed() };
        let item = if exprs_possible {
            return_item(vars.clone())
        } else {
            prop_oneof![
                literal().prop_map(Expr::Lit),
                Just(Expr::Agg { func: AggFunc::Count, distinct: false, arg: None }),
            ]
            .boxed()
        };
        let key = if exprs_possible { plain_expr(vars) } else { literal().prop_map(Expr::Lit).boxed() };
        (
            Just(paths),
            where_s,
            any::<bool>(),
            prop::collection::vec(item, 1..4),
            prop::collection::vec((key, any::<bool>()), 0..3),
            prop::option::of(0u64..1000),
        )
            .prop_map(|(paths, where_clause, distinct, returns, keys, limit)| Query {
                paths,
                where_clause,
                distinct,
                returns,
                order_by: keys.into_iter().map(|(expr, descending)| OrderKey { expr, descending }).collect(),
                limit,
            })
    })
}
