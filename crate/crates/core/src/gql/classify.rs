use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ast::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QueryType {
    EntityProperty,
    NumericalSorting,
    RelationshipInference,
    YesNo,
    RelationshipFiltering,
    AttributeComparison,
    EdgeProperty,
    StringFiltering,
}

impl QueryType {
    pub const ALL: [QueryType; 8] = [
        QueryType::EntityProperty,
        QueryType::NumericalSorting,
        QueryType::RelationshipInference,
        QueryType::YesNo,
        QueryType::RelationshipFiltering,
        QueryType::AttributeComparison,
        QueryType::EdgeProperty,
        QueryType::StringFiltering,
    ];

    pub fn label(self) -> &'static str {
        match self {
            QueryType::EntityProperty => "Entity property",
            QueryType::NumericalSorting => "Numerical sorting",
            QueryType::RelationshipInference => "Relationship inference",
            QueryType::YesNo => "Yes/No",
            QueryType::RelationshipFiltering => "Relationship filtering",
            QueryType::AttributeComparison => "Attribute comparison",
            QueryType::EdgeProperty => "Edge property",
            QueryType::StringFiltering => "String filtering",
        }
    }
}

impl fmt::Display for QueryType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Classifies a query; the first matching rule wins.
pub fn classify_query_type(q: &Query) -> QueryType {
    if !q.order_by.is_empty() {
        return QueryType::NumericalSorting;
    }
    if q.returns.iter().any(Expr::is_boolean_shaped) {
        return QueryType::YesNo;
    }
    if compares_entities(q) {
        return QueryType::AttributeComparison;
    }
    let projects_edge_prop = q.returns.iter().any(|r| {
        let mut hit = false;
        r.walk(&mut |e| {
            if let Expr::Prop { var, .. } = e {
                hit |= q.is_edge_var(var);
            }
        });
        hit
    });
    if projects_edge_prop {
        return QueryType::EdgeProperty;
    }
    if has_string_predicate(q) {
        return QueryType::StringFiltering;
    }
    let multi_hop = q.edge_count() >= 2;
    match (multi_hop, q.where_clause.is_some()) {
        (true, true) => QueryType::RelationshipFiltering,
        (true, false) => QueryType::RelationshipInference,
        _ => QueryType::EntityProperty,
    }
}

fn string_lit(e: &Expr) -> bool {
    matches!(e, Expr::Lit(Literal::Str(_)))
}

/// Variables pinned to a named entity by a map literal or `=` on a string.
fn entity_vars(q: &Query) -> BTreeSet<&str> {
    let mut out: BTreeSet<&str> = q
        .nodes()
        .filter(|n| n.props.iter().any(|(_, l)| matches!(l, Literal::Str(_))))
        .filter_map(|n| n.var.as_deref())
        .collect();
    if let Some(w) = &q.where_clause {
        let mut found = Vec::new();
        w.walk(&mut |e| {
            if let Expr::Cmp { op: CmpOp::Eq, lhs, rhs } = e {
                for (a, b) in [(lhs, rhs), (rhs, lhs)] {
                    if let Expr::Prop { var, .. } = &**a {
                        if string_lit(b) {
                            found.push(var.clone());
                        }
                    }
                }
            }
        });
        for v in found {
            if let Some(name) = q.nodes().filter_map(|n| n.var.as_deref()).find(|n| *n == v) {
                out.insert(name);
            }
        }
    }
    out
}

fn compares_entities(q: &Query) -> bool {
    let ents = entity_vars(q);
    if ents.len() < 2 {
        return false;
    }
    let mut cross = false;
    for e in q.all_exprs() {
        e.walk(&mut |x| {
            if let Expr::Cmp { lhs, rhs, .. } = x {
                if let (Expr::Prop { var: a, .. }, Expr::Prop { var: b, .. }) = (&**lhs, &**rhs) {
                    cross |= a != b && ents.contains(a.as_str()) && ents.contains(b.as_str());
                }
            }
        });
    }
    if cross {
        return true;
    }
    let mut projected: Vec<(&str, &str)> = Vec::new();
    for r in &q.returns {
        if let Expr::Prop { var, key } = r {
            if ents.contains(var.as_str()) {
                projected.push((var, key));
            }
        }
    }
    projected.iter().any(|(v, k)| projected.iter().any(|(v2, k2)| v != v2 && k == k2))
}

fn has_string_predicate(q: &Query) -> bool {
    let mut hit = false;
    for e in q.all_exprs() {
        e.walk(&mut |x| {
            if let Expr::Cmp { op, lhs, rhs } = x {
                hit |= *op != CmpOp::Eq && (string_lit(lhs) || string_lit(rhs));
            }
        });
    }
    hit
}
