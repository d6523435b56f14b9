//! The controlled English used by the mock generator, its mapping to and
//! from queries, and the structured focus handed to question prompts.
//!
//! Question forms (names with underscores are written with spaces):
//!
//! ```text
//! attribute    What is the {p} of {S}?
//! dated        What is the {p} of {S} on {D}?
//! superlative  Which {A} in {S} has the highest|lowest {p}?
//! neighbour    Which {B} is connected to {S} via {R}?
//! aggregate    What is the average|total|maximum|minimum {p} of the {B} connected to {S} via {R}?
//!              How many {B} are connected to {S} via {R}?
//! filter       Which {B} connected to {S} via {R} have {q} of at least {N}[ and ...]?
//! ```

use std::collections::BTreeMap;

use crate::gql::{AggFunc, CmpOp, Direction, EdgePattern, Expr, Literal, NodePattern, OrderKey, PathPattern, Query};
use crate::graph::{find_placeholders, is_iso_date, EdgeTypeDef, GraphSchema, PlaceholderToken, PropertyGraph, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum Form {
    Attribute {
        property: String,
    },
    Dated {
        property: String,
        date: String,
    },
    Superlative {
        target: String,
        highest: bool,
        property: String,
    },
    Neighbour {
        target: String,
        relation: String,
    },
    /// `property` is `None` exactly for counts.
    Aggregate {
        func: AggFunc,
        property: Option<String>,
        target: String,
        relation: String,
    },
    Filter {
        target: String,
        relation: String,
        conditions: Vec<(String, String)>,
    },
}

impl Form {
    pub fn kind(&self) -> &'static str {
        match self {
            Form::Attribute { .. } => "attribute",
            Form::Dated { .. } => "dated",
            Form::Superlative { .. } => "superlative",
            Form::Neighbour { .. } => "neighbour",
            Form::Aggregate { .. } => "aggregate",
            Form::Filter { .. } => "filter",
        }
    }

    /// The property whose value the question asks for, if any.
    pub fn asked_property(&self) -> Option<&str> {
        match self {
            Form::Attribute { property } | Form::Dated { property, .. } => Some(property),
            Form::Aggregate { property, .. } => property.as_deref(),
            _ => None,
        }
    }

    pub fn relation(&self) -> Option<&str> {
        match self {
            Form::Neighbour { relation, .. } | Form::Aggregate { relation, .. } | Form::Filter { relation, .. } => {
                Some(relation)
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NlQuestion {
    pub subject: String,
    pub form: Form,
}

pub fn humanize(name: &str) -> String {
    name.replace('_', " ")
}

fn agg_word(f: AggFunc) -> Option<&'static str> {
    match f {
        AggFunc::Avg => Some("average"),
        AggFunc::Sum => Some("total"),
        AggFunc::Max => Some("maximum"),
        AggFunc::Min => Some("minimum"),
        _ => None,
    }
}

pub(crate) fn agg_from_word(w: &str) -> Option<AggFunc> {
    [AggFunc::Avg, AggFunc::Sum, AggFunc::Max, AggFunc::Min].into_iter().find(|f| agg_word(*f) == Some(w))
}

impl NlQuestion {
    pub fn render(&self) -> String {
        let s = &self.subject;
        match &self.form {
            Form::Attribute { property } => format!("What is the {} of {s}?", humanize(property)),
            Form::Dated { property, date } => format!("What is the {} of {s} on {date}?", humanize(property)),
            Form::Superlative { target, highest, property } => format!(
                "Which {} in {s} has the {} {}?",
                humanize(target),
                if *highest { "highest" } else { "lowest" },
                humanize(property)
            ),
            Form::Neighbour { target, relation } => {
                format!("Which {} is connected to {s} via {}?", humanize(target), humanize(relation))
            }
            Form::Aggregate { func: AggFunc::Count, target, relation, .. } => {
                format!("How many {} are connected to {s} via {}?", humanize(target), humanize(relation))
            }
            Form::Aggregate { func, property, target, relation } => format!(
                "What is the {} {} of the {} connected to {s} via {}?",
                agg_word(*func).unwrap_or("average"),
                humanize(property.as_deref().unwrap_or_default()),
                humanize(target),
                humanize(relation)
            ),
            Form::Filter { target, relation, conditions } => {
                let conds: Vec<String> =
                    conditions.iter().map(|(p, n)| format!("{} of at least {n}", humanize(p))).collect();
                format!(
                    "Which {} connected to {s} via {} have {}?",
                    humanize(target),
                    humanize(relation),
                    conds.join(" and ")
                )
            }
        }
    }

    /// Recognizes any of the question forms; names are checked against the schema.
    pub fn parse(text: &str, schema: &GraphSchema) -> Option<NlQuestion> {
        let v = Vocab::new(schema);
        let text = text.trim().strip_suffix('?')?;
        parse_aggregate(text, &v)
            .or_else(|| parse_count(text, &v))
            .or_else(|| parse_superlative(text, &v))
            .or_else(|| parse_filter(text, &v))
            .or_else(|| parse_neighbour(text, &v))
            .or_else(|| parse_dated(text, &v))
            .or_else(|| parse_attribute(text, &v))
    }

    /// Builds the query for this question when the subject has type `subject_type`.
    pub fn to_query(&self, schema: &GraphSchema, subject_type: &str) -> Result<Query, String> {
        let t = schema.node_type(subject_type).ok_or_else(|| format!("unknown type {subject_type}"))?;
        let bound = t.bound_property().ok_or_else(|| format!("{subject_type} has no naming property"))?;
        let named = |var: &str| NodePattern {
            var: Some(var.into()),
            label: Some(t.name.clone()),
            props: vec![(bound.name.clone(), Literal::Str(self.subject.clone()))],
        };
        let plain =
            |var: &str, label: &str| NodePattern { var: Some(var.into()), label: Some(label.into()), props: vec![] };
        let q = |paths, where_clause, returns, order_by, limit| Query {
            paths,
            where_clause,
            distinct: false,
            returns,
            order_by,
            limit,
        };
        match &self.form {
            Form::Attribute { property } => {
                t.property(property).ok_or_else(|| format!("{subject_type} has no property {property}"))?;
                let path = PathPattern { start: named("s"), steps: vec![] };
                Ok(q(vec![path], None, vec![Expr::prop("s", property)], vec![], None))
            }
            Form::Dated { property, date } => {
                let (edge, other) = schema
                    .incident_edges(&t.name)
                    .filter_map(|e| Some((e, schema.node_type(e.other_end(&t.name)?)?)))
                    .find(|(_, n)| n.is_date_keyed() && n.property(property).is_some())
                    .ok_or_else(|| format!("no dated neighbour of {subject_type} has {property}"))?;
                let key = other.bound_property().expect("date keyed").name.clone();
                let d = NodePattern {
                    var: Some("d".into()),
                    label: Some(other.name.clone()),
                    props: vec![(key, Literal::Str(date.clone()))],
                };
                let path = PathPattern { start: named("s"), steps: vec![(step(edge, &t.name), d)] };
                Ok(q(vec![path], None, vec![Expr::prop("d", property)], vec![], None))
            }
            Form::Superlative { target, highest, property } => {
                let a = schema.node_type(target).ok_or_else(|| format!("unknown type {target}"))?;
                a.property(property).ok_or_else(|| format!("{target} has no property {property}"))?;
                let a_bound = a.bound_property().ok_or_else(|| format!("{target} has no naming property"))?;
                let edge = edge_between(schema, target, &t.name, None)?;
                let path =
                    PathPattern { start: plain("a", target), steps: vec![(step(edge, target), plain("n", &t.name))] };
                let filter =
                    Expr::cmp(CmpOp::Eq, Expr::prop("n", &bound.name), Expr::Lit(Literal::Str(self.subject.clone())));
                let order = OrderKey { expr: Expr::prop("a", property), descending: *highest };
                Ok(q(vec![path], Some(filter), vec![Expr::prop("a", &a_bound.name)], vec![order], Some(1)))
            }
            Form::Neighbour { target, relation }
            | Form::Aggregate { target, relation, .. }
            | Form::Filter { target, relation, .. } => {
                let b = schema.node_type(target).ok_or_else(|| format!("unknown type {target}"))?;
                let edge = edge_between(schema, &t.name, target, Some(relation))?;
                let path = PathPattern { start: named("s"), steps: vec![(step(edge, &t.name), plain("b", target))] };
                let b_name = || {
                    b.bound_property()
                        .map(|p| Expr::prop("b", &p.name))
                        .ok_or_else(|| format!("{target} has no naming property"))
                };
                match &self.form {
                    Form::Neighbour { .. } => Ok(q(vec![path], None, vec![b_name()?], vec![], None)),
                    Form::Aggregate { func, property, .. } => {
                        let arg = match property {
                            None => Expr::Var("b".into()),
                            Some(p) => {
                                b.property(p).ok_or_else(|| format!("{target} has no property {p}"))?;
                                Expr::prop("b", p)
                            }
                        };
                        let agg = Expr::Agg { func: *func, distinct: false, arg: Some(Box::new(arg)) };
                        Ok(q(vec![path], None, vec![agg], vec![], None))
                    }
                    Form::Filter { conditions, .. } => {
                        let mut filter: Option<Expr> = None;
                        for (p, n) in conditions {
                            b.property(p).ok_or_else(|| format!("{target} has no property {p}"))?;
                            let c = Expr::cmp(CmpOp::Ge, Expr::prop("b", p), Expr::Lit(number_literal(n)?));
                            filter = Some(match filter {
                                None => c,
                                Some(f) => Expr::And(Box::new(f), Box::new(c)),
                            });
                        }
                        Ok(q(vec![path], filter, vec![b_name()?], vec![], None))
                    }
                    _ => unreachable!(),
                }
            }
        }
    }

    /// Reads a query of one of the generated shapes back into a question.
    pub fn from_query(q: &Query, schema: &GraphSchema) -> Option<NlQuestion> {
        if q.distinct || q.paths.len() != 1 {
            return None;
        }
        let path = &q.paths[0];
        match path.steps.as_slice() {
            [] => {
                let (subject, var) = named_node(&path.start, schema)?;
                match (q.where_clause.as_ref(), q.returns.as_slice(), q.order_by.is_empty(), q.limit) {
                    (None, [Expr::Prop { var: v, key }], true, None) if *v == var => {
                        Some(NlQuestion { subject, form: Form::Attribute { property: key.clone() } })
                    }
                    _ => None,
                }
            }
            [(edge, end)] => {
                let start = &path.start;
                if q.where_clause.is_some() && !q.order_by.is_empty() {
                    return superlative(q, start, end, schema);
                }
                if !q.order_by.is_empty() || q.limit.is_some() {
                    return None;
                }
                let (subj, other) = if named_node(start, schema).is_some() { (start, end) } else { (end, start) };
                let (subject, _) = named_node(subj, schema)?;
                let o_var = other.var.clone()?;
                let o_type = schema.node_type(other.label.as_deref()?)?;
                if !other.props.is_empty() {
                    let [(key, Literal::Str(date))] = other.props.as_slice() else { return None };
                    if !o_type.is_date_keyed() || o_type.bound_property()?.name != *key || q.where_clause.is_some() {
                        return None;
                    }
                    let [Expr::Prop { var, key: p }] = q.returns.as_slice() else { return None };
                    if *var != o_var {
                        return None;
                    }
                    return Some(NlQuestion { subject, form: Form::Dated { property: p.clone(), date: date.clone() } });
                }
                let target = o_type.name.clone();
                let relation = edge.label.clone();
                let names_other = |e: &Expr| {
                    matches!(e, Expr::Prop { var, key } if *var == o_var
                        && o_type.bound_property().is_some_and(|b| b.name == *key))
                };
                match (q.where_clause.as_ref(), q.returns.as_slice()) {
                    (None, [r]) if names_other(r) => {
                        Some(NlQuestion { subject, form: Form::Neighbour { target, relation } })
                    }
                    (None, [Expr::Agg { func, distinct: false, arg: Some(arg) }]) => {
                        let property = match (func, arg.as_ref()) {
                            (AggFunc::Count, Expr::Var(v)) if *v == o_var => None,
                            (f, Expr::Prop { var, key }) if *var == o_var && agg_word(*f).is_some() => {
                                Some(key.clone())
                            }
                            _ => return None,
                        };
                        Some(NlQuestion { subject, form: Form::Aggregate { func: *func, property, target, relation } })
                    }
                    (Some(w), [r]) if names_other(r) => {
                        let mut conditions = Vec::new();
                        collect_conditions(w, &o_var, &mut conditions)?;
                        Some(NlQuestion { subject, form: Form::Filter { target, relation, conditions } })
                    }
                    _ => None,
                }
            }
            _ => None,
        }
    }
}

fn superlative(q: &Query, start: &NodePattern, end: &NodePattern, schema: &GraphSchema) -> Option<NlQuestion> {
    if q.limit != Some(1) || q.order_by.len() != 1 || !start.props.is_empty() || !end.props.is_empty() {
        return None;
    }
    let Some(Expr::Cmp { op: CmpOp::Eq, lhs, rhs }) = q.where_clause.as_ref() else { return None };
    let (Expr::Prop { var: n_var, key }, Expr::Lit(Literal::Str(name))) = (lhs.as_ref(), rhs.as_ref()) else {
        return None;
    };
    let (n, a) = if start.var.as_ref() == Some(n_var) { (start, end) } else { (end, start) };
    if n.var.as_ref() != Some(n_var) {
        return None;
    }
    let n_type = schema.node_type(n.label.as_deref()?)?;
    if !n_type.is_nameable() || n_type.bound_property()?.name != *key {
        return None;
    }
    let a_var = a.var.as_ref()?;
    let a_type = schema.node_type(a.label.as_deref()?)?;
    let [Expr::Prop { var, key: ret }] = q.returns.as_slice() else { return None };
    if var != a_var || a_type.bound_property()?.name != *ret {
        return None;
    }
    let OrderKey { expr: Expr::Prop { var, key: property }, descending } = &q.order_by[0] else { return None };
    if var != a_var {
        return None;
    }
    Some(NlQuestion {
        subject: name.clone(),
        form: Form::Superlative { target: a_type.name.clone(), highest: *descending, property: property.clone() },
    })
}

fn collect_conditions(e: &Expr, var: &str, out: &mut Vec<(String, String)>) -> Option<()> {
    match e {
        Expr::And(l, r) => {
            collect_conditions(l, var, out)?;
            collect_conditions(r, var, out)
        }
        Expr::Cmp { op: CmpOp::Ge, lhs, rhs } => {
            let (Expr::Prop { var: v, key }, Expr::Lit(lit)) = (lhs.as_ref(), rhs.as_ref()) else { return None };
            let n = match lit {
                Literal::Int(i) => i.to_string(),
                Literal::Float(_) => lit.to_value()?.to_string(),
                Literal::Placeholder(PlaceholderToken::Number) => "[m]".to_string(),
                _ => return None,
            };
            (v == var).then(|| out.push((key.clone(), n)))
        }
        _ => None,
    }
}

/// The subject node: a nameable type constrained only by its naming property.
fn named_node(n: &NodePattern, schema: &GraphSchema) -> Option<(String, String)> {
    let t = schema.node_type(n.label.as_deref()?)?;
    let [(key, Literal::Str(name))] = n.props.as_slice() else { return None };
    (t.is_nameable() && t.bound_property()?.name == *key)
        .then(|| (name.clone(), n.var.clone().unwrap_or_default()))
        .filter(|(_, v)| !v.is_empty())
}

fn step(edge: &EdgeTypeDef, from: &str) -> EdgePattern {
    let direction = if edge.source == from { Direction::Out } else { Direction::In };
    EdgePattern { var: None, label: edge.name.clone(), direction }
}

fn edge_between<'a>(schema: &'a GraphSchema, a: &str, b: &str, label: Option<&str>) -> Result<&'a EdgeTypeDef, String> {
    schema
        .edge_types
        .iter()
        .filter(|e| label.is_none_or(|l| e.name == l))
        .find(|e| (e.source == a && e.target == b) || (e.source == b && e.target == a))
        .ok_or_else(|| match label {
            Some(l) => format!("edge type {l} does not join {a} and {b}"),
            None => format!("no edge type joins {a} and {b}"),
        })
}

fn number_literal(text: &str) -> Result<Literal, String> {
    if text == "[m]" {
        return Ok(Literal::Placeholder(PlaceholderToken::Number));
    }
    if let Ok(i) = text.parse::<i64>() {
        return Ok(Literal::Int(i));
    }
    text.parse::<f64>()
        .ok()
        .filter(|f| f.is_finite())
        .map(Literal::Float)
        .ok_or_else(|| format!("not a number: {text}"))
}

fn is_number_text(text: &str) -> bool {
    number_literal(text).is_ok()
}

/// Schema names with their written forms, longest first.
struct Vocab {
    props: Vec<(String, String)>,
    types: Vec<(String, String)>,
    rels: Vec<(String, String)>,
}

impl Vocab {
    fn new(schema: &GraphSchema) -> Self {
        let sorted = |names: Vec<&String>| {
            let mut v: Vec<(String, String)> = names.into_iter().map(|n| (humanize(n), n.clone())).collect();
            v.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.0.cmp(&b.0)));
            v.dedup();
            v
        };
        Vocab {
            props: sorted(schema.node_types.iter().flat_map(|t| t.properties.iter().map(|p| &p.name)).collect()),
            types: sorted(schema.node_types.iter().map(|t| &t.name).collect()),
            rels: sorted(schema.edge_types.iter().map(|e| &e.name).collect()),
        }
    }
}

fn exact(names: &[(String, String)], text: &str) -> Option<String> {
    names.iter().find(|(h, _)| h == text).map(|(_, n)| n.clone())
}

/// Every way `text` starts with a known name followed by `sep`.
fn prefixed<'a>(
    names: &'a [(String, String)],
    text: &'a str,
    sep: &'a str,
) -> impl Iterator<Item = (String, &'a str)> + 'a {
    names.iter().filter_map(move |(h, n)| Some((n.clone(), text.strip_prefix(h.as_str())?.strip_prefix(sep)?)))
}

fn subject_ok(s: &str) -> bool {
    !s.is_empty() && s.trim() == s
}

fn parse_aggregate(text: &str, v: &Vocab) -> Option<NlQuestion> {
    let rest = text.strip_prefix("What is the ")?;
    let (word, rest) = rest.split_once(' ')?;
    let func = agg_from_word(word)?;
    for (property, rest) in prefixed(&v.props, rest, " of the ") {
        for (target, rest) in prefixed(&v.types, rest, " connected to ") {
            let Some((subject, rel)) = rest.rsplit_once(" via ") else { continue };
            if let (Some(relation), true) = (exact(&v.rels, rel), subject_ok(subject)) {
                let form = Form::Aggregate { func, property: Some(property.clone()), target, relation };
                return Some(NlQuestion { subject: subject.to_string(), form });
            }
        }
    }
    None
}

fn parse_count(text: &str, v: &Vocab) -> Option<NlQuestion> {
    let rest = text.strip_prefix("How many ")?;
    for (target, rest) in prefixed(&v.types, rest, " are connected to ") {
        let Some((subject, rel)) = rest.rsplit_once(" via ") else { continue };
        if let (Some(relation), true) = (exact(&v.rels, rel), subject_ok(subject)) {
            let form = Form::Aggregate { func: AggFunc::Count, property: None, target, relation };
            return Some(NlQuestion { subject: subject.to_string(), form });
        }
    }
    None
}

fn parse_superlative(text: &str, v: &Vocab) -> Option<NlQuestion> {
    let rest = text.strip_prefix("Which ")?;
    for (target, rest) in prefixed(&v.types, rest, " in ") {
        for (marker, highest) in [(" has the highest ", true), (" has the lowest ", false)] {
            let Some((subject, prop)) = rest.rsplit_once(marker) else { continue };
            if let (Some(property), true) = (exact(&v.props, prop), subject_ok(subject)) {
                let form = Form::Superlative { target: target.clone(), highest, property };
                return Some(NlQuestion { subject: subject.to_string(), form });
            }
        }
    }
    None
}

fn parse_filter(text: &str, v: &Vocab) -> Option<NlQuestion> {
    let rest = text.strip_prefix("Which ")?;
    for (target, rest) in prefixed(&v.types, rest, " connected to ") {
        let Some((head, conds)) = rest.rsplit_once(" have ") else { continue };
        let Some((subject, rel)) = head.rsplit_once(" via ") else { continue };
        let Some(relation) = exact(&v.rels, rel) else { continue };
        let mut conditions = Vec::new();
        for c in conds.split(" and ") {
            let (p, n) = c.rsplit_once(" of at least ")?;
            if !is_number_text(n) {
                return None;
            }
            conditions.push((exact(&v.props, p)?, n.to_string()));
        }
        if subject_ok(subject) {
            let form = Form::Filter { target, relation, conditions };
            return Some(NlQuestion { subject: subject.to_string(), form });
        }
    }
    None
}

fn parse_neighbour(text: &str, v: &Vocab) -> Option<NlQuestion> {
    let rest = text.strip_prefix("Which ")?;
    for (target, rest) in prefixed(&v.types, rest, " is connected to ") {
        let Some((subject, rel)) = rest.rsplit_once(" via ") else { continue };
        if let (Some(relation), true) = (exact(&v.rels, rel), subject_ok(subject)) {
            return Some(NlQuestion { subject: subject.to_string(), form: Form::Neighbour { target, relation } });
        }
    }
    None
}

fn parse_dated(text: &str, v: &Vocab) -> Option<NlQuestion> {
    let rest = text.strip_prefix("What is the ")?;
    for (property, rest) in prefixed(&v.props, rest, " of ") {
        let Some((subject, date)) = rest.rsplit_once(" on ") else { continue };
        if (is_iso_date(date) || date == "[d]") && subject_ok(subject) {
            let form = Form::Dated { property, date: date.to_string() };
            return Some(NlQuestion { subject: subject.to_string(), form });
        }
    }
    None
}

fn parse_attribute(text: &str, v: &Vocab) -> Option<NlQuestion> {
    let rest = text.strip_prefix("What is the ")?;
    prefixed(&v.props, rest, " of ")
        .find(|(_, s)| subject_ok(s))
        .map(|(property, subject)| NlQuestion { subject: subject.to_string(), form: Form::Attribute { property } })
}

/// Entity names known to the generator, mapped to their node types.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    names: BTreeMap<String, String>,
}

impl Lexicon {
    pub fn from_graph(graph: &PropertyGraph) -> Self {
        let mut names = BTreeMap::new();
        for t in &graph.schema().node_types {
            let Some(bound) = t.bound_property().filter(|_| t.is_nameable()) else { continue };
            for &i in graph.nodes_of(&t.name) {
                if let Value::Str(s) = graph.node(i).prop(&bound.name) {
                    names.entry(s.clone()).or_insert_with(|| t.name.clone());
                }
            }
        }
        Lexicon { names }
    }

    pub fn insert(&mut self, name: &str, node_type: &str) {
        self.names.insert(name.to_string(), node_type.to_string());
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn type_of(&self, name: &str) -> Option<&str> {
        self.names.get(name).map(String::as_str)
    }

    /// The shortest known name starting with `prefix` (case-insensitive).
    pub fn complete(&self, prefix: &str) -> Option<&str> {
        let p = prefix.trim().to_lowercase();
        if p.is_empty() {
            return None;
        }
        self.names
            .keys()
            .filter(|n| n.to_lowercase().starts_with(&p))
            .min_by_key(|n| (n.len(), n.as_str()))
            .map(String::as_str)
    }

    /// Known names occurring in `text` as whole words, longest first.
    pub fn names_in(&self, text: &str) -> Vec<&str> {
        let lower = text.to_lowercase();
        let mut found: Vec<&str> = self
            .names
            .keys()
            .filter(|n| {
                let n = n.to_lowercase();
                lower.match_indices(&n).any(|(i, _)| {
                    let before = lower[..i].chars().next_back();
                    let after = lower[i + n.len()..].chars().next();
                    !before.is_some_and(char::is_alphanumeric) && !after.is_some_and(char::is_alphanumeric)
                })
            })
            .map(String::as_str)
            .collect();
        found.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
        found
    }
}

/// Resolves the subject's node type: placeholder token, then the lexicon,
/// then the first nameable type under which the question builds a query.
pub fn resolve_query(nl: &NlQuestion, schema: &GraphSchema, lexicon: &Lexicon) -> Result<Query, String> {
    let token = match find_placeholders(&nl.subject).as_slice() {
        [(0, t)] if nl.subject.len() == 3 => Some(*t),
        _ => None,
    };
    if let Some(t) = token {
        let ty = schema.node_type_for_token(t).ok_or_else(|| format!("no type for {t}"))?;
        return nl.to_query(schema, &ty.name);
    }
    if let Some(ty) = lexicon.type_of(&nl.subject) {
        return nl.to_query(schema, ty);
    }
    let mut last = format!("cannot place {}", nl.subject);
    for t in schema.node_types.iter().filter(|t| t.is_nameable()) {
        match nl.to_query(schema, &t.name) {
            Ok(q) => return Ok(q),
            Err(e) => last = e,
        }
    }
    Err(last)
}

/// Structured hint telling the question generator what to ask about.
/// Dates and thresholds stay as placeholders.
#[derive(Debug, Clone, PartialEq)]
pub struct Focus {
    pub entity_type: String,
    pub form: Form,
}

impl Focus {
    pub fn render(&self) -> String {
        let mut lines = vec![format!("entity type: {}", self.entity_type), format!("form: {}", self.form.kind())];
        let mut push = |k: &str, v: &str| lines.push(format!("{k}: {v}"));
        match &self.form {
            Form::Attribute { property } | Form::Dated { property, .. } => push("property", property),
            Form::Superlative { target, highest, property } => {
                push("target type", target);
                push("order", if *highest { "highest" } else { "lowest" });
                push("property", property);
            }
            Form::Neighbour { target, relation } => {
                push("target type", target);
                push("relation", relation);
            }
            Form::Aggregate { func, property, target, relation } => {
                push("target type", target);
                push("relation", relation);
                push("aggregate", agg_word(*func).unwrap_or("count"));
                if let Some(p) = property {
                    push("property", p);
                }
            }
            Form::Filter { target, relation, conditions } => {
                push("target type", target);
                push("relation", relation);
                let names: Vec<&str> = conditions.iter().map(|(p, _)| p.as_str()).collect();
                push("conditions", &names.join(", "));
            }
        }
        lines.join("\n")
    }

    pub fn parse(text: &str) -> Option<Focus> {
        let fields: BTreeMap<&str, &str> =
            text.lines().filter_map(|l| l.split_once(':')).map(|(k, v)| (k.trim(), v.trim())).collect();
        let get = |k: &str| fields.get(k).map(|s| s.to_string());
        let form = match *fields.get("form")? {
            "attribute" => Form::Attribute { property: get("property")? },
            "dated" => Form::Dated { property: get("property")?, date: "[d]".into() },
            "superlative" => Form::Superlative {
                target: get("target type")?,
                highest: *fields.get("order")? != "lowest",
                property: get("property")?,
            },
            "neighbour" => Form::Neighbour { target: get("target type")?, relation: get("relation")? },
            "aggregate" => {
                let word = *fields.get("aggregate")?;
                let (func, property) = match word {
                    "count" => (AggFunc::Count, None),
                    w => (agg_from_word(w)?, Some(get("property")?)),
                };
                Form::Aggregate { func, property, target: get("target type")?, relation: get("relation")? }
            }
            "filter" => Form::Filter {
                target: get("target type")?,
                relation: get("relation")?,
                conditions: fields
                    .get("conditions")?
                    .split(',')
                    .map(|p| (p.trim().to_string(), "[m]".to_string()))
                    .filter(|(p, _)| !p.is_empty())
                    .collect(),
            },
            _ => return None,
        };
        Some(Focus { entity_type: get("entity type")?, form })
    }

    /// The question in placeholder form, subject written as its type's token.
    pub fn question(&self, schema: &GraphSchema) -> Option<NlQuestion> {
        let token = schema.node_type(&self.entity_type)?.placeholder.as_ref()?.token;
        let form = match &self.form {
            Form::Dated { property, .. } => Form::Dated { property: property.clone(), date: "[d]".into() },
            Form::Filter { target, relation, conditions } => Form::Filter {
                target: target.clone(),
                relation: relation.clone(),
                conditions: conditions.iter().map(|(p, _)| (p.clone(), "[m]".into())).collect(),
            },
            f => f.clone(),
        };
        Some(NlQuestion { subject: token.as_str().to_string(), form })
    }
}
