use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::GqlError;
use crate::graph::{GraphSchema, PropertyGraph, Value, ValueKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl ResultTable {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Answer rendering: plain scalars for a single column, one array per row otherwise.
    pub fn answer_values(&self) -> Vec<Value> {
        if self.columns.len() == 1 {
            self.rows.iter().map(|r| r[0].clone()).collect()
        } else {
            self.rows.iter().map(|r| Value::List(r.clone())).collect()
        }
    }

    /// Equality under the numeric tolerance. With `ordered == false` rows
    /// are compared as multisets.
    pub fn approx_eq(&self, other: &ResultTable, ordered: bool) -> bool {
        if self.rows.len() != other.rows.len() {
            return false;
        }
        if self.rows.iter().chain(&other.rows).any(|r| r.len() != self.columns.len())
            || self.columns.len() != other.columns.len()
        {
            return false;
        }
        let row_eq = |a: &Vec<Value>, b: &Vec<Value>| a.iter().zip(b).all(|(x, y)| x.approx_eq(y));
        if ordered {
            return self.rows.iter().zip(&other.rows).all(|(a, b)| row_eq(a, b));
        }
        let mut a = self.rows.clone();
        let mut b = other.rows.clone();
        a.sort();
        b.sort();
        if a.iter().zip(&b).all(|(x, y)| row_eq(x, y)) {
            return true;
        }
        // sorting can separate values that are equal only within tolerance
        let mut used = vec![false; b.len()];
        a.iter().all(|x| match (0..b.len()).find(|&j| !used[j] && row_eq(x, &b[j])) {
            Some(j) => {
                used[j] = true;
                true
            }
            None => false,
        })
    }
}

/// Runs a query against the graph.
pub fn execute(q: &Query, graph: &PropertyGraph) -> Result<ResultTable, GqlError> {
    check(q, graph.schema())?;
    let plan = Plan::new(q);
    let mut bindings = Vec::new();
    let mut b = Binding { nodes: vec![None; plan.node_slots], edges: vec![None; plan.edge_slots] };
    plan.enumerate(graph, 0, &mut b, &mut |b| bindings.push(b.clone()));

    let ev = Eval { graph, plan: &plan };
    let mut kept = Vec::with_capacity(bindings.len());
    for b in bindings {
        let pass = match &q.where_clause {
            None => true,
            Some(w) => truth(ev.eval(w, &b)?)? == Some(true),
        };
        if pass {
            kept.push(b);
        }
    }

    let columns: Vec<String> = q.returns.iter().map(|e| e.to_string()).collect();
    let mut keyed: Vec<(Vec<Value>, Vec<Value>)> = Vec::new();
    if q.has_aggregates() {
        let mut groups: BTreeMap<Vec<Value>, Vec<&Binding>> = BTreeMap::new();
        for b in &kept {
            let key = q
                .returns
                .iter()
                .filter(|e| !e.contains_aggregate())
                .map(|e| ev.eval(e, b))
                .collect::<Result<Vec<_>, _>>()?;
            groups.entry(key).or_default().push(b);
        }
        if groups.is_empty() && q.returns.iter().all(Expr::contains_aggregate) {
            groups.insert(Vec::new(), Vec::new());
        }
        for (_, members) in groups {
            let row = q.returns.iter().map(|e| ev.eval_group(e, &members)).collect::<Result<Vec<_>, _>>()?;
            keyed.push((Vec::new(), row));
        }
    } else {
        for b in &kept {
            let row = q.returns.iter().map(|e| ev.eval(e, b)).collect::<Result<Vec<_>, _>>()?;
            let keys = if q.distinct {
                Vec::new()
            } else {
                q.order_by.iter().map(|k| ev.eval(&k.expr, b)).collect::<Result<Vec<_>, _>>()?
            };
            keyed.push((keys, row));
        }
    }
    if q.distinct {
        keyed.sort_by(|a, b| a.1.cmp(&b.1));
        keyed.dedup_by(|a, b| a.1 == b.1);
    }
    if q.distinct || q.has_aggregates() {
        for (keys, row) in &mut keyed {
            *keys = q
                .order_by
                .iter()
                .map(|k| row[q.returns.iter().position(|r| *r == k.expr).expect("checked")].clone())
                .collect();
        }
    }
    keyed.sort_by(|a, b| {
        for (i, k) in q.order_by.iter().enumerate() {
            let ord = a.0[i].cmp(&b.0[i]);
            let ord = if k.descending { ord.reverse() } else { ord };
            if ord != Ordering::Equal {
                return ord;
            }
        }
        a.1.cmp(&b.1)
    });
    let mut rows: Vec<Vec<Value>> = keyed.into_iter().map(|(_, r)| r).collect();
    if let Some(n) = q.limit {
        rows.truncate(n as usize);
    }
    Ok(ResultTable { columns, rows })
}

/// Parses then executes.
pub fn execute_text(text: &str, graph: &PropertyGraph) -> Result<ResultTable, GqlError> {
    execute(&super::parse(text)?, graph)
}

#[derive(Debug, Clone)]
struct Binding {
    nodes: Vec<Option<usize>>,
    edges: Vec<Option<usize>>,
}

struct NodeStep {
    slot: usize,
    label: Option<String>,
    props: Vec<(String, Value)>,
}

enum Step {
    Bind(NodeStep),
    Traverse { from: usize, edge_slot: usize, label: String, direction: Direction, to: NodeStep },
}

struct Plan {
    steps: Vec<Step>,
    node_slots: usize,
    edge_slots: usize,
    node_vars: HashMap<String, usize>,
    edge_vars: HashMap<String, usize>,
}

impl Plan {
    fn new(q: &Query) -> Plan {
        let mut node_vars: HashMap<String, usize> = HashMap::new();
        let mut edge_vars = HashMap::new();
        let mut node_slots = 0;
        let mut edge_slots = 0;
        let mut steps = Vec::new();
        let mut node_step = |n: &NodePattern, node_slots: &mut usize| {
            let slot = match &n.var {
                Some(v) => *node_vars.entry(v.clone()).or_insert_with(|| {
                    *node_slots += 1;
                    *node_slots - 1
                }),
                None => {
                    *node_slots += 1;
                    *node_slots - 1
                }
            };
            NodeStep {
                slot,
                label: n.label.clone(),
                props: n.props.iter().map(|(k, l)| (k.clone(), l.to_value().unwrap_or(Value::Null))).collect(),
            }
        };
        for p in &q.paths {
            let start = node_step(&p.start, &mut node_slots);
            let mut from = start.slot;
            steps.push(Step::Bind(start));
            for (e, n) in &p.steps {
                let edge_slot = edge_slots;
                edge_slots += 1;
                if let Some(v) = &e.var {
                    edge_vars.insert(v.clone(), edge_slot);
                }
                let to = node_step(n, &mut node_slots);
                let next = to.slot;
                steps.push(Step::Traverse { from, edge_slot, label: e.label.clone(), direction: e.direction, to });
                from = next;
            }
        }
        Plan { steps, node_slots, edge_slots, node_vars, edge_vars }
    }

    fn enumerate(&self, g: &PropertyGraph, i: usize, b: &mut Binding, emit: &mut dyn FnMut(&Binding)) {
        let Some(step) = self.steps.get(i) else {
            emit(b);
            return;
        };
        match step {
            Step::Bind(ns) => {
                if let Some(bound) = b.nodes[ns.slot] {
                    if node_matches(g, bound, ns) {
                        self.enumerate(g, i + 1, b, emit);
                    }
                    return;
                }
                let all: Vec<usize>;
                let candidates: &[usize] = match &ns.label {
                    Some(l) => g.nodes_of(l),
                    None => {
                        all = (0..g.nodes().len()).collect();
                        &all
                    }
                };
                for &n in candidates {
                    if node_matches(g, n, ns) {
                        b.nodes[ns.slot] = Some(n);
                        self.enumerate(g, i + 1, b, emit);
                    }
                }
                b.nodes[ns.slot] = None;
            }
            Step::Traverse { from, edge_slot, label, direction, to } => {
                let cur = b.nodes[*from].expect("path start is bound");
                let incident = match direction {
                    Direction::Out => g.out_edges(cur),
                    Direction::In => g.in_edges(cur),
                };
                for &eid in incident {
                    let edge = g.edge(eid);
                    if edge.label != *label || b.edges.contains(&Some(eid)) {
                        continue;
                    }
                    let next = match direction {
                        Direction::Out => edge.dst,
                        Direction::In => edge.src,
                    };
                    let was_bound = b.nodes[to.slot];
                    match was_bound {
                        Some(n) if n != next => continue,
                        _ => {}
                    }
                    if !node_matches(g, next, to) {
                        continue;
                    }
                    b.nodes[to.slot] = Some(next);
                    b.edges[*edge_slot] = Some(eid);
                    self.enumerate(g, i + 1, b, emit);
                    b.edges[*edge_slot] = None;
                    b.nodes[to.slot] = was_bound;
                }
            }
        }
    }
}

fn node_matches(g: &PropertyGraph, n: usize, ns: &NodeStep) -> bool {
    let node = g.node(n);
    if ns.label.as_ref().is_some_and(|l| *l != node.label) {
        return false;
    }
    ns.props.iter().all(|(k, v)| {
        let have = node.prop(k);
        !have.is_null() && !v.is_null() && have.approx_eq(v)
    })
}

struct Eval<'a> {
    graph: &'a PropertyGraph,
    plan: &'a Plan,
}

impl Eval<'_> {
    fn eval(&self, e: &Expr, b: &Binding) -> Result<Value, GqlError> {
        Ok(match e {
            Expr::Lit(l) => l.to_value().ok_or_else(|| GqlError::Semantic(format!("unfilled placeholder {l}")))?,
            Expr::Var(v) => {
                if let Some(&s) = self.plan.node_vars.get(v) {
                    Value::Str(self.graph.node(b.nodes[s].expect("bound")).id.clone())
                } else {
                    let s = self.plan.edge_vars[v];
                    Value::Str(format!("e{}", b.edges[s].expect("bound")))
                }
            }
            Expr::Prop { var, key } => {
                if let Some(&s) = self.plan.node_vars.get(var) {
                    self.graph.node(b.nodes[s].expect("bound")).prop(key).clone()
                } else {
                    let s = self.plan.edge_vars[var];
                    self.graph.edge(b.edges[s].expect("bound")).prop(key).clone()
                }
            }
            Expr::Cmp { op, lhs, rhs } => compare(*op, &self.eval(lhs, b)?, &self.eval(rhs, b)?)?,
            Expr::And(x, y) => logic(e, truth(self.eval(x, b)?)?, truth(self.eval(y, b)?)?),
            Expr::Or(x, y) => logic(e, truth(self.eval(x, b)?)?, truth(self.eval(y, b)?)?),
            Expr::Xor(x, y) => logic(e, truth(self.eval(x, b)?)?, truth(self.eval(y, b)?)?),
            Expr::Not(x) => match truth(self.eval(x, b)?)? {
                Some(t) => Value::Bool(!t),
                None => Value::Null,
            },
            Expr::Agg { .. } => return Err(GqlError::Semantic("aggregate outside RETURN".into())),
        })
    }

    /// Evaluates a return item over one group. Non-aggregate parts take the
    /// value of the first member, which grouping makes uniform.
    fn eval_group(&self, e: &Expr, members: &[&Binding]) -> Result<Value, GqlError> {
        if !e.contains_aggregate() {
            return match members.first() {
                Some(b) => self.eval(e, b),
                None => self.eval_constant(e),
            };
        }
        Ok(match e {
            Expr::Agg { func, distinct, arg } => self.aggregate(*func, *distinct, arg.as_deref(), members)?,
            Expr::Cmp { op, lhs, rhs } => {
                compare(*op, &self.eval_group(lhs, members)?, &self.eval_group(rhs, members)?)?
            }
            Expr::And(x, y) | Expr::Or(x, y) | Expr::Xor(x, y) => {
                logic(e, truth(self.eval_group(x, members)?)?, truth(self.eval_group(y, members)?)?)
            }
            Expr::Not(x) => match truth(self.eval_group(x, members)?)? {
                Some(t) => Value::Bool(!t),
                None => Value::Null,
            },
            _ => unreachable!("leaf expressions hold no aggregate"),
        })
    }

    fn eval_constant(&self, e: &Expr) -> Result<Value, GqlError> {
        let empty = Binding { nodes: Vec::new(), edges: Vec::new() };
        if e.variables().is_empty() {
            self.eval(e, &empty)
        } else {
            Ok(Value::Null)
        }
    }

    fn aggregate(
        &self,
        func: AggFunc,
        distinct: bool,
        arg: Option<&Expr>,
        members: &[&Binding],
    ) -> Result<Value, GqlError> {
        let Some(arg) = arg else {
            return Ok(Value::Int(members.len() as i64));
        };
        let mut values = Vec::with_capacity(members.len());
        for b in members {
            let v = self.eval(arg, b)?;
            if !v.is_null() {
                values.push(v);
            }
        }
        values.sort();
        if distinct {
            values.dedup();
        }
        Ok(match func {
            AggFunc::Count => Value::Int(values.len() as i64),
            AggFunc::Sum | AggFunc::Avg => {
                if let Some(bad) = values.iter().find(|v| v.as_f64().is_none()) {
                    return Err(GqlError::Type(format!("{} over non-numeric value {bad}", func.as_str())));
                }
                if func == AggFunc::Avg {
                    if values.is_empty() {
                        Value::Null
                    } else {
                        let total: f64 = values.iter().map(|v| v.as_f64().unwrap()).sum();
                        Value::Float(total / values.len() as f64)
                    }
                } else {
                    sum(&values)
                }
            }
            AggFunc::Max => values.pop().unwrap_or(Value::Null),
            AggFunc::Min => values.into_iter().next().unwrap_or(Value::Null),
            AggFunc::Collect => Value::List(values),
        })
    }
}

fn sum(values: &[Value]) -> Value {
    let mut acc: Option<i64> = Some(0);
    for v in values {
        acc = match (acc, v) {
            (Some(a), Value::Int(i)) => a.checked_add(*i),
            _ => None,
        };
    }
    match acc {
        Some(i) => Value::Int(i),
        None => Value::Float(values.iter().map(|v| v.as_f64().unwrap()).sum()),
    }
}

fn truth(v: Value) -> Result<Option<bool>, GqlError> {
    match v {
        Value::Bool(b) => Ok(Some(b)),
        Value::Null => Ok(None),
        other => Err(GqlError::Type(format!("expected a boolean, found {other}"))),
    }
}

/// Three-valued AND / OR / XOR.
fn logic(op: &Expr, a: Option<bool>, b: Option<bool>) -> Value {
    let r = match op {
        Expr::And(..) => match (a, b) {
            (Some(false), _) | (_, Some(false)) => Some(false),
            (Some(true), Some(true)) => Some(true),
            _ => None,
        },
        Expr::Or(..) => match (a, b) {
            (Some(true), _) | (_, Some(true)) => Some(true),
            (Some(false), Some(false)) => Some(false),
            _ => None,
        },
        _ => match (a, b) {
            (Some(x), Some(y)) => Some(x ^ y),
            _ => None,
        },
    };
    r.map(Value::Bool).unwrap_or(Value::Null)
}

/// Compares two values; null on either side yields null.
pub(crate) fn compare(op: CmpOp, a: &Value, b: &Value) -> Result<Value, GqlError> {
    if a.is_null() || b.is_null() {
        return Ok(Value::Null);
    }
    let ord = match (a, b) {
        (Value::List(_), Value::List(_)) => {
            if !matches!(op, CmpOp::Eq | CmpOp::Neq) {
                return Err(GqlError::Type("lists only support = and <>".into()));
            }
            if a.approx_eq(b) {
                Ordering::Equal
            } else {
                Ordering::Less
            }
        }
        _ => {
            let (ka, kb) = (a.kind(), b.kind());
            match (ka, kb) {
                (Some(x), Some(y)) if x.comparable_with(y) => {}
                _ => return Err(GqlError::Type(format!("cannot compare {a:?} with {b:?}"))),
            }
            if a.approx_eq(b) {
                Ordering::Equal
            } else {
                a.cmp(b)
            }
        }
    };
    Ok(Value::Bool(match op {
        CmpOp::Eq => ord == Ordering::Equal,
        CmpOp::Neq => ord != Ordering::Equal,
        CmpOp::Lt => ord == Ordering::Less,
        CmpOp::Le => ord != Ordering::Greater,
        CmpOp::Gt => ord == Ordering::Greater,
        CmpOp::Ge => ord != Ordering::Less,
    }))
}

/// Static checks against the schema: labels and properties must exist,
/// literal kinds must suit the properties they meet.
pub fn check(q: &Query, schema: &GraphSchema) -> Result<(), GqlError> {
    for n in q.nodes() {
        match &n.label {
            Some(l) => {
                let Some(nt) = schema.node_type(l) else {
                    return Err(GqlError::Semantic(format!("unknown node label {l}")));
                };
                for (k, lit) in &n.props {
                    let Some(p) = nt.property(k) else {
                        return Err(GqlError::Semantic(format!("node type {l} has no property {k}")));
                    };
                    let v = literal_value(lit)?;
                    if !v.is_null() && !v.kind().is_some_and(|vk| vk.comparable_with(p.kind)) {
                        return Err(GqlError::Type(format!("{l}.{k} is {}, not {v:?}", p.kind)));
                    }
                }
            }
            None => {
                for (k, lit) in &n.props {
                    literal_value(lit)?;
                    if schema.owners_of_property(k).next().is_none() {
                        return Err(GqlError::Semantic(format!("no node type has property {k}")));
                    }
                }
            }
        }
    }
    for e in q.edges() {
        if schema.edge_type(&e.label).is_none() {
            return Err(GqlError::Semantic(format!("unknown edge type {}", e.label)));
        }
    }
    for e in q.all_exprs() {
        static_kind(q, schema, e)?;
    }
    if q.has_aggregates() {
        for item in &q.returns {
            if item.contains_aggregate() && !matches!(item, Expr::Agg { .. }) && outside_agg_vars(item) {
                return Err(GqlError::Semantic(format!("`{item}` mixes aggregated and non-aggregated variables")));
            }
        }
    }
    if q.has_aggregates() || q.distinct {
        for k in &q.order_by {
            if !q.returns.contains(&k.expr) {
                return Err(GqlError::Semantic(format!("ORDER BY {} must be one of the returned expressions", k.expr)));
            }
        }
    }
    Ok(())
}

fn outside_agg_vars(e: &Expr) -> bool {
    match e {
        Expr::Prop { .. } | Expr::Var(_) => true,
        Expr::Agg { .. } | Expr::Lit(_) => false,
        Expr::Cmp { lhs, rhs, .. } => outside_agg_vars(lhs) || outside_agg_vars(rhs),
        Expr::And(a, b) | Expr::Or(a, b) | Expr::Xor(a, b) => outside_agg_vars(a) || outside_agg_vars(b),
        Expr::Not(a) => outside_agg_vars(a),
    }
}

fn literal_value(l: &Literal) -> Result<Value, GqlError> {
    l.to_value().ok_or_else(|| GqlError::Semantic(format!("unfilled placeholder {l}")))
}

/// Declared kind of an expression where it is statically known.
fn static_kind(q: &Query, schema: &GraphSchema, e: &Expr) -> Result<Option<ValueKind>, GqlError> {
    Ok(match e {
        Expr::Lit(l) => literal_value(l)?.kind(),
        Expr::Var(_) => Some(ValueKind::String),
        Expr::Prop { var, key } => {
            if let Some(el) = q.edge_label_of(var) {
                let et = schema.edge_type(el).expect("checked above");
                match et.property(key) {
                    Some(p) => Some(p.kind),
                    None => return Err(GqlError::Semantic(format!("edge type {el} has no property {key}"))),
                }
            } else if let Some(l) = q.label_of(var) {
                let nt = schema.node_type(l).expect("checked above");
                match nt.property(key) {
                    Some(p) => Some(p.kind),
                    None => return Err(GqlError::Semantic(format!("node type {l} has no property {key}"))),
                }
            } else {
                let mut owners = schema.owners_of_property(key);
                match owners.next() {
                    None => return Err(GqlError::Semantic(format!("no node type has property {key}"))),
                    Some(_) => None,
                }
            }
        }
        Expr::Cmp { lhs, rhs, .. } => {
            let (a, b) = (static_kind(q, schema, lhs)?, static_kind(q, schema, rhs)?);
            if let (Some(x), Some(y)) = (a, b) {
                if !x.comparable_with(y) {
                    return Err(GqlError::Type(format!("cannot compare {lhs} ({x}) with {rhs} ({y})")));
                }
            }
            Some(ValueKind::Boolean)
        }
        Expr::And(a, b) | Expr::Or(a, b) | Expr::Xor(a, b) => {
            for side in [a, b] {
                if let Some(k) = static_kind(q, schema, side)? {
                    if k != ValueKind::Boolean {
                        return Err(GqlError::Type(format!("{side} is {k}, not boolean")));
                    }
                }
            }
            Some(ValueKind::Boolean)
        }
        Expr::Not(a) => {
            if let Some(k) = static_kind(q, schema, a)? {
                if k != ValueKind::Boolean {
                    return Err(GqlError::Type(format!("{a} is {k}, not boolean")));
                }
            }
            Some(ValueKind::Boolean)
        }
        Expr::Agg { func, arg, .. } => {
            let inner = match arg {
                Some(a) => static_kind(q, schema, a)?,
                None => None,
            };
            match func {
                AggFunc::Count => Some(ValueKind::Number),
                AggFunc::Sum | AggFunc::Avg => {
                    if let Some(k) = inner {
                        if k != ValueKind::Number {
                            return Err(GqlError::Type(format!("{} over {k} values", func.as_str())));
                        }
                    }
                    Some(ValueKind::Number)
                }
                AggFunc::Max | AggFunc::Min => inner,
                AggFunc::Collect => None,
            }
        }
    })
}
