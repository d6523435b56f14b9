//! Brute-force reference evaluator: enumerate every assignment of graph
//! nodes to node patterns and graph edges to edge patterns, then filter,
//! project, group, sort and cut.

use std::cmp::Ordering;

use gqlforge_core::gql::{AggFunc, CmpOp, Direction, Expr, Literal, Query};
use gqlforge_core::graph::{PropertyGraph, Value};

#[derive(Clone)]
enum Slot {
    Node(usize),
    Edge(usize),
}

struct Env<'a> {
    names: Vec<(String, Slot)>,
    g: &'a PropertyGraph,
}

impl Env<'_> {
    fn lookup(&self, var: &str) -> &Slot {
        &self.names.iter().find(|(n, _)| n == var).unwrap().1
    }
}

pub fn brute_force(q: &Query, g: &PropertyGraph) -> Result<Vec<Vec<Value>>, String> {
    // node pattern occurrences in order; anonymous ones get their own slot
    let mut slot_names: Vec<Option<String>> = Vec::new();
    let mut occ_slot: Vec<usize> = Vec::new();
    let mut occs = Vec::new();
    for n in q.nodes() {
        let idx = match &n.var {
            Some(v) => match slot_names.iter().position(|s| s.as_deref() == Some(v)) {
                Some(i) => i,
                None => {
                    slot_names.push(Some(v.clone()));
                    slot_names.len() - 1
                }
            },
            None => {
                slot_names.push(None);
                slot_names.len() - 1
            }
        };
        occ_slot.push(idx);
        occs.push(n);
    }
    // edge pattern k joins node occurrences (pos, pos + 1) within its path
    let mut edge_pats = Vec::new();
    let mut pos = 0;
    for p in &q.paths {
        for (k, (e, _)) in p.steps.iter().enumerate() {
            edge_pats.push((e, occ_slot[pos + k], occ_slot[pos + k + 1]));
        }
        pos += 1 + p.steps.len();
    }

    let n = g.nodes().len();
    let k = slot_names.len();
    let mut bindings: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    let total = n.checked_pow(k as u32).unwrap_or(0);
    for code in 0..total {
        let mut assign = Vec::with_capacity(k);
        let mut c = code;
        for _ in 0..k {
            assign.push(c % n);
            c /= n;
        }
        let ok = occs.iter().zip(&occ_slot).all(|(pat, &s)| {
            let node = g.node(assign[s]);
            pat.label.as_ref().is_none_or(|l| *l == node.label)
                && pat.props.iter().all(|(key, lit)| match (node.props.get(key), lit) {
                    (Some(v), l) => lit_matches(v, l),
                    (None, _) => false,
                })
        });
        if !ok {
            continue;
        }
        // every combination of distinct graph edges for the edge patterns
        let options: Vec<Vec<usize>> = edge_pats
            .iter()
            .map(|(e, a, b)| {
                (0..g.edges().len())
                    .filter(|&id| {
                        let ge = g.edge(id);
                        let (from, to) = match e.direction {
                            Direction::Out => (assign[*a], assign[*b]),
                            Direction::In => (assign[*b], assign[*a]),
                        };
                        ge.label == e.label && ge.src == from && ge.dst == to
                    })
                    .collect()
            })
            .collect();
        let mut combo = vec![0usize; options.len()];
        if options.iter().any(Vec::is_empty) {
            continue;
        }
        loop {
            let chosen: Vec<usize> = combo.iter().enumerate().map(|(i, &c)| options[i][c]).collect();
            let mut sorted = chosen.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() == chosen.len() {
                bindings.push((assign.clone(), chosen));
            }
            let mut i = 0;
            loop {
                if i == combo.len() {
                    break;
                }
                combo[i] += 1;
                if combo[i] < options[i].len() {
                    break;
                }
                combo[i] = 0;
                i += 1;
            }
            if i == combo.len() {
                break;
            }
        }
    }

    let envs: Vec<Env> = bindings
        .iter()
        .map(|(nodes, edges)| {
            let mut names = Vec::new();
            for (i, s) in slot_names.iter().enumerate() {
                if let Some(v) = s {
                    names.push((v.clone(), Slot::Node(nodes[i])));
                }
            }
            for (i, (e, _, _)) in edge_pats.iter().enumerate() {
                if let Some(v) = &e.var {
                    names.push((v.clone(), Slot::Edge(edges[i])));
                }
            }
            Env { names, g }
        })
        .collect();

    let mut passing = Vec::new();
    for env in envs {
        let keep = match &q.where_clause {
            None => true,
            Some(w) => eval(w, &env)? == Value::Bool(true),
        };
        if keep {
            passing.push(env);
        }
    }

    let is_agg = |e: &Expr| {
        let mut hit = false;
        e.walk(&mut |x| hit |= matches!(x, Expr::Agg { .. }));
        hit
    };
    let aggregate = q.returns.iter().any(is_agg);
    let mut rows: Vec<(Vec<Value>, Vec<Value>)> = Vec::new();
    if aggregate {
        let mut groups: Vec<(Vec<Value>, Vec<&Env>)> = Vec::new();
        for env in &passing {
            let key: Vec<Value> =
                q.returns.iter().filter(|e| !is_agg(e)).map(|e| eval(e, env)).collect::<Result<_, _>>()?;
            match groups.iter_mut().find(|(k, _)| *k == key) {
                Some((_, members)) => members.push(env),
                None => groups.push((key, vec![env])),
            }
        }
        if groups.is_empty() && q.returns.iter().all(is_agg) {
            groups.push((Vec::new(), Vec::new()));
        }
        for (key, members) in groups {
            let mut key_iter = key.into_iter();
            let mut row = Vec::new();
            for item in &q.returns {
                if is_agg(item) {
                    row.push(eval_agg_item(item, &members)?);
                } else {
                    row.push(key_iter.next().unwrap());
                }
            }
            let keys =
                q.order_by.iter().map(|k| row[q.returns.iter().position(|r| *r == k.expr).unwrap()].clone()).collect();
            rows.push((keys, row));
        }
    } else {
        for env in &passing {
            let row: Vec<Value> = q.returns.iter().map(|e| eval(e, env)).collect::<Result<_, _>>()?;
            let keys = q.order_by.iter().map(|k| eval(&k.expr, env)).collect::<Result<_, _>>()?;
            rows.push((keys, row));
        }
    }
    if q.distinct {
        let mut unique: Vec<(Vec<Value>, Vec<Value>)> = Vec::new();
        for (_, row) in rows {
            if !unique.iter().any(|(_, r)| *r == row) {
                let keys = q
                    .order_by
                    .iter()
                    .map(|k| row[q.returns.iter().position(|r| *r == k.expr).unwrap()].clone())
                    .collect();
                unique.push((keys, row));
            }
        }
        rows = unique;
    }
    rows.sort_by(|a, b| {
        for (i, k) in q.order_by.iter().enumerate() {
            let mut o = a.0[i].cmp(&b.0[i]);
            if k.descending {
                o = o.reverse();
            }
            if o != Ordering::Equal {
                return o;
            }
        }
        a.1.cmp(&b.1)
    });
    let mut out: Vec<Vec<Value>> = rows.into_iter().map(|(_, r)| r).collect();
    if let Some(l) = q.limit {
        out.truncate(l as usize);
    }
    Ok(out)
}

fn lit_value(l: &Literal) -> Value {
    match l {
        Literal::Null => Value::Null,
        Literal::Bool(b) => Value::Bool(*b),
        Literal::Int(i) => Value::Int(*i),
        Literal::Float(f) => Value::Float(*f),
        Literal::Str(s) => Value::Str(s.clone()),
        Literal::Placeholder(_) => panic!("placeholder in executable query"),
    }
}

fn lit_matches(v: &Value, l: &Literal) -> bool {
    cmp_values(CmpOp::Eq, v, &lit_value(l)) == Ok(Some(true))
}

fn num(v: &Value) -> Option<f64> {
    match v {
        Value::Int(i) => Some(*i as f64),
        Value::Float(f) => Some(*f),
        _ => None,
    }
}

fn cmp_values(op: CmpOp, a: &Value, b: &Value) -> Result<Option<bool>, String> {
    let ord = match (a, b) {
        (Value::Null, _) | (_, Value::Null) => return Ok(None),
        (Value::Int(x), Value::Int(y)) => x.cmp(y),
        (Value::Str(x), Value::Str(y)) => x.cmp(y),
        (Value::Bool(x), Value::Bool(y)) => x.cmp(y),
        _ => match (num(a), num(b)) {
            (Some(x), Some(y)) if (x - y).abs() <= 1e-9 => Ordering::Equal,
            (Some(x), Some(y)) => x.partial_cmp(&y).unwrap(),
            _ => return Err(format!("incomparable {a:?} {b:?}")),
        },
    };
    Ok(Some(match op {
        CmpOp::Eq => ord.is_eq(),
        CmpOp::Neq => ord.is_ne(),
        CmpOp::Lt => ord.is_lt(),
        CmpOp::Le => ord.is_le(),
        CmpOp::Gt => ord.is_gt(),
        CmpOp::Ge => ord.is_ge(),
    }))
}

fn to_tri(v: Value) -> Result<Option<bool>, String> {
    match v {
        Value::Bool(b) => Ok(Some(b)),
        Value::Null => Ok(None),
        other => Err(format!("not boolean: {other:?}")),
    }
}

fn from_tri(t: Option<bool>) -> Value {
    t.map_or(Value::Null, Value::Bool)
}

fn combine(e: &Expr, a: Option<bool>, b: Option<bool>) -> Value {
    // encode unknown as 1, false as 0, true as 2; AND = min, OR = max
    let enc = |t: Option<bool>| match t {
        Some(false) => 0,
        None => 1,
        Some(true) => 2,
    };
    let dec = |n: i32| match n {
        0 => Some(false),
        2 => Some(true),
        _ => None,
    };
    from_tri(match e {
        Expr::And(..) => dec(enc(a).min(enc(b))),
        Expr::Or(..) => dec(enc(a).max(enc(b))),
        _ => match (a, b) {
            (Some(x), Some(y)) => Some(x != y),
            _ => None,
        },
    })
}

fn eval(e: &Expr, env: &Env) -> Result<Value, String> {
    match e {
        Expr::Lit(l) => Ok(lit_value(l)),
        Expr::Var(v) => Ok(match env.lookup(v) {
            Slot::Node(i) => Value::Str(env.g.node(*i).id.clone()),
            Slot::Edge(i) => Value::Str(format!("e{i}")),
        }),
        Expr::Prop { var, key } => Ok(match env.lookup(var) {
            Slot::Node(i) => env.g.node(*i).props.get(key).cloned().unwrap_or(Value::Null),
            Slot::Edge(i) => env.g.edge(*i).props.get(key).cloned().unwrap_or(Value::Null),
        }),
        Expr::Cmp { op, lhs, rhs } => Ok(from_tri(cmp_values(*op, &eval(lhs, env)?, &eval(rhs, env)?)?)),
        Expr::And(a, b) | Expr::Or(a, b) | Expr::Xor(a, b) => {
            Ok(combine(e, to_tri(eval(a, env)?)?, to_tri(eval(b, env)?)?))
        }
        Expr::Not(a) => Ok(from_tri(to_tri(eval(a, env)?)?.map(|t| !t))),
        Expr::Agg { .. } => Err("aggregate in row context".into()),
    }
}

fn eval_agg_item(e: &Expr, members: &[&Env]) -> Result<Value, String> {
    match e {
        Expr::Agg { func, distinct, arg } => {
            let Some(arg) = arg else {
                return Ok(Value::Int(members.len() as i64));
            };
            let mut vals: Vec<Value> = Vec::new();
            for m in members {
                let v = eval(arg, m)?;
                if v == Value::Null || (*distinct && vals.contains(&v)) {
                    continue;
                }
                vals.push(v);
            }
            Ok(match func {
                AggFunc::Count => Value::Int(vals.len() as i64),
                AggFunc::Sum => {
                    if vals.iter().all(|v| matches!(v, Value::Int(_))) {
                        Value::Int(vals.iter().map(|v| if let Value::Int(i) = v { *i } else { 0 }).sum())
                    } else {
                        Value::Float(vals.iter().map(|v| num(v).ok_or("non-numeric sum")).sum::<Result<f64, _>>()?)
                    }
                }
                AggFunc::Avg => {
                    if vals.is_empty() {
                        Value::Null
                    } else {
                        let s: f64 = vals.iter().map(|v| num(v).unwrap()).sum();
                        Value::Float(s / vals.len() as f64)
                    }
                }
                AggFunc::Max => vals.iter().max().cloned().unwrap_or(Value::Null),
                AggFunc::Min => vals.iter().min().cloned().unwrap_or(Value::Null),
                AggFunc::Collect => {
                    vals.sort();
                    Value::List(vals)
                }
            })
        }
        Expr::Lit(l) => Ok(lit_value(l)),
        Expr::Cmp { op, lhs, rhs } => {
            Ok(from_tri(cmp_values(*op, &eval_agg_item(lhs, members)?, &eval_agg_item(rhs, members)?)?))
        }
        Expr::And(a, b) | Expr::Or(a, b) | Expr::Xor(a, b) => {
            Ok(combine(e, to_tri(eval_agg_item(a, members)?)?, to_tri(eval_agg_item(b, members)?)?))
        }
        Expr::Not(a) => Ok(from_tri(to_tri(eval_agg_item(a, members)?)?.map(|t| !t))),
        _ => Err("variable outside aggregate".into()),
    }
}
