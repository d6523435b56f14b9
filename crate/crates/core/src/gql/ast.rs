use std::collections::HashMap;
use std::fmt;

use crate::graph::{format_float, PlaceholderToken, Value};

/// Parsed query. Structural equality is plain `==` on the canonical form,
/// see [`Query::canonicalize`].
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub paths: Vec<PathPattern>,
    pub where_clause: Option<Expr>,
    pub distinct: bool,
    pub returns: Vec<Expr>,
    pub order_by: Vec<OrderKey>,
    pub limit: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathPattern {
    pub start: NodePattern,
    pub steps: Vec<(EdgePattern, NodePattern)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodePattern {
    pub var: Option<String>,
    pub label: Option<String>,
    pub props: Vec<(String, Literal)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `-[..]->`
    Out,
    /// `<-[..]-`
    In,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgePattern {
    pub var: Option<String>,
    pub label: String,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderKey {
    pub expr: Expr,
    pub descending: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    /// Bare marker such as `[m]`, produced by masking.
    Placeholder(PlaceholderToken),
}

impl Literal {
    pub fn to_value(&self) -> Option<Value> {
        Some(match self {
            Literal::Null => Value::Null,
            Literal::Bool(b) => Value::Bool(*b),
            Literal::Int(i) => Value::Int(*i),
            Literal::Float(f) => Value::Float(*f),
            Literal::Str(s) => Value::Str(s.clone()),
            Literal::Placeholder(_) => return None,
        })
    }

    pub fn is_number(&self) -> bool {
        matches!(self, Literal::Int(_) | Literal::Float(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Neq,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn as_str(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Neq => "<>",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AggFunc {
    Count,
    Sum,
    Avg,
    Max,
    Min,
    Collect,
}

impl AggFunc {
    pub fn as_str(self) -> &'static str {
        match self {
            AggFunc::Count => "COUNT",
            AggFunc::Sum => "SUM",
            AggFunc::Avg => "AVG",
            AggFunc::Max => "MAX",
            AggFunc::Min => "MIN",
            AggFunc::Collect => "COLLECT",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Lit(Literal),
    Prop {
        var: String,
        key: String,
    },
    Var(String),
    Cmp {
        op: CmpOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Xor(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    /// `arg == None` means `COUNT(*)`.
    Agg {
        func: AggFunc,
        distinct: bool,
        arg: Option<Box<Expr>>,
    },
}

impl Expr {
    pub fn prop(var: &str, key: &str) -> Expr {
        Expr::Prop { var: var.into(), key: key.into() }
    }

    pub fn cmp(op: CmpOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Cmp { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }
    }

    pub fn precedence(&self) -> u8 {
        match self {
            Expr::Or(..) => 1,
            Expr::Xor(..) => 2,
            Expr::And(..) => 3,
            Expr::Not(_) => 4,
            Expr::Cmp { .. } => 5,
            _ => 6,
        }
    }

    pub fn contains_aggregate(&self) -> bool {
        let mut found = false;
        self.walk(&mut |e| found |= matches!(e, Expr::Agg { .. }));
        found
    }

    pub fn is_boolean_shaped(&self) -> bool {
        matches!(self, Expr::Cmp { .. } | Expr::And(..) | Expr::Or(..) | Expr::Xor(..) | Expr::Not(_))
    }

    /// Pre-order traversal.
    pub fn walk(&self, f: &mut dyn FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Cmp { lhs, rhs, .. } => {
                lhs.walk(f);
                rhs.walk(f);
            }
            Expr::And(a, b) | Expr::Or(a, b) | Expr::Xor(a, b) => {
                a.walk(f);
                b.walk(f);
            }
            Expr::Not(a) => a.walk(f),
            Expr::Agg { arg: Some(a), .. } => a.walk(f),
            _ => {}
        }
    }

    pub fn walk_mut(&mut self, f: &mut dyn FnMut(&mut Expr)) {
        f(self);
        match self {
            Expr::Cmp { lhs, rhs, .. } => {
                lhs.walk_mut(f);
                rhs.walk_mut(f);
            }
            Expr::And(a, b) | Expr::Or(a, b) | Expr::Xor(a, b) => {
                a.walk_mut(f);
                b.walk_mut(f);
            }
            Expr::Not(a) => a.walk_mut(f),
            Expr::Agg { arg: Some(a), .. } => a.walk_mut(f),
            _ => {}
        }
    }

    /// Variables referenced anywhere in the expression.
    pub fn variables(&self) -> Vec<&str> {
        let mut out = Vec::new();
        collect_vars(self, &mut out);
        out
    }

    fn rename(&mut self, map: &HashMap<String, String>) {
        self.walk_mut(&mut |e| match e {
            Expr::Prop { var, .. } | Expr::Var(var) => {
                if let Some(new) = map.get(var.as_str()) {
                    *var = new.clone();
                }
            }
            _ => {}
        });
    }
}

fn collect_vars<'a>(e: &'a Expr, out: &mut Vec<&'a str>) {
    match e {
        Expr::Prop { var, .. } | Expr::Var(var) => out.push(var),
        Expr::Cmp { lhs, rhs, .. } => {
            collect_vars(lhs, out);
            collect_vars(rhs, out);
        }
        Expr::And(a, b) | Expr::Or(a, b) | Expr::Xor(a, b) => {
            collect_vars(a, out);
            collect_vars(b, out);
        }
        Expr::Not(a) => collect_vars(a, out),
        Expr::Agg { arg: Some(a), .. } => collect_vars(a, out),
        Expr::Lit(_) | Expr::Agg { arg: None, .. } => {}
    }
}

impl Query {
    pub fn nodes(&self) -> impl Iterator<Item = &NodePattern> {
        self.paths.iter().flat_map(|p| std::iter::once(&p.start).chain(p.steps.iter().map(|(_, n)| n)))
    }

    pub fn edges(&self) -> impl Iterator<Item = &EdgePattern> {
        self.paths.iter().flat_map(|p| p.steps.iter().map(|(e, _)| e))
    }

    pub fn edge_count(&self) -> usize {
        self.edges().count()
    }

    /// Pattern variables in first-appearance order (nodes and edges).
    pub fn pattern_variables(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let mut push = |v: &Option<String>| {
            if let Some(v) = v {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
        };
        for p in &self.paths {
            push(&p.start.var);
            for (e, n) in &p.steps {
                push(&e.var);
                push(&n.var);
            }
        }
        out
    }

    /// Label attached to a node variable anywhere in the pattern.
    pub fn label_of(&self, var: &str) -> Option<&str> {
        self.nodes().filter(|n| n.var.as_deref() == Some(var)).find_map(|n| n.label.as_deref())
    }

    pub fn is_edge_var(&self, var: &str) -> bool {
        self.edges().any(|e| e.var.as_deref() == Some(var))
    }

    pub fn edge_label_of(&self, var: &str) -> Option<&str> {
        self.edges().find(|e| e.var.as_deref() == Some(var)).map(|e| e.label.as_str())
    }

    pub fn has_aggregates(&self) -> bool {
        self.returns.iter().any(Expr::contains_aggregate)
    }

    pub fn all_exprs(&self) -> impl Iterator<Item = &Expr> {
        self.where_clause.iter().chain(self.returns.iter()).chain(self.order_by.iter().map(|k| &k.expr))
    }

    pub fn all_exprs_mut(&mut self) -> impl Iterator<Item = &mut Expr> {
        self.where_clause.iter_mut().chain(self.returns.iter_mut()).chain(self.order_by.iter_mut().map(|k| &mut k.expr))
    }

    /// Alpha-renames variables to v1, v2, … in first-appearance order and
    /// sorts property maps by key.
    pub fn canonicalize(&self) -> Query {
        let mut q = self.clone();
        let map: HashMap<String, String> =
            self.pattern_variables().into_iter().enumerate().map(|(i, v)| (v, format!("v{}", i + 1))).collect();
        let rename = |v: &mut Option<String>| {
            if let Some(name) = v {
                *name = map[name.as_str()].clone();
            }
        };
        for p in &mut q.paths {
            rename(&mut p.start.var);
            p.start.props.sort_by(|a, b| a.0.cmp(&b.0));
            for (e, n) in &mut p.steps {
                rename(&mut e.var);
                rename(&mut n.var);
                n.props.sort_by(|a, b| a.0.cmp(&b.0));
            }
        }
        for e in q.all_exprs_mut() {
            e.rename(&map);
        }
        q
    }
}

fn write_str_lit(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("'")?;
    for ch in s.chars() {
        match ch {
            '\'' => f.write_str("\\'")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            c => write!(f, "{c}")?,
        }
    }
    f.write_str("'")
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Null => f.write_str("NULL"),
            Literal::Bool(true) => f.write_str("TRUE"),
            Literal::Bool(false) => f.write_str("FALSE"),
            Literal::Int(i) => write!(f, "{i}"),
            Literal::Float(x) => f.write_str(&format_float(*x)),
            Literal::Str(s) => write_str_lit(f, s),
            Literal::Placeholder(t) => write!(f, "{t}"),
        }
    }
}

impl fmt::Display for NodePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        if let Some(v) = &self.var {
            f.write_str(v)?;
        }
        if let Some(l) = &self.label {
            write!(f, ":{l}")?;
        }
        if !self.props.is_empty() {
            if self.var.is_some() || self.label.is_some() {
                f.write_str(" ")?;
            }
            f.write_str("{")?;
            for (i, (k, v)) in self.props.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{k}: {v}")?;
            }
            f.write_str("}")?;
        }
        f.write_str(")")
    }
}

impl fmt::Display for EdgePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let var = self.var.as_deref().unwrap_or("");
        match self.direction {
            Direction::Out => write!(f, "-[{var}:{}]->", self.label),
            Direction::In => write!(f, "<-[{var}:{}]-", self.label),
        }
    }
}

impl fmt::Display for PathPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.start)?;
        for (e, n) in &self.steps {
            write!(f, "{e}{n}")?;
        }
        Ok(())
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, child: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({child})")
    } else {
        write!(f, "{child}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prec = self.precedence();
        match self {
            Expr::Lit(l) => write!(f, "{l}"),
            Expr::Prop { var, key } => write!(f, "{var}.{key}"),
            Expr::Var(v) => f.write_str(v),
            Expr::Cmp { op, lhs, rhs } => {
                // comparisons do not chain, so any boolean-level operand needs parentheses
                write_child(f, lhs, lhs.precedence() <= prec)?;
                write!(f, " {} ", op.as_str())?;
                write_child(f, rhs, rhs.precedence() <= prec)
            }
            Expr::And(a, b) | Expr::Or(a, b) | Expr::Xor(a, b) => {
                let word = match self {
                    Expr::And(..) => "AND",
                    Expr::Or(..) => "OR",
                    _ => "XOR",
                };
                write_child(f, a, a.precedence() < prec)?;
                write!(f, " {word} ")?;
                write_child(f, b, b.precedence() <= prec)
            }
            Expr::Not(a) => {
                f.write_str("NOT ")?;
                write_child(f, a, a.precedence() < prec)
            }
            Expr::Agg { func, distinct, arg } => {
                write!(f, "{}(", func.as_str())?;
                if *distinct {
                    f.write_str("DISTINCT ")?;
                }
                match arg {
                    Some(a) => write!(f, "{a}")?,
                    None => f.write_str("*")?,
                }
                f.write_str(")")
            }
        }
    }
}

/// Prints the query as written (no renaming). Use [`Query::canonicalize`]
/// first for the canonical form.
impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("MATCH ")?;
        for (i, p) in self.paths.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{p}")?;
        }
        if let Some(w) = &self.where_clause {
            write!(f, " WHERE {w}")?;
        }
        f.write_str(" RETURN ")?;
        if self.distinct {
            f.write_str("DISTINCT ")?;
        }
        for (i, e) in self.returns.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{e}")?;
        }
        if !self.order_by.is_empty() {
            f.write_str(" ORDER BY ")?;
            for (i, k) in self.order_by.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{}", k.expr)?;
                if k.descending {
                    f.write_str(" DESC")?;
                }
            }
        }
        if let Some(n) = self.limit {
            write!(f, " LIMIT {n}")?;
        }
        Ok(())
    }
}

/// Canonical text of a query.
pub fn print_canonical(q: &Query) -> String {
    q.canonicalize().to_string()
}
