use std::collections::HashMap;

use super::ast::*;
use super::lexer::{tokenize, Kw, Tok, Token};
use super::GqlError;
use crate::graph::PlaceholderToken;

/// Parses one MATCH query. Keywords are case-insensitive; a trailing `;`
/// is allowed.
pub fn parse(text: &str) -> Result<Query, GqlError> {
    let tokens = tokenize(text)?;
    let mut p = Parser { tokens, pos: 0, in_where: false, in_agg: false, var_offsets: HashMap::new() };
    let q = p.query()?;
    check_bindings(&q, &p.var_offsets)?;
    Ok(q)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    in_where: bool,
    in_agg: bool,
    /// First offset at which each expression variable was referenced.
    var_offsets: HashMap<String, usize>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].offset
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &str) -> GqlError {
        if let Tok::Kw(k, _) = self.peek() {
            if k.is_unsupported_statement() {
                return GqlError::UnsupportedStatement { keyword: k.as_str().to_string(), offset: self.offset() };
            }
        }
        GqlError::syntax(self.offset(), expected, &self.peek().to_string())
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<(), GqlError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(expected))
        }
    }

    fn is_kw(&self, kw: Kw) -> bool {
        matches!(self.peek(), Tok::Kw(k, _) if *k == kw)
    }

    fn eat_kw(&mut self, kw: Kw) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: Kw) -> Result<(), GqlError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.error(kw.as_str()))
        }
    }

    fn ident(&mut self, expected: &str) -> Result<String, GqlError> {
        match self.peek() {
            Tok::Ident(s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => Err(self.error(expected)),
        }
    }

    /// A name in a position where keywords cannot occur (map keys).
    fn name(&mut self, expected: &str) -> Result<String, GqlError> {
        match self.peek() {
            Tok::Ident(s) | Tok::Kw(_, s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => Err(self.error(expected)),
        }
    }

    fn query(&mut self) -> Result<Query, GqlError> {
        self.expect_kw(Kw::Match)?;
        let mut paths = vec![self.path()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            paths.push(self.path()?);
        }
        let where_clause = if self.eat_kw(Kw::Where) {
            self.in_where = true;
            let e = self.expr()?;
            self.in_where = false;
            Some(e)
        } else {
            None
        };
        if !self.is_kw(Kw::Return) {
            return Err(self.error(if where_clause.is_some() { "RETURN" } else { "WHERE or RETURN" }));
        }
        self.bump();
        let distinct = self.eat_kw(Kw::Distinct);
        let mut returns = vec![self.expr()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            returns.push(self.expr()?);
        }
        let mut order_by = Vec::new();
        if self.eat_kw(Kw::Order) {
            self.expect_kw(Kw::By)?;
            loop {
                let expr = self.expr()?;
                let descending = if self.eat_kw(Kw::Desc) {
                    true
                } else {
                    self.eat_kw(Kw::Asc);
                    false
                };
                order_by.push(OrderKey { expr, descending });
                if *self.peek() != Tok::Comma {
                    break;
                }
                self.bump();
            }
        }
        let limit = if self.eat_kw(Kw::Limit) {
            match self.peek() {
                Tok::Int(n) if *n >= 0 => {
                    let n = *n as u64;
                    self.bump();
                    Some(n)
                }
                _ => return Err(self.error("a non-negative integer")),
            }
        } else {
            None
        };
        if *self.peek() == Tok::Semi {
            self.bump();
        }
        if *self.peek() != Tok::Eof {
            let expected = match (limit.is_some(), order_by.is_empty()) {
                (true, _) => "end of input",
                (false, false) => "LIMIT or end of input",
                (false, true) => "ORDER BY, LIMIT or end of input",
            };
            return Err(self.error(expected));
        }
        Ok(Query { paths, where_clause, distinct, returns, order_by, limit })
    }

    fn path(&mut self) -> Result<PathPattern, GqlError> {
        let start = self.node()?;
        let mut steps = Vec::new();
        while matches!(self.peek(), Tok::Minus | Tok::Lt) {
            let edge = self.edge()?;
            let node = self.node()?;
            steps.push((edge, node));
        }
        Ok(PathPattern { start, steps })
    }

    fn node(&mut self) -> Result<NodePattern, GqlError> {
        self.expect(Tok::LParen, "'('")?;
        let var = match self.peek() {
            Tok::Ident(_) => Some(self.ident("a variable")?),
            _ => None,
        };
        let label = if *self.peek() == Tok::Colon {
            self.bump();
            Some(self.ident("a node label")?)
        } else {
            None
        };
        let mut props = Vec::new();
        if *self.peek() == Tok::LBrace {
            self.bump();
            if *self.peek() != Tok::RBrace {
                loop {
                    let key = self.name("a property name")?;
                    self.expect(Tok::Colon, "':'")?;
                    let lit = self.literal()?;
                    props.push((key, lit));
                    if *self.peek() != Tok::Comma {
                        break;
                    }
                    self.bump();
                }
            }
            self.expect(Tok::RBrace, "'}'")?;
        }
        self.expect(Tok::RParen, "')'")?;
        Ok(NodePattern { var, label, props })
    }

    fn edge(&mut self) -> Result<EdgePattern, GqlError> {
        let direction = if *self.peek() == Tok::Lt {
            self.bump();
            self.expect(Tok::Minus, "'-'")?;
            Direction::In
        } else {
            self.expect(Tok::Minus, "'-'")?;
            Direction::Out
        };
        self.expect(Tok::LBracket, "'['")?;
        let var = match self.peek() {
            Tok::Ident(_) => Some(self.ident("a variable")?),
            _ => None,
        };
        self.expect(Tok::Colon, "':' and an edge type")?;
        let label = self.ident("an edge type")?;
        self.expect(Tok::RBracket, "']'")?;
        self.expect(Tok::Minus, "'-'")?;
        if direction == Direction::Out {
            self.expect(Tok::Gt, "'>'")?;
        }
        Ok(EdgePattern { var, label, direction })
    }

    fn literal(&mut self) -> Result<Literal, GqlError> {
        let lit = match self.peek().clone() {
            Tok::Str(s) => Literal::Str(s),
            Tok::Int(i) => Literal::Int(i),
            Tok::Float(x) => Literal::Float(x),
            Tok::Kw(Kw::True, _) => Literal::Bool(true),
            Tok::Kw(Kw::False, _) => Literal::Bool(false),
            Tok::Kw(Kw::Null, _) => Literal::Null,
            Tok::Placeholder(c) => match PlaceholderToken::from_letter(c) {
                Some(t) => Literal::Placeholder(t),
                None => return Err(self.error("a literal")),
            },
            Tok::Minus => {
                self.bump();
                return match self.peek().clone() {
                    Tok::Int(i) => {
                        self.bump();
                        Ok(Literal::Int(-i))
                    }
                    Tok::Float(x) => {
                        self.bump();
                        Ok(Literal::Float(-x))
                    }
                    _ => Err(self.error("a number")),
                };
            }
            _ => return Err(self.error("a literal")),
        };
        self.bump();
        Ok(lit)
    }

    fn expr(&mut self) -> Result<Expr, GqlError> {
        let mut lhs = self.xor_expr()?;
        while self.eat_kw(Kw::Or) {
            let rhs = self.xor_expr()?;
            lhs = Expr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn xor_expr(&mut self) -> Result<Expr, GqlError> {
        let mut lhs = self.and_expr()?;
        while self.eat_kw(Kw::Xor) {
            let rhs = self.and_expr()?;
            lhs = Expr::Xor(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, GqlError> {
        let mut lhs = self.not_expr()?;
        while self.eat_kw(Kw::And) {
            let rhs = self.not_expr()?;
            lhs = Expr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> Result<Expr, GqlError> {
        if self.eat_kw(Kw::Not) {
            return Ok(Expr::Not(Box::new(self.not_expr()?)));
        }
        self.cmp_expr()
    }

    fn cmp_expr(&mut self) -> Result<Expr, GqlError> {
        let lhs = self.atom()?;
        let op = match self.peek() {
            Tok::Eq => CmpOp::Eq,
            Tok::Neq => CmpOp::Neq,
            Tok::Lt => CmpOp::Lt,
            Tok::Le => CmpOp::Le,
            Tok::Gt => CmpOp::Gt,
            Tok::Ge => CmpOp::Ge,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.atom()?;
        Ok(Expr::cmp(op, lhs, rhs))
    }

    fn atom(&mut self) -> Result<Expr, GqlError> {
        let offset = self.offset();
        match self.peek().clone() {
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Tok::Ident(var) => {
                self.bump();
                self.var_offsets.entry(var.clone()).or_insert(offset);
                if *self.peek() == Tok::Dot {
                    self.bump();
                    let key = self.name("a property name")?;
                    Ok(Expr::Prop { var, key })
                } else {
                    Ok(Expr::Var(var))
                }
            }
            Tok::Kw(k @ (Kw::Count | Kw::Sum | Kw::Avg | Kw::Max | Kw::Min | Kw::Collect), _)
                if *self.peek_at(1) == Tok::LParen =>
            {
                if self.in_where {
                    return Err(GqlError::syntax(offset, "a non-aggregate expression in WHERE", k.as_str()));
                }
                if self.in_agg {
                    return Err(GqlError::syntax(offset, "a non-aggregate argument", k.as_str()));
                }
                let func = match k {
                    Kw::Count => AggFunc::Count,
                    Kw::Sum => AggFunc::Sum,
                    Kw::Avg => AggFunc::Avg,
                    Kw::Max => AggFunc::Max,
                    Kw::Min => AggFunc::Min,
                    _ => AggFunc::Collect,
                };
                self.bump();
                self.bump();
                let distinct = self.eat_kw(Kw::Distinct);
                let arg = if func == AggFunc::Count && !distinct && *self.peek() == Tok::Star {
                    self.bump();
                    None
                } else {
                    self.in_agg = true;
                    let e = self.expr();
                    self.in_agg = false;
                    Some(Box::new(e?))
                };
                self.expect(Tok::RParen, "')'")?;
                Ok(Expr::Agg { func, distinct, arg })
            }
            _ => Ok(Expr::Lit(self.literal().map_err(|_| self.error("an expression"))?)),
        }
    }
}

fn check_bindings(q: &Query, offsets: &HashMap<String, usize>) -> Result<(), GqlError> {
    let mut node_vars: Vec<&str> = Vec::new();
    let mut edge_vars: Vec<&str> = Vec::new();
    for n in q.nodes() {
        if let Some(v) = &n.var {
            node_vars.push(v);
        }
    }
    for e in q.edges() {
        if let Some(v) = &e.var {
            if edge_vars.contains(&v.as_str()) {
                return Err(GqlError::Semantic(format!("edge variable `{v}` is bound twice")));
            }
            if node_vars.contains(&v.as_str()) {
                return Err(GqlError::Semantic(format!("`{v}` is used for both a node and an edge")));
            }
            edge_vars.push(v);
        }
    }
    for n in q.nodes() {
        if let (Some(v), Some(l)) = (&n.var, &n.label) {
            if let Some(other) = q.label_of(v) {
                if other != l {
                    return Err(GqlError::Semantic(format!("`{v}` is given two labels, {other} and {l}")));
                }
            }
        }
    }
    let mut unbound: Option<(&str, usize)> = None;
    for e in q.all_exprs() {
        for v in e.variables() {
            if !node_vars.contains(&v) && !edge_vars.contains(&v) {
                let at = offsets.get(v).copied().unwrap_or(0);
                if unbound.is_none_or(|(_, o)| at < o) {
                    unbound = Some((v, at));
                }
            }
        }
    }
    match unbound {
        Some((name, offset)) => Err(GqlError::UnboundVariable { name: name.to_string(), offset }),
        None => Ok(()),
    }
}
