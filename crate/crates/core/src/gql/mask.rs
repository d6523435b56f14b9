use super::ast::*;
use crate::graph::{GraphSchema, PlaceholderToken};

/// Replaces entity literals with their type's placeholder and numeric
/// comparison literals with `[m]`, returning the canonical print.
pub fn mask_entities(q: &Query, schema: &GraphSchema) -> String {
    mask_query(q, schema).canonicalize().to_string()
}

/// The masked AST (variables keep their original names).
pub fn mask_query(q: &Query, schema: &GraphSchema) -> Query {
    let mut out = q.clone();
    let token_for = |label: Option<&str>, key: &str| -> Option<PlaceholderToken> {
        let nt = schema.node_type(label?)?;
        let ph = nt.placeholder.as_ref()?;
        (ph.bound_property == key).then_some(ph.token)
    };
    for p in &mut out.paths {
        for n in std::iter::once(&mut p.start).chain(p.steps.iter_mut().map(|(_, n)| n)) {
            let label = n.label.clone();
            for (k, lit) in &mut n.props {
                if let Some(t) = token_for(label.as_deref(), k) {
                    if matches!(lit, Literal::Str(_)) {
                        *lit = Literal::Str(t.as_str().to_string());
                        continue;
                    }
                }
                if lit.is_number() {
                    *lit = Literal::Placeholder(PlaceholderToken::Number);
                }
            }
        }
    }
    let labels: Vec<(String, Option<String>)> = q
        .pattern_variables()
        .into_iter()
        .map(|v| {
            let l = q.label_of(&v).map(str::to_string);
            (v, l)
        })
        .collect();
    let label_of = |var: &str| labels.iter().find(|(v, _)| v == var).and_then(|(_, l)| l.clone());
    for e in out.all_exprs_mut() {
        e.walk_mut(&mut |node| {
            let Expr::Cmp { op, lhs, rhs } = node else { return };
            let right = (**rhs).clone();
            mask_operand(*op, lhs, &right, &label_of, &token_for);
            let left = (**lhs).clone();
            mask_operand(*op, rhs, &left, &label_of, &token_for);
        });
    }
    out
}

fn mask_operand(
    op: CmpOp,
    this: &mut Expr,
    other: &Expr,
    label_of: &dyn Fn(&str) -> Option<String>,
    token_for: &dyn Fn(Option<&str>, &str) -> Option<PlaceholderToken>,
) {
    let Expr::Lit(lit) = this else { return };
    if lit.is_number() {
        *lit = Literal::Placeholder(PlaceholderToken::Number);
    } else if let (CmpOp::Eq, Literal::Str(_), Expr::Prop { var, key }) = (op, &*lit, other) {
        if let Some(t) = token_for(label_of(var).as_deref(), key) {
            *lit = Literal::Str(t.as_str().to_string());
        }
    }
}
