//! Rule-based English rendering of the filter of a nested SELECT.

use super::ast::*;

fn words(name: &str) -> String {
    name.to_lowercase().replace('_', " ")
}

fn op_words(op: BinOp) -> Option<&'static str> {
    Some(match op {
        BinOp::Eq => "is",
        BinOp::NotEq => "is not",
        BinOp::Gt => "is above",
        BinOp::Lt => "is less than",
        BinOp::GtEq => "is at least",
        BinOp::LtEq => "is at most",
        _ => return None,
    })
}

fn value_words(e: &Expr) -> Option<String> {
    match e {
        Expr::Literal(Literal::Number(n)) => Some(n.clone()),
        Expr::Literal(Literal::String(s)) => Some(s.clone()),
        Expr::Literal(Literal::Null) => Some("null".into()),
        Expr::Unary { op: UnaryOp::Neg, expr } => value_words(expr).map(|v| format!("-{v}")),
        _ => None,
    }
}

/// Table owning an unresolved reference: its qualifier's table, or the only base table.
fn owner_table(q: &Query, c: &ColumnRef) -> Option<String> {
    if let Some(id) = &c.resolved {
        return Some(id.table.clone());
    }
    let from = q.from.as_ref()?;
    match &c.qualifier {
        Some(qual) => from.table_refs().find_map(|t| match t {
            TableRef::Table { name, alias } if alias.as_deref().unwrap_or(name).eq_ignore_ascii_case(qual) => {
                Some(name.clone())
            }
            _ => None,
        }),
        None => match q.base_tables().as_slice() {
            [only] => Some(only.to_string()),
            _ => None,
        },
    }
}

fn subject_words(q: &Query, e: &Expr) -> Option<String> {
    match e {
        Expr::Column(c) => {
            let column = c.resolved.as_ref().map_or(c.name.as_str(), |id| &id.column);
            Some(format!("{} of the {}", words(column), words(&owner_table(q, c)?)))
        }
        Expr::Agg { func, arg, .. } => match &**arg {
            Expr::Star { .. } => {
                let tables = q.base_tables();
                Some(format!("{} of the {}", func.prose(), words(tables.first()?)))
            }
            inner => Some(format!("{} {}", func.prose(), subject_words(q, inner)?)),
        },
        _ => None,
    }
}

fn condition_words(q: &Query, cond: &Expr) -> Option<String> {
    let Expr::Binary { op, left, right } = cond else {
        return None;
    };
    let (subject, value, op) = match (subject_words(q, left), value_words(right)) {
        (Some(s), Some(v)) => (s, v, *op),
        _ => (subject_words(q, right)?, value_words(left)?, op.mirrored()?),
    };
    Some(format!("{subject} {} {value}", op_words(op)?))
}

fn filter_words(q: &Query) -> Option<String> {
    let filter = q.where_.as_ref().or(q.having.as_ref())?;
    let (leaves, ops) = filter.flatten_conditions();
    let mut out = condition_words(q, leaves[0])?;
    for (leaf, op) in leaves[1..].iter().zip(&ops) {
        out.push_str(if *op == BinOp::And { " and " } else { " or " });
        out.push_str(&condition_words(q, leaf)?);
    }
    Some(out)
}

/// Describes the WHERE (or, failing that, HAVING) filter of `sub`, a SELECT inside `ast`.
/// Constructs without a rule fall back to the subquery's SQL text.
pub fn nested_to_phrase(ast: &SqlAst, sub: &Query) -> String {
    filter_words(sub).unwrap_or_else(|| ast.fragment(sub.core_span))
}
