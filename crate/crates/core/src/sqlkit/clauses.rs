//! Clause-wise set decomposition for exact-set-match comparison.

use std::collections::BTreeSet;

use super::ast::*;

/// Switches for clause canonicalization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MatchOptions {
    /// Compare literal values in WHERE/HAVING and LIMIT counts instead of only structure.
    pub compare_values: bool,
}

/// Order-free canonical elements of every clause of one SELECT.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClauseSets {
    pub distinct: bool,
    pub select: BTreeSet<String>,
    pub from: BTreeSet<String>,
    pub join_conditions: BTreeSet<String>,
    pub where_conditions: BTreeSet<String>,
    pub where_connectives: BTreeSet<String>,
    pub group_by: BTreeSet<String>,
    pub having_conditions: BTreeSet<String>,
    pub having_connectives: BTreeSet<String>,
    pub order_by: BTreeSet<String>,
    /// `None` without LIMIT; `Some(None)` for a LIMIT whose count is not compared.
    pub limit: Option<Option<u64>>,
    pub compound: Option<(SetOp, Box<ClauseSets>)>,
}

impl ClauseSets {
    pub fn canonical_string(&self) -> String {
        format!("{self:?}")
    }
}

pub fn clause_sets(q: &Query) -> ClauseSets {
    clause_sets_with(q, MatchOptions::default())
}

pub fn clause_sets_with(q: &Query, opts: MatchOptions) -> ClauseSets {
    let plain = Canon { anonymize: false, opts };
    let cond = Canon {
        anonymize: !opts.compare_values,
        opts,
    };
    let mut from = BTreeSet::new();
    let mut join_conditions = BTreeSet::new();
    if let Some(f) = &q.from {
        for t in f.table_refs() {
            from.insert(match t {
                TableRef::Table { name, .. } => name.clone(),
                TableRef::Derived { query, .. } => {
                    format!("({})", clause_sets_with(query, opts).canonical_string())
                }
            });
        }
        for j in &f.joins {
            if let Some(on) = &j.on {
                let (leaves, _) = on.flatten_conditions();
                join_conditions.extend(leaves.into_iter().map(|e| plain.expr(e)));
            }
        }
    }
    let split = |e: &Option<Expr>| -> (BTreeSet<String>, BTreeSet<String>) {
        match e {
            None => Default::default(),
            Some(e) => {
                let (leaves, ops) = e.flatten_conditions();
                (
                    leaves.into_iter().map(|l| cond.expr(l)).collect(),
                    ops.into_iter().map(|o| o.symbol().to_lowercase()).collect(),
                )
            }
        }
    };
    let (where_conditions, where_connectives) = split(&q.where_);
    let (having_conditions, having_connectives) = split(&q.having);
    ClauseSets {
        distinct: q.distinct,
        select: q.select.iter().map(|s| plain.expr(&s.expr)).collect(),
        from,
        join_conditions,
        where_conditions,
        where_connectives,
        group_by: q.group_by.iter().map(|e| plain.expr(e)).collect(),
        having_conditions,
        having_connectives,
        order_by: q
            .order_by
            .iter()
            .map(|o| format!("{} {}", plain.expr(&o.expr), if o.desc { "desc" } else { "asc" }))
            .collect(),
        limit: q.limit.map(|n| if opts.compare_values { Some(n) } else { None }),
        compound: q
            .compound
            .as_ref()
            .map(|c| (c.op, Box::new(clause_sets_with(&c.right, opts)))),
    }
}

/// Clause-wise set equality of two queries.
pub fn exact_set_match(pred: &Query, gold: &Query) -> bool {
    exact_set_match_with(pred, gold, MatchOptions::default())
}

pub fn exact_set_match_with(pred: &Query, gold: &Query, opts: MatchOptions) -> bool {
    clause_sets_with(pred, opts) == clause_sets_with(gold, opts)
}

struct Canon {
    anonymize: bool,
    opts: MatchOptions,
}

impl Canon {
    fn expr(&self, e: &Expr) -> String {
        match e {
            Expr::Column(c) => match (&c.resolved, &c.qualifier) {
                (Some(id), _) => id.to_string(),
                (None, Some(q)) => format!("{q}.{}", c.name),
                (None, None) => c.name.clone(),
            },
            Expr::Star { .. } => "*".into(),
            Expr::Literal(l) if self.anonymize && !matches!(l, Literal::Null) => "VALUE".into(),
            Expr::Literal(Literal::Number(n)) => match n.parse::<f64>() {
                Ok(x) => format!("{x}"),
                Err(_) => n.clone(),
            },
            Expr::Literal(Literal::String(s)) => format!("'{s}'"),
            Expr::Literal(Literal::Null) => "null".into(),
            Expr::Agg { func, distinct, arg } => format!(
                "{}({}{})",
                func.keyword().to_lowercase(),
                if *distinct { "distinct " } else { "" },
                self.expr(arg)
            ),
            Expr::Func { name, args } => format!(
                "{name}({})",
                args.iter().map(|a| self.expr(a)).collect::<Vec<_>>().join(", ")
            ),
            Expr::Unary { op, expr } => match op {
                UnaryOp::Neg => format!("-{}", self.expr(expr)),
                UnaryOp::Not => format!("not {}", self.expr(expr)),
            },
            Expr::Binary { op, left, right } => {
                let (mut l, mut r, mut op) = (self.expr(left), self.expr(right), *op);
                if l > r {
                    if let Some(m) = op.mirrored() {
                        std::mem::swap(&mut l, &mut r);
                        op = m;
                    }
                }
                format!("({l} {} {r})", op.symbol().to_lowercase())
            }
            Expr::Like { expr, pattern, negated } => {
                format!("{} {}like {}", self.expr(expr), not(*negated), self.expr(pattern))
            }
            Expr::Between {
                expr,
                low,
                high,
                negated,
            } => format!(
                "{} {}between {} and {}",
                self.expr(expr),
                not(*negated),
                self.expr(low),
                self.expr(high)
            ),
            Expr::InList { expr, list, negated } => {
                let items: BTreeSet<String> = list.iter().map(|a| self.expr(a)).collect();
                format!(
                    "{} {}in [{}]",
                    self.expr(expr),
                    not(*negated),
                    items.into_iter().collect::<Vec<_>>().join(", ")
                )
            }
            Expr::InQuery { expr, query, negated } => format!(
                "{} {}in ({})",
                self.expr(expr),
                not(*negated),
                clause_sets_with(query, self.opts).canonical_string()
            ),
            Expr::Exists { query, negated } => format!(
                "{}exists ({})",
                not(*negated),
                clause_sets_with(query, self.opts).canonical_string()
            ),
            Expr::IsNull { expr, negated } => {
                format!("{} is {}null", self.expr(expr), not(*negated))
            }
            Expr::Subquery(q) => format!("({})", clause_sets_with(q, self.opts).canonical_string()),
            Expr::Cast { expr, ty } => format!("cast({} as {ty})", self.expr(expr)),
        }
    }
}

fn not(negated: bool) -> &'static str {
    if negated {
        "not "
    } else {
        ""
    }
}
