use serde::Serialize;

use super::lexer::join_tokens;
use crate::catalog::ColumnId;

/// Half-open range of source token indices.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

/// A parsed query plus the source tokens it was built from.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SqlAst {
    pub root: Query,
    #[serde(skip)]
    pub(crate) source_tokens: Vec<String>,
}

impl SqlAst {
    /// Source text of a span, tokens separated by single spaces.
    pub fn fragment(&self, span: Span) -> String {
        join_tokens(
            self.source_tokens[span.start..span.end.min(self.source_tokens.len())]
                .iter()
                .map(String::as_str),
        )
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.root).expect("AST serializes")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum SetOp {
    Union,
    Intersect,
    Except,
}

impl SetOp {
    pub fn keyword(self) -> &'static str {
        match self {
            SetOp::Union => "UNION",
            SetOp::Intersect => "INTERSECT",
            SetOp::Except => "EXCEPT",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Compound {
    pub op: SetOp,
    pub all: bool,
    pub right: Box<Query>,
}

/// One SELECT with its clauses, optionally chained to another query by a set operator.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Query {
    pub distinct: bool,
    pub select: Vec<SelectItem>,
    pub from: Option<FromClause>,
    #[serde(rename = "where")]
    pub where_: Option<Expr>,
    pub group_by: Vec<Expr>,
    pub having: Option<Expr>,
    pub order_by: Vec<OrderItem>,
    pub limit: Option<u64>,
    pub compound: Option<Compound>,
    /// Tokens of this SELECT alone, excluding any set-operator continuation.
    pub core_span: Span,
    /// Tokens of this SELECT and everything chained after it.
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SelectItem {
    pub expr: Expr,
    pub alias: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FromClause {
    pub first: TableRef,
    pub joins: Vec<Join>,
    /// From the FROM keyword through the last join condition.
    pub span: Span,
}

impl FromClause {
    pub fn table_refs(&self) -> impl Iterator<Item = &TableRef> {
        std::iter::once(&self.first).chain(self.joins.iter().map(|j| &j.table))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum JoinKind {
    Inner,
    Left,
    Cross,
    Comma,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Join {
    pub kind: JoinKind,
    pub table: TableRef,
    pub on: Option<Expr>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum TableRef {
    Table { name: String, alias: Option<String> },
    Derived { query: Box<Query>, alias: Option<String> },
}

impl TableRef {
    pub fn alias(&self) -> Option<&str> {
        match self {
            TableRef::Table { alias, .. } | TableRef::Derived { alias, .. } => alias.as_deref(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrderItem {
    pub expr: Expr,
    pub desc: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum AggFunc {
    Count,
    Sum,
    Avg,
    Min,
    Max,
}

impl AggFunc {
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name.to_ascii_lowercase().as_str() {
            "count" => AggFunc::Count,
            "sum" => AggFunc::Sum,
            "avg" => AggFunc::Avg,
            "min" => AggFunc::Min,
            "max" => AggFunc::Max,
            _ => return None,
        })
    }

    pub fn keyword(self) -> &'static str {
        match self {
            AggFunc::Count => "COUNT",
            AggFunc::Sum => "SUM",
            AggFunc::Avg => "AVG",
            AggFunc::Min => "MIN",
            AggFunc::Max => "MAX",
        }
    }

    /// Word used when describing the aggregate in prose.
    pub fn prose(self) -> &'static str {
        match self {
            AggFunc::Count => "number",
            AggFunc::Sum => "total",
            AggFunc::Avg => "average",
            AggFunc::Min => "minimum",
            AggFunc::Max => "maximum",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum BinOp {
    Eq,
    NotEq,
    Lt,
    Gt,
    LtEq,
    GtEq,
    Plus,
    Minus,
    Mul,
    Div,
    Mod,
    Concat,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Eq => "=",
            BinOp::NotEq => "!=",
            BinOp::Lt => "<",
            BinOp::Gt => ">",
            BinOp::LtEq => "<=",
            BinOp::GtEq => ">=",
            BinOp::Plus => "+",
            BinOp::Minus => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
            BinOp::Concat => "||",
            BinOp::And => "AND",
            BinOp::Or => "OR",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Eq | BinOp::NotEq | BinOp::Lt | BinOp::Gt | BinOp::LtEq | BinOp::GtEq
        )
    }

    /// The operator that gives the same result with operands swapped.
    pub fn mirrored(self) -> Option<BinOp> {
        Some(match self {
            BinOp::Eq => BinOp::Eq,
            BinOp::NotEq => BinOp::NotEq,
            BinOp::Lt => BinOp::Gt,
            BinOp::Gt => BinOp::Lt,
            BinOp::LtEq => BinOp::GtEq,
            BinOp::GtEq => BinOp::LtEq,
            BinOp::Plus => BinOp::Plus,
            BinOp::Mul => BinOp::Mul,
            BinOp::And => BinOp::And,
            BinOp::Or => BinOp::Or,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Literal {
    Number(String),
    String(String),
    Null,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ColumnRef {
    pub qualifier: Option<String>,
    pub name: String,
    /// Set by resolution: the base-table column this reference denotes.
    pub resolved: Option<ColumnId>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Expr {
    Column(ColumnRef),
    Star {
        qualifier: Option<String>,
    },
    Literal(Literal),
    Agg {
        func: AggFunc,
        distinct: bool,
        arg: Box<Expr>,
    },
    Func {
        name: String,
        args: Vec<Expr>,
    },
    Unary {
        op: UnaryOp,
        expr: Box<Expr>,
    },
    Binary {
        op: BinOp,
        left: Box<Expr>,
        right: Box<Expr>,
    },
    Like {
        expr: Box<Expr>,
        pattern: Box<Expr>,
        negated: bool,
    },
    Between {
        expr: Box<Expr>,
        low: Box<Expr>,
        high: Box<Expr>,
        negated: bool,
    },
    InList {
        expr: Box<Expr>,
        list: Vec<Expr>,
        negated: bool,
    },
    InQuery {
        expr: Box<Expr>,
        query: Box<Query>,
        negated: bool,
    },
    Exists {
        query: Box<Query>,
        negated: bool,
    },
    IsNull {
        expr: Box<Expr>,
        negated: bool,
    },
    Subquery(Box<Query>),
    Cast {
        expr: Box<Expr>,
        ty: String,
    },
}

impl Expr {
    /// Direct child expressions (not descending into subqueries).
    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Column(_) | Expr::Star { .. } | Expr::Literal(_) => vec![],
            Expr::Subquery(_) | Expr::Exists { .. } => vec![],
            Expr::Agg { arg, .. } => vec![arg],
            Expr::Func { args, .. } => args.iter().collect(),
            Expr::Unary { expr, .. } | Expr::IsNull { expr, .. } | Expr::Cast { expr, .. } => {
                vec![expr]
            }
            Expr::Binary { left, right, .. } => vec![left, right],
            Expr::Like { expr, pattern, .. } => vec![expr, pattern],
            Expr::Between { expr, low, high, .. } => vec![expr, low, high],
            Expr::InList { expr, list, .. } => std::iter::once(&**expr).chain(list).collect(),
            Expr::InQuery { expr, .. } => vec![expr],
        }
    }

    /// Subqueries directly embedded in this expression tree.
    pub fn subqueries(&self) -> Vec<&Query> {
        let mut out = Vec::new();
        self.collect_subqueries(&mut out);
        out
    }

    fn collect_subqueries<'a>(&'a self, out: &mut Vec<&'a Query>) {
        match self {
            Expr::Subquery(q) | Expr::Exists { query: q, .. } | Expr::InQuery { query: q, .. } => out.push(q),
            _ => {}
        }
        for c in self.children() {
            c.collect_subqueries(out);
        }
    }

    /// Splits a predicate into its AND/OR leaves, in order, with the connectives between them.
    pub fn flatten_conditions(&self) -> (Vec<&Expr>, Vec<BinOp>) {
        let mut leaves = Vec::new();
        let mut ops = Vec::new();
        fn walk<'a>(e: &'a Expr, leaves: &mut Vec<&'a Expr>, ops: &mut Vec<BinOp>) {
            match e {
                Expr::Binary {
                    op: op @ (BinOp::And | BinOp::Or),
                    left,
                    right,
                } => {
                    walk(left, leaves, ops);
                    ops.push(*op);
                    walk(right, leaves, ops);
                }
                other => leaves.push(other),
            }
        }
        walk(self, &mut leaves, &mut ops);
        (leaves, ops)
    }

    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        for c in self.children() {
            c.walk(f);
        }
    }
}

impl Query {
    /// Every query reachable from this one (itself included): set-operator operands,
    /// derived tables and expression subqueries, in source order.
    pub fn all_queries(&self) -> Vec<&Query> {
        let mut out = Vec::new();
        self.collect_queries(&mut out);
        out
    }

    fn collect_queries<'a>(&'a self, out: &mut Vec<&'a Query>) {
        out.push(self);
        for q in self.direct_subqueries() {
            q.collect_queries(out);
        }
        if let Some(c) = &self.compound {
            c.right.collect_queries(out);
        }
    }

    /// Subqueries nested in this SELECT's clauses (not the set-operator continuation).
    pub fn direct_subqueries(&self) -> Vec<&Query> {
        let mut out = Vec::new();
        for item in &self.select {
            out.extend(item.expr.subqueries());
        }
        if let Some(from) = &self.from {
            for t in from.table_refs() {
                if let TableRef::Derived { query, .. } = t {
                    out.push(&**query);
                }
            }
            for j in &from.joins {
                if let Some(on) = &j.on {
                    out.extend(on.subqueries());
                }
            }
        }
        for e in self
            .where_
            .iter()
            .chain(&self.group_by)
            .chain(self.having.iter())
            .chain(self.order_by.iter().map(|o| &o.expr))
        {
            out.extend(e.subqueries());
        }
        out
    }

    /// All expressions of this SELECT's clauses, in clause order.
    pub fn clause_exprs(&self) -> Vec<&Expr> {
        let mut out: Vec<&Expr> = self.select.iter().map(|s| &s.expr).collect();
        if let Some(from) = &self.from {
            out.extend(from.joins.iter().filter_map(|j| j.on.as_ref()));
        }
        out.extend(self.where_.iter());
        out.extend(self.group_by.iter());
        out.extend(self.having.iter());
        out.extend(self.order_by.iter().map(|o| &o.expr));
        out
    }

    pub fn table_count(&self) -> usize {
        self.from.as_ref().map_or(0, |f| 1 + f.joins.len())
    }

    /// Base table names in FROM order.
    pub fn base_tables(&self) -> Vec<&str> {
        self.from
            .iter()
            .flat_map(|f| f.table_refs())
            .filter_map(|t| match t {
                TableRef::Table { name, .. } => Some(name.as_str()),
                TableRef::Derived { .. } => None,
            })
            .collect()
    }
}
