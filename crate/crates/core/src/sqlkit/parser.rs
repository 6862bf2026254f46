//! Recursive-descent parser for the SQLite subset used by Spider-style benchmarks.

use super::ast::*;
use super::lexer::{lex, Tok, TokKind};
use crate::catalog::{ColumnId, DatabaseSchema};
use crate::error::{Error, Result};

const RESERVED: &[&str] = &[
    "select",
    "from",
    "where",
    "group",
    "by",
    "having",
    "order",
    "limit",
    "offset",
    "join",
    "inner",
    "left",
    "right",
    "outer",
    "cross",
    "on",
    "as",
    "and",
    "or",
    "not",
    "in",
    "like",
    "between",
    "is",
    "null",
    "union",
    "intersect",
    "except",
    "all",
    "distinct",
    "asc",
    "desc",
    "exists",
    "case",
    "when",
    "then",
    "else",
    "end",
    "cast",
    "with",
];

fn is_reserved(word: &str) -> bool {
    RESERVED.iter().any(|k| k.eq_ignore_ascii_case(word))
}

/// Parses SQL text. With a schema, every table and column reference must resolve;
/// without one, aliases are still mapped back to table names where unambiguous.
pub fn parse_sql(text: &str, schema: Option<&DatabaseSchema>) -> Result<SqlAst> {
    if text.trim().is_empty() {
        return Err(Error::Syntax {
            offset: 0,
            message: "empty query".into(),
        });
    }
    let toks = lex(text)?;
    let mut p = Parser {
        toks: &toks,
        pos: 0,
        src_len: text.len(),
    };
    if let Some(t) = p.peek() {
        for kw in ["with", "insert", "update", "delete", "create", "drop", "alter"] {
            if t.is_word(kw) {
                return Err(Error::Unsupported(match kw {
                    "with" => "common table expressions".to_string(),
                    other => format!("{} statements", other.to_uppercase()),
                }));
            }
        }
    }
    let mut root = p.query()?;
    while p.eat_kind(TokKind::Semi) {}
    if let Some(t) = p.peek() {
        return Err(Error::Syntax {
            offset: t.offset,
            message: format!("unexpected `{}` after end of query", t.text),
        });
    }
    resolve_query(&mut root, schema, &[])?;
    Ok(SqlAst {
        root,
        source_tokens: toks.into_iter().map(|t| t.text).collect(),
    })
}

struct Parser<'a> {
    toks: &'a [Tok],
    pos: usize,
    src_len: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Tok> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, k: usize) -> Option<&'a Tok> {
        self.toks.get(self.pos + k)
    }

    fn offset(&self) -> usize {
        self.peek().map_or(self.src_len, |t| t.offset)
    }

    fn error<T>(&self, expected: &str) -> Result<T> {
        let found = self
            .peek()
            .map_or_else(|| "end of input".to_string(), |t| format!("`{}`", t.text));
        Err(Error::Syntax {
            offset: self.offset(),
            message: format!("expected {expected}, found {found}"),
        })
    }

    fn at_word(&self, kw: &str) -> bool {
        self.peek().is_some_and(|t| t.is_word(kw))
    }

    fn eat_word(&mut self, kw: &str) -> bool {
        if self.at_word(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_word(&mut self, kw: &str) -> Result<()> {
        if self.eat_word(kw) {
            Ok(())
        } else {
            self.error(&kw.to_uppercase())
        }
    }

    fn eat_kind(&mut self, kind: TokKind) -> bool {
        if self.peek().is_some_and(|t| t.kind == kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_kind(&mut self, kind: TokKind, what: &str) -> Result<()> {
        if self.eat_kind(kind) {
            Ok(())
        } else {
            self.error(what)
        }
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if self.peek().is_some_and(|t| t.is_op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn identifier(&mut self, what: &str) -> Result<String> {
        match self.peek() {
            Some(t) if t.kind == TokKind::Word && !is_reserved(&t.text) => {
                self.pos += 1;
                Ok(t.text.to_lowercase())
            }
            Some(t) if t.kind == TokKind::QuotedIdent => {
                self.pos += 1;
                Ok(t.value.to_lowercase())
            }
            _ => self.error(what),
        }
    }

    fn optional_alias(&mut self) -> Result<Option<String>> {
        if self.eat_word("as") {
            return match self.peek() {
                Some(t) if t.kind == TokKind::Str => {
                    self.pos += 1;
                    Ok(Some(t.value.to_lowercase()))
                }
                _ => self.identifier("alias").map(Some),
            };
        }
        match self.peek() {
            Some(t) if (t.kind == TokKind::Word && !is_reserved(&t.text)) || t.kind == TokKind::QuotedIdent => {
                self.identifier("alias").map(Some)
            }
            _ => Ok(None),
        }
    }

    fn query(&mut self) -> Result<Query> {
        let start = self.pos;
        let mut q = self.select_core()?;
        q.core_span = Span { start, end: self.pos };
        let op = if self.eat_word("union") {
            Some(SetOp::Union)
        } else if self.eat_word("intersect") {
            Some(SetOp::Intersect)
        } else if self.eat_word("except") {
            Some(SetOp::Except)
        } else {
            None
        };
        if let Some(op) = op {
            let all = self.eat_word("all");
            let right = self.query()?;
            q.compound = Some(Compound {
                op,
                all,
                right: Box::new(right),
            });
        }
        q.span = Span { start, end: self.pos };
        Ok(q)
    }

    fn select_core(&mut self) -> Result<Query> {
        self.expect_word("select")?;
        let distinct = self.eat_word("distinct");
        if !distinct {
            self.eat_word("all");
        }
        let mut select = vec![self.select_item()?];
        while self.eat_kind(TokKind::Comma) {
            select.push(self.select_item()?);
        }
        let from = if self.at_word("from") {
            Some(self.from_clause()?)
        } else {
            None
        };
        let where_ = if self.eat_word("where") {
            Some(self.expr()?)
        } else {
            None
        };
        let mut group_by = Vec::new();
        if self.eat_word("group") {
            self.expect_word("by")?;
            group_by.push(self.expr()?);
            while self.eat_kind(TokKind::Comma) {
                group_by.push(self.expr()?);
            }
        }
        let having = if self.eat_word("having") {
            Some(self.expr()?)
        } else {
            None
        };
        let mut order_by = Vec::new();
        if self.eat_word("order") {
            self.expect_word("by")?;
            loop {
                let expr = self.expr()?;
                let desc = if self.eat_word("desc") {
                    true
                } else {
                    self.eat_word("asc");
                    false
                };
                order_by.push(OrderItem { expr, desc });
                if !self.eat_kind(TokKind::Comma) {
                    break;
                }
            }
        }
        let limit = if self.eat_word("limit") {
            let n = self.unsigned("LIMIT count")?;
            if self.eat_word("offset") || self.eat_kind(TokKind::Comma) {
                self.unsigned("OFFSET count")?;
            }
            Some(n)
        } else {
            None
        };
        Ok(Query {
            distinct,
            select,
            from,
            where_,
            group_by,
            having,
            order_by,
            limit,
            compound: None,
            core_span: Span::default(),
            span: Span::default(),
        })
    }

    fn unsigned(&mut self, what: &str) -> Result<u64> {
        match self.peek() {
            Some(t) if t.kind == TokKind::Num => match t.text.parse() {
                Ok(n) => {
                    self.pos += 1;
                    Ok(n)
                }
                Err(_) => self.error(what),
            },
            _ => self.error(what),
        }
    }

    fn select_item(&mut self) -> Result<SelectItem> {
        let expr = self.expr()?;
        let alias = self.optional_alias()?;
        Ok(SelectItem { expr, alias })
    }

    fn from_clause(&mut self) -> Result<FromClause> {
        let start = self.pos;
        self.expect_word("from")?;
        let first = self.table_ref()?;
        let mut joins = Vec::new();
        loop {
            let kind = if self.eat_kind(TokKind::Comma) {
                JoinKind::Comma
            } else if self.eat_word("join") {
                JoinKind::Inner
            } else if self.eat_word("inner") {
                self.expect_word("join")?;
                JoinKind::Inner
            } else if self.eat_word("left") {
                self.eat_word("outer");
                self.expect_word("join")?;
                JoinKind::Left
            } else if self.eat_word("cross") {
                self.expect_word("join")?;
                JoinKind::Cross
            } else if self.at_word("right") {
                return Err(Error::Unsupported("RIGHT JOIN".into()));
            } else {
                break;
            };
            let table = self.table_ref()?;
            let on = if kind != JoinKind::Comma && self.eat_word("on") {
                Some(self.expr()?)
            } else {
                None
            };
            joins.push(Join { kind, table, on });
        }
        Ok(FromClause {
            first,
            joins,
            span: Span { start, end: self.pos },
        })
    }

    fn table_ref(&mut self) -> Result<TableRef> {
        if self.peek().is_some_and(|t| t.kind == TokKind::LParen)
            && self.peek_at(1).is_some_and(|t| t.is_word("select"))
        {
            self.pos += 1;
            let query = self.query()?;
            self.expect_kind(TokKind::RParen, "`)`")?;
            let alias = self.optional_alias()?;
            return Ok(TableRef::Derived {
                query: Box::new(query),
                alias,
            });
        }
        let name = self.identifier("table name")?;
        let alias = self.optional_alias()?;
        Ok(TableRef::Table { name, alias })
    }

    fn expr(&mut self) -> Result<Expr> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> Result<Expr> {
        let mut left = self.and_expr()?;
        while self.eat_word("or") {
            let right = self.and_expr()?;
            left = binary(BinOp::Or, left, right);
        }
        Ok(left)
    }

    fn and_expr(&mut self) -> Result<Expr> {
        let mut left = self.not_expr()?;
        while self.eat_word("and") {
            let right = self.not_expr()?;
            left = binary(BinOp::And, left, right);
        }
        Ok(left)
    }

    fn not_expr(&mut self) -> Result<Expr> {
        if self.at_word("not") && !self.peek_at(1).is_some_and(|t| t.is_word("exists")) {
            self.pos += 1;
            let inner = self.not_expr()?;
            return Ok(Expr::Unary {
                op: UnaryOp::Not,
                expr: Box::new(inner),
            });
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr> {
        let left = self.additive()?;
        if let Some(t) = self.peek() {
            if t.kind == TokKind::Op {
                let op = match t.text.as_str() {
                    "=" | "==" => Some(BinOp::Eq),
                    "!=" | "<>" => Some(BinOp::NotEq),
                    "<" => Some(BinOp::Lt),
                    ">" => Some(BinOp::Gt),
                    "<=" => Some(BinOp::LtEq),
                    ">=" => Some(BinOp::GtEq),
                    _ => None,
                };
                if let Some(op) = op {
                    self.pos += 1;
                    let right = self.additive()?;
                    return Ok(binary(op, left, right));
                }
            }
        }
        if self.eat_word("is") {
            let negated = self.eat_word("not");
            self.expect_word("null")?;
            return Ok(Expr::IsNull {
                expr: Box::new(left),
                negated,
            });
        }
        let negated = if self.at_word("not")
            && self
                .peek_at(1)
                .is_some_and(|t| t.is_word("like") || t.is_word("in") || t.is_word("between"))
        {
            self.pos += 1;
            true
        } else {
            false
        };
        if self.eat_word("like") {
            let pattern = self.additive()?;
            return Ok(Expr::Like {
                expr: Box::new(left),
                pattern: Box::new(pattern),
                negated,
            });
        }
        if self.eat_word("between") {
            let low = self.additive()?;
            self.expect_word("and")?;
            let high = self.additive()?;
            return Ok(Expr::Between {
                expr: Box::new(left),
                low: Box::new(low),
                high: Box::new(high),
                negated,
            });
        }
        if self.eat_word("in") {
            self.expect_kind(TokKind::LParen, "`(`")?;
            if self.at_word("select") {
                let query = self.query()?;
                self.expect_kind(TokKind::RParen, "`)`")?;
                return Ok(Expr::InQuery {
                    expr: Box::new(left),
                    query: Box::new(query),
                    negated,
                });
            }
            let mut list = vec![self.expr()?];
            while self.eat_kind(TokKind::Comma) {
                list.push(self.expr()?);
            }
            self.expect_kind(TokKind::RParen, "`)`")?;
            return Ok(Expr::InList {
                expr: Box::new(left),
                list,
                negated,
            });
        }
        if negated {
            return self.error("LIKE, IN or BETWEEN");
        }
        Ok(left)
    }

    fn additive(&mut self) -> Result<Expr> {
        let mut left = self.multiplicative()?;
        loop {
            let op = if self.eat_op("+") {
                BinOp::Plus
            } else if self.eat_op("-") {
                BinOp::Minus
            } else if self.eat_op("||") {
                BinOp::Concat
            } else {
                break;
            };
            let right = self.multiplicative()?;
            left = binary(op, left, right);
        }
        Ok(left)
    }

    fn multiplicative(&mut self) -> Result<Expr> {
        let mut left = self.unary()?;
        loop {
            let op = if self.eat_op("*") {
                BinOp::Mul
            } else if self.eat_op("/") {
                BinOp::Div
            } else if self.eat_op("%") {
                BinOp::Mod
            } else {
                break;
            };
            let right = self.unary()?;
            left = binary(op, left, right);
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat_op("-") {
            let inner = self.unary()?;
            if let Expr::Literal(Literal::Number(n)) = &inner {
                return Ok(Expr::Literal(Literal::Number(format!("-{n}"))));
            }
            return Ok(Expr::Unary {
                op: UnaryOp::Neg,
                expr: Box::new(inner),
            });
        }
        if self.eat_op("+") {
            return self.unary();
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr> {
        let Some(t) = self.peek() else {
            return self.error("expression");
        };
        match t.kind {
            TokKind::Num => {
                self.pos += 1;
                Ok(Expr::Literal(Literal::Number(t.text.clone())))
            }
            TokKind::Str => {
                self.pos += 1;
                Ok(Expr::Literal(Literal::String(t.value.clone())))
            }
            TokKind::Op if t.text == "*" => {
                self.pos += 1;
                Ok(Expr::Star { qualifier: None })
            }
            TokKind::LParen => {
                self.pos += 1;
                if self.at_word("select") {
                    let q = self.query()?;
                    self.expect_kind(TokKind::RParen, "`)`")?;
                    return Ok(Expr::Subquery(Box::new(q)));
                }
                let e = self.expr()?;
                self.expect_kind(TokKind::RParen, "`)`")?;
                Ok(e)
            }
            TokKind::QuotedIdent => self.column_ref(),
            TokKind::Word => {
                if t.is_word("null") {
                    self.pos += 1;
                    return Ok(Expr::Literal(Literal::Null));
                }
                if t.is_word("not") || t.is_word("exists") {
                    let negated = self.eat_word("not");
                    self.expect_word("exists")?;
                    self.expect_kind(TokKind::LParen, "`(`")?;
                    let q = self.query()?;
                    self.expect_kind(TokKind::RParen, "`)`")?;
                    return Ok(Expr::Exists {
                        query: Box::new(q),
                        negated,
                    });
                }
                if t.is_word("case") {
                    return Err(Error::Unsupported("CASE expressions".into()));
                }
                if t.is_word("cast") {
                    self.pos += 1;
                    self.expect_kind(TokKind::LParen, "`(`")?;
                    let e = self.expr()?;
                    self.expect_word("as")?;
                    let ty = self.identifier("type name")?;
                    self.expect_kind(TokKind::RParen, "`)`")?;
                    return Ok(Expr::Cast { expr: Box::new(e), ty });
                }
                if self.peek_at(1).is_some_and(|n| n.kind == TokKind::LParen) && !is_reserved(&t.text) {
                    return self.function_call();
                }
                if is_reserved(&t.text) {
                    return self.error("expression");
                }
                self.column_ref()
            }
            _ => self.error("expression"),
        }
    }

    fn function_call(&mut self) -> Result<Expr> {
        let name_tok = self.peek().expect("checked by caller");
        self.pos += 2;
        let name = name_tok.text.to_lowercase();
        let expr = if let Some(func) = AggFunc::from_name(&name) {
            let distinct = self.eat_word("distinct");
            let arg = self.expr()?;
            Expr::Agg {
                func,
                distinct,
                arg: Box::new(arg),
            }
        } else {
            let mut args = Vec::new();
            if !self.peek().is_some_and(|t| t.kind == TokKind::RParen) {
                args.push(self.expr()?);
                while self.eat_kind(TokKind::Comma) {
                    args.push(self.expr()?);
                }
            }
            Expr::Func { name, args }
        };
        self.expect_kind(TokKind::RParen, "`)`")?;
        if self.at_word("over") {
            return Err(Error::Unsupported("window functions".into()));
        }
        Ok(expr)
    }

    fn column_ref(&mut self) -> Result<Expr> {
        let first = self.identifier("column name")?;
        if self.eat_kind(TokKind::Dot) {
            if self.eat_op("*") {
                return Ok(Expr::Star { qualifier: Some(first) });
            }
            let name = self.identifier("column name")?;
            return Ok(Expr::Column(ColumnRef {
                qualifier: Some(first),
                name,
                resolved: None,
            }));
        }
        Ok(Expr::Column(ColumnRef {
            qualifier: None,
            name: first,
            resolved: None,
        }))
    }
}

fn binary(op: BinOp, left: Expr, right: Expr) -> Expr {
    Expr::Binary {
        op,
        left: Box::new(left),
        right: Box::new(right),
    }
}

/// One FROM-clause binding visible to column references.
#[derive(Clone, Debug)]
enum Binding {
    Base {
        name: String,
        alias: Option<String>,
    },
    Derived {
        alias: Option<String>,
        outputs: Vec<String>,
    },
}

impl Binding {
    fn answers_to(&self, qualifier: &str) -> bool {
        match self {
            Binding::Base { name, alias } => {
                alias.as_deref() == Some(qualifier) || (alias.is_none() && name == qualifier) || name == qualifier
            }
            Binding::Derived { alias, .. } => alias.as_deref() == Some(qualifier),
        }
    }
}

fn output_names(q: &Query) -> Vec<String> {
    q.select
        .iter()
        .filter_map(|s| {
            s.alias.clone().or_else(|| match &s.expr {
                Expr::Column(c) => Some(c.name.clone()),
                _ => None,
            })
        })
        .collect()
}

fn bindings_of(q: &Query) -> Vec<Binding> {
    q.from
        .iter()
        .flat_map(|f| f.table_refs())
        .map(|t| match t {
            TableRef::Table { name, alias } => Binding::Base {
                name: name.clone(),
                alias: alias.clone(),
            },
            TableRef::Derived { query, alias } => Binding::Derived {
                alias: alias.clone(),
                outputs: output_names(query),
            },
        })
        .collect()
}

/// Resolves column references against the FROM scopes of the query and its parents.
fn resolve_query(q: &mut Query, schema: Option<&DatabaseSchema>, outer: &[Vec<Binding>]) -> Result<()> {
    if let Some(db) = schema {
        for name in q.base_tables() {
            if !db.has_table(name) {
                return Err(Error::Unresolved {
                    name: name.to_string(),
                    message: format!("no such table in database `{}`", db.db_id),
                });
            }
        }
    }
    let local = bindings_of(q);
    let mut scopes: Vec<Vec<Binding>> = outer.to_vec();
    scopes.push(local);
    let select_aliases: Vec<String> = q.select.iter().filter_map(|s| s.alias.clone()).collect();

    if let Some(from) = &mut q.from {
        let mut refs: Vec<&mut TableRef> = vec![&mut from.first];
        refs.extend(from.joins.iter_mut().map(|j| &mut j.table));
        for r in refs {
            if let TableRef::Derived { query, .. } = r {
                resolve_query(query, schema, outer)?;
            }
        }
    }

    let ctx = Ctx {
        schema,
        scopes: &scopes,
        select_aliases: &select_aliases,
    };
    for item in &mut q.select {
        ctx.expr(&mut item.expr)?;
    }
    if let Some(from) = &mut q.from {
        for j in &mut from.joins {
            if let Some(on) = &mut j.on {
                ctx.expr(on)?;
            }
        }
    }
    if let Some(w) = &mut q.where_ {
        ctx.expr(w)?;
    }
    for g in &mut q.group_by {
        ctx.expr(g)?;
    }
    if let Some(h) = &mut q.having {
        ctx.expr(h)?;
    }
    for o in &mut q.order_by {
        ctx.expr(&mut o.expr)?;
    }
    if let Some(c) = &mut q.compound {
        resolve_query(&mut c.right, schema, outer)?;
    }
    Ok(())
}

struct Ctx<'a> {
    schema: Option<&'a DatabaseSchema>,
    scopes: &'a [Vec<Binding>],
    select_aliases: &'a [String],
}

impl Ctx<'_> {
    fn expr(&self, e: &mut Expr) -> Result<()> {
        match e {
            Expr::Column(c) => {
                c.resolved = self.column(c)?;
                Ok(())
            }
            Expr::Subquery(q) | Expr::Exists { query: q, .. } => resolve_query(q, self.schema, self.scopes),
            Expr::InQuery { expr, query, .. } => {
                self.expr(expr)?;
                resolve_query(query, self.schema, self.scopes)
            }
            Expr::Star { qualifier: Some(q) } => {
                if self.schema.is_some() && !self.scopes.iter().rev().flatten().any(|b| b.answers_to(q)) {
                    return Err(Error::Unresolved {
                        name: format!("{q}.*"),
                        message: "unknown table or alias".into(),
                    });
                }
                Ok(())
            }
            Expr::Star { .. } | Expr::Literal(_) => Ok(()),
            Expr::Agg { arg, .. } => self.expr(arg),
            Expr::Func { args, .. } => args.iter_mut().try_for_each(|a| self.expr(a)),
            Expr::Unary { expr, .. } | Expr::IsNull { expr, .. } | Expr::Cast { expr, .. } => self.expr(expr),
            Expr::Binary { left, right, .. } => {
                self.expr(left)?;
                self.expr(right)
            }
            Expr::Like { expr, pattern, .. } => {
                self.expr(expr)?;
                self.expr(pattern)
            }
            Expr::Between { expr, low, high, .. } => {
                self.expr(expr)?;
                self.expr(low)?;
                self.expr(high)
            }
            Expr::InList { expr, list, .. } => {
                self.expr(expr)?;
                list.iter_mut().try_for_each(|a| self.expr(a))
            }
        }
    }

    fn column(&self, c: &ColumnRef) -> Result<Option<ColumnId>> {
        let unresolved = |message: &str| Error::Unresolved {
            name: match &c.qualifier {
                Some(q) => format!("{q}.{}", c.name),
                None => c.name.clone(),
            },
            message: message.to_string(),
        };
        if let Some(q) = &c.qualifier {
            for scope in self.scopes.iter().rev() {
                if let Some(b) = scope.iter().find(|b| b.answers_to(q)) {
                    return match b {
                        Binding::Base { name, .. } => {
                            let id = ColumnId::new(name.clone(), c.name.clone());
                            match self.schema {
                                Some(db) if !db.has_column(&id) => Err(unresolved("no such column")),
                                _ => Ok(Some(id)),
                            }
                        }
                        Binding::Derived { .. } => Ok(None),
                    };
                }
            }
            return match self.schema {
                Some(_) => Err(unresolved("unknown table or alias")),
                None => Ok(None),
            };
        }

        for scope in self.scopes.iter().rev() {
            match self.schema {
                Some(db) => {
                    for b in scope {
                        match b {
                            Binding::Base { name, .. } => {
                                let id = ColumnId::new(name.clone(), c.name.clone());
                                if db.has_column(&id) {
                                    return Ok(Some(id));
                                }
                            }
                            Binding::Derived { outputs, .. } => {
                                if outputs.contains(&c.name) {
                                    return Ok(None);
                                }
                            }
                        }
                    }
                }
                None => {
                    let bases: Vec<&String> = scope
                        .iter()
                        .filter_map(|b| match b {
                            Binding::Base { name, .. } => Some(name),
                            Binding::Derived { .. } => None,
                        })
                        .collect();
                    if bases.len() == 1 && scope.len() == 1 {
                        return Ok(Some(ColumnId::new(bases[0].clone(), c.name.clone())));
                    }
                    return Ok(None);
                }
            }
        }
        if self.select_aliases.contains(&c.name) {
            return Ok(None);
        }
        Err(unresolved("no table in scope has this column"))
    }
}
