//! Ordered labeled trees and the Zhang–Shasha tree edit distance.

use serde::Serialize;

use super::ast::*;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct LabeledTree<L> {
    pub label: L,
    pub children: Vec<LabeledTree<L>>,
}

impl<L> LabeledTree<L> {
    pub fn leaf(label: L) -> Self {
        LabeledTree {
            label,
            children: Vec::new(),
        }
    }

    pub fn node(label: L, children: Vec<LabeledTree<L>>) -> Self {
        LabeledTree { label, children }
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(|c| c.size()).sum::<usize>()
    }
}

/// Postorder labels plus, for each node, the postorder index of its leftmost leaf.
struct Postorder<'a, L> {
    labels: Vec<&'a L>,
    leftmost: Vec<usize>,
    keyroots: Vec<usize>,
}

impl<'a, L> Postorder<'a, L> {
    fn new(t: &'a LabeledTree<L>) -> Self {
        let mut labels = Vec::new();
        let mut leftmost = Vec::new();
        fn walk<'a, L>(t: &'a LabeledTree<L>, labels: &mut Vec<&'a L>, lm: &mut Vec<usize>) -> usize {
            let mut first_leaf = None;
            for c in &t.children {
                let l = walk(c, labels, lm);
                first_leaf.get_or_insert(l);
            }
            let idx = labels.len();
            labels.push(&t.label);
            let l = first_leaf.unwrap_or(idx);
            lm.push(l);
            l
        }
        walk(t, &mut labels, &mut leftmost);
        let n = labels.len();
        // a keyroot is the highest-numbered node sharing its leftmost leaf
        let mut seen = vec![false; n];
        let mut keyroots = Vec::new();
        for i in (0..n).rev() {
            if !seen[leftmost[i]] {
                seen[leftmost[i]] = true;
                keyroots.push(i);
            }
        }
        keyroots.reverse();
        Postorder {
            labels,
            leftmost,
            keyroots,
        }
    }
}

/// Unit-cost edit distance between ordered labeled trees.
pub fn tree_distance<L: PartialEq>(a: &LabeledTree<L>, b: &LabeledTree<L>) -> usize {
    let pa = Postorder::new(a);
    let pb = Postorder::new(b);
    let (n, m) = (pa.labels.len(), pb.labels.len());
    let mut tree = vec![0usize; n * m];
    let mut forest = vec![0usize; (n + 1) * (m + 1)];
    for &i in &pa.keyroots {
        for &j in &pb.keyroots {
            let (li, lj) = (pa.leftmost[i], pb.leftmost[j]);
            let rows = i - li + 2;
            let cols = j - lj + 2;
            let at = |x: usize, y: usize| x * cols + y;
            forest[at(0, 0)] = 0;
            for x in 1..rows {
                forest[at(x, 0)] = forest[at(x - 1, 0)] + 1;
            }
            for y in 1..cols {
                forest[at(0, y)] = forest[at(0, y - 1)] + 1;
            }
            for x in 1..rows {
                let i1 = li + x - 1;
                for y in 1..cols {
                    let j1 = lj + y - 1;
                    let del = forest[at(x - 1, y)] + 1;
                    let ins = forest[at(x, y - 1)] + 1;
                    let best = if pa.leftmost[i1] == li && pb.leftmost[j1] == lj {
                        let relabel = usize::from(pa.labels[i1] != pb.labels[j1]);
                        let d = del.min(ins).min(forest[at(x - 1, y - 1)] + relabel);
                        tree[i1 * m + j1] = d;
                        d
                    } else {
                        let p = pa.leftmost[i1] - li;
                        let q = pb.leftmost[j1] - lj;
                        del.min(ins).min(forest[at(p, q)] + tree[i1 * m + j1])
                    };
                    forest[at(x, y)] = best;
                }
            }
        }
    }
    tree[(n - 1) * m + (m - 1)]
}

/// Tree edit distance between the structural trees of two queries.
pub fn tree_edit_distance(a: &SqlAst, b: &SqlAst) -> usize {
    tree_distance(&sql_tree(&a.root), &sql_tree(&b.root))
}

/// Structural tree of a query: clause keywords, operators and resolved identifiers
/// as labels, with every literal collapsed to `LITERAL`.
pub fn sql_tree(q: &Query) -> LabeledTree<String> {
    match &q.compound {
        Some(c) => LabeledTree::node(c.op.keyword().to_string(), vec![core_tree(q), sql_tree(&c.right)]),
        None => core_tree(q),
    }
}

fn l(s: &str) -> String {
    s.to_string()
}

fn core_tree(q: &Query) -> LabeledTree<String> {
    let mut kids = Vec::new();
    if q.distinct {
        kids.push(LabeledTree::leaf(l("DISTINCT")));
    }
    kids.extend(q.select.iter().map(|s| expr_tree(&s.expr)));
    if let Some(f) = &q.from {
        let mut from = vec![table_tree(&f.first)];
        for j in &f.joins {
            let mut jk = vec![table_tree(&j.table)];
            if let Some(on) = &j.on {
                jk.push(LabeledTree::node(l("ON"), vec![expr_tree(on)]));
            }
            from.push(LabeledTree::node(l("JOIN"), jk));
        }
        kids.push(LabeledTree::node(l("FROM"), from));
    }
    if let Some(w) = &q.where_ {
        kids.push(LabeledTree::node(l("WHERE"), vec![expr_tree(w)]));
    }
    if !q.group_by.is_empty() {
        kids.push(LabeledTree::node(
            l("GROUP_BY"),
            q.group_by.iter().map(expr_tree).collect(),
        ));
    }
    if let Some(h) = &q.having {
        kids.push(LabeledTree::node(l("HAVING"), vec![expr_tree(h)]));
    }
    if !q.order_by.is_empty() {
        kids.push(LabeledTree::node(
            l("ORDER_BY"),
            q.order_by
                .iter()
                .map(|o| LabeledTree::node(l(if o.desc { "DESC" } else { "ASC" }), vec![expr_tree(&o.expr)]))
                .collect(),
        ));
    }
    if q.limit.is_some() {
        kids.push(LabeledTree::node(l("LIMIT"), vec![LabeledTree::leaf(l("LITERAL"))]));
    }
    LabeledTree::node(l("SELECT"), kids)
}

fn table_tree(t: &TableRef) -> LabeledTree<String> {
    match t {
        TableRef::Table { name, .. } => LabeledTree::leaf(name.clone()),
        TableRef::Derived { query, .. } => sql_tree(query),
    }
}

fn negatable(base: &str, negated: bool) -> String {
    if negated {
        format!("NOT {base}")
    } else {
        base.to_string()
    }
}

fn expr_tree(e: &Expr) -> LabeledTree<String> {
    match e {
        Expr::Column(c) => LabeledTree::leaf(match &c.resolved {
            Some(id) => id.to_string(),
            None => c.name.clone(),
        }),
        Expr::Star { .. } => LabeledTree::leaf(l("*")),
        Expr::Literal(_) => LabeledTree::leaf(l("LITERAL")),
        Expr::Agg { func, distinct, arg } => {
            let label = if *distinct {
                format!("{} DISTINCT", func.keyword())
            } else {
                func.keyword().to_string()
            };
            LabeledTree::node(label, vec![expr_tree(arg)])
        }
        Expr::Func { name, args } => LabeledTree::node(name.to_uppercase(), args.iter().map(expr_tree).collect()),
        Expr::Unary { op, expr } => LabeledTree::node(
            l(match op {
                UnaryOp::Neg => "NEG",
                UnaryOp::Not => "NOT",
            }),
            vec![expr_tree(expr)],
        ),
        Expr::Binary { op, left, right } => LabeledTree::node(l(op.symbol()), vec![expr_tree(left), expr_tree(right)]),
        Expr::Like { expr, pattern, negated } => {
            LabeledTree::node(negatable("LIKE", *negated), vec![expr_tree(expr), expr_tree(pattern)])
        }
        Expr::Between {
            expr,
            low,
            high,
            negated,
        } => LabeledTree::node(
            negatable("BETWEEN", *negated),
            vec![expr_tree(expr), expr_tree(low), expr_tree(high)],
        ),
        Expr::InList { expr, list, negated } => LabeledTree::node(
            negatable("IN", *negated),
            std::iter::once(expr_tree(expr))
                .chain(list.iter().map(expr_tree))
                .collect(),
        ),
        Expr::InQuery { expr, query, negated } => {
            LabeledTree::node(negatable("IN", *negated), vec![expr_tree(expr), sql_tree(query)])
        }
        Expr::Exists { query, negated } => LabeledTree::node(negatable("EXISTS", *negated), vec![sql_tree(query)]),
        Expr::IsNull { expr, negated } => LabeledTree::node(
            l(if *negated { "IS NOT NULL" } else { "IS NULL" }),
            vec![expr_tree(expr)],
        ),
        Expr::Subquery(q) => sql_tree(q),
        Expr::Cast { expr, ty } => LabeledTree::node(format!("CAST {}", ty.to_uppercase()), vec![expr_tree(expr)]),
    }
}
