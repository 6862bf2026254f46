//! Spider difficulty levels, computed with the official evaluator's component counts.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::ast::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hardness {
    Easy,
    Medium,
    Hard,
    Extra,
}

impl Hardness {
    pub const ALL: [Hardness; 4] = [Hardness::Easy, Hardness::Medium, Hardness::Hard, Hardness::Extra];

    pub fn as_str(self) -> &'static str {
        match self {
            Hardness::Easy => "easy",
            Hardness::Medium => "medium",
            Hardness::Hard => "hard",
            Hardness::Extra => "extra",
        }
    }
}

impl fmt::Display for Hardness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The three counts the reference evaluator thresholds on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ComponentCounts {
    pub component1: usize,
    pub component2: usize,
    pub others: usize,
}

fn conditions(e: &Option<Expr>) -> (Vec<&Expr>, Vec<BinOp>) {
    e.as_ref().map(|e| e.flatten_conditions()).unwrap_or_default()
}

fn is_negated(cond: &Expr) -> bool {
    matches!(
        cond,
        Expr::Like { negated: true, .. }
            | Expr::Between { negated: true, .. }
            | Expr::InList { negated: true, .. }
            | Expr::InQuery { negated: true, .. }
            | Expr::Exists { negated: true, .. }
            | Expr::IsNull { negated: true, .. }
            | Expr::Unary { op: UnaryOp::Not, .. }
    )
}

fn top_level_agg(e: &Expr) -> bool {
    matches!(e, Expr::Agg { .. })
}

fn first_operand_agg(e: &Expr) -> bool {
    match e {
        Expr::Binary { op, left, .. } if !op.is_comparison() => top_level_agg(left),
        other => top_level_agg(other),
    }
}

/// Nested queries the reference evaluator sees: subqueries used as condition
/// operands, derived tables, and set-operator continuations.
fn nested_count(q: &Query) -> usize {
    let mut n = 0;
    for e in [&q.where_, &q.having] {
        let (leaves, _) = conditions(e);
        for leaf in leaves {
            n += leaf.subqueries().len();
        }
    }
    if let Some(f) = &q.from {
        n += f.table_refs().filter(|t| matches!(t, TableRef::Derived { .. })).count();
    }
    if q.compound.is_some() {
        n += 1;
    }
    n
}

pub fn component_counts(q: &Query) -> ComponentCounts {
    let (where_leaves, where_ops) = conditions(&q.where_);
    let (having_leaves, having_ops) = conditions(&q.having);

    let mut c1 = 0;
    c1 += usize::from(!where_leaves.is_empty());
    c1 += usize::from(!q.group_by.is_empty());
    c1 += usize::from(!q.order_by.is_empty());
    c1 += usize::from(q.limit.is_some());
    c1 += q.table_count().saturating_sub(1);
    c1 += where_ops.iter().chain(&having_ops).filter(|o| **o == BinOp::Or).count();
    c1 += where_leaves
        .iter()
        .chain(&having_leaves)
        .filter(|c| matches!(c, Expr::Like { .. }))
        .count();

    let c2 = nested_count(q);

    // The reference evaluator's aggregate count inspects the first field of each
    // unit: the aggregate for SELECT/GROUP BY/ORDER BY units, but the negation flag
    // for WHERE/HAVING condition units, and every HAVING connective counts as well.
    let mut agg = q.select.iter().filter(|s| top_level_agg(&s.expr)).count();
    agg += where_leaves.iter().filter(|c| is_negated(c)).count();
    agg += q.group_by.iter().filter(|g| top_level_agg(g)).count();
    agg += q.order_by.iter().filter(|o| first_operand_agg(&o.expr)).count();
    agg += having_leaves.iter().filter(|c| is_negated(c)).count() + having_ops.len();

    let mut others = 0;
    others += usize::from(agg > 1);
    others += usize::from(q.select.len() > 1);
    others += usize::from(where_leaves.len() > 1);
    others += usize::from(q.group_by.len() > 1);

    ComponentCounts {
        component1: c1,
        component2: c2,
        others,
    }
}

pub fn hardness(q: &Query) -> Hardness {
    let ComponentCounts {
        component1: c1,
        component2: c2,
        others,
    } = component_counts(q);
    if c1 <= 1 && others == 0 && c2 == 0 {
        Hardness::Easy
    } else if (others <= 2 && c1 <= 1 && c2 == 0) || (c1 <= 2 && others < 2 && c2 == 0) {
        Hardness::Medium
    } else if (others > 2 && c1 <= 2 && c2 == 0)
        || (2 < c1 && c1 <= 3 && others <= 2 && c2 == 0)
        || (c1 <= 1 && others == 0 && c2 <= 1)
    {
        Hardness::Hard
    } else {
        Hardness::Extra
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_sql;
    use super::*;

    fn level(sql: &str) -> Hardness {
        hardness(&parse_sql(sql, None).unwrap().root)
    }

    #[test]
    fn single_column_is_easy() {
        assert_eq!(level("SELECT name FROM city"), Hardness::Easy);
        assert_eq!(level("SELECT count(*) FROM head WHERE age > 56"), Hardness::Easy);
    }

    #[test]
    fn medium_and_hard_examples() {
        assert_eq!(level("SELECT name , age FROM head WHERE age > 56"), Hardness::Medium);
        assert_eq!(
            level("SELECT T1.name , T1.long , AVG(T2.duration) FROM station AS T1 JOIN trip AS T2 ON T1.id = T2.start_station_id GROUP BY T2.start_station_id"),
            Hardness::Medium
        );
        assert_eq!(
            level("SELECT date , zip_code FROM weather WHERE min_dew_point_f < (SELECT MIN(min_dew_point_f) FROM weather WHERE zip_code = 94107)"),
            Hardness::Extra
        );
    }

    #[test]
    fn single_condition_intersect_is_hard() {
        // one WHERE, one nested continuation, nothing else: the third "hard" band
        assert_eq!(
            level("SELECT status FROM city WHERE population > 1500 INTERSECT SELECT status FROM city WHERE population < 500"),
            Hardness::Hard
        );
        assert_eq!(
            level("SELECT a FROM t WHERE b > 1 AND c < 2 INTERSECT SELECT a FROM t"),
            Hardness::Extra
        );
    }

    #[test]
    fn adding_components_never_lowers_level() {
        let chain = [
            "SELECT a FROM t",
            "SELECT a FROM t WHERE b = 1",
            "SELECT a FROM t WHERE b = 1 ORDER BY c",
            "SELECT a FROM t WHERE b = 1 ORDER BY c LIMIT 1",
            "SELECT a, d FROM t WHERE b = 1 AND e = 2 ORDER BY c LIMIT 1",
            "SELECT a, d FROM t WHERE b = 1 AND e = 2 GROUP BY a, d ORDER BY c LIMIT 1",
            "SELECT a, d FROM t WHERE b = 1 AND e = (SELECT max(e) FROM t) GROUP BY a, d ORDER BY c LIMIT 1",
        ];
        let levels: Vec<Hardness> = chain.iter().map(|s| level(s)).collect();
        assert!(levels.windows(2).all(|w| w[0] <= w[1]), "{levels:?}");
    }
}
