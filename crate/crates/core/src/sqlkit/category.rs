use std::fmt;

use serde::{Deserialize, Serialize};

use super::ast::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum QueryCategory {
    Simple,
    Join,
    Nested,
    Iuen,
}

impl fmt::Display for QueryCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QueryCategory::Simple => "SIMPLE",
            QueryCategory::Join => "JOIN",
            QueryCategory::Nested => "NESTED",
            QueryCategory::Iuen => "IUEN",
        })
    }
}

/// Whether any expression in the tree is a `NOT IN (subquery)`.
pub(crate) fn has_not_in_subquery(q: &Query) -> bool {
    q.all_queries().iter().any(|sub| {
        let mut found = false;
        for e in sub.clause_exprs() {
            e.walk(&mut |x| {
                if matches!(x, Expr::InQuery { negated: true, .. }) {
                    found = true;
                }
            });
        }
        found
    })
}

/// IUEN beats NESTED beats JOIN beats SIMPLE.
pub fn categorize(q: &Query) -> QueryCategory {
    let all = q.all_queries();
    if all.iter().any(|s| s.compound.is_some()) || has_not_in_subquery(q) {
        QueryCategory::Iuen
    } else if all.len() > 1 {
        QueryCategory::Nested
    } else if q.table_count() > 1 {
        QueryCategory::Join
    } else {
        QueryCategory::Simple
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_sql;
    use super::*;

    fn cat(sql: &str) -> QueryCategory {
        categorize(&parse_sql(sql, None).unwrap().root)
    }

    #[test]
    fn exemplar_categories() {
        assert_eq!(cat("SELECT COUNT(*) FROM head WHERE age > 56"), QueryCategory::Simple);
        assert_eq!(
            cat("SELECT T1.name , T1.long , AVG(T2.duration) FROM station AS T1 JOIN trip AS T2 ON T1.id = T2.start_station_id GROUP BY T2.start_station_id"),
            QueryCategory::Join
        );
        assert_eq!(
            cat("SELECT date , zip_code FROM weather WHERE min_dew_point_f < (SELECT MIN(min_dew_point_f) FROM weather WHERE zip_code = 94107)"),
            QueryCategory::Nested
        );
        assert_eq!(
            cat("SELECT status FROM city WHERE population > 1500 INTERSECT SELECT status FROM city WHERE population < 500"),
            QueryCategory::Iuen
        );
    }

    #[test]
    fn precedence() {
        assert_eq!(
            cat("SELECT T1.a FROM x AS T1 JOIN y AS T2 ON T1.id = T2.id WHERE T1.b > (SELECT avg(b) FROM x)"),
            QueryCategory::Nested
        );
        assert_eq!(
            cat("SELECT a FROM x WHERE b IN (SELECT b FROM y) UNION SELECT a FROM z"),
            QueryCategory::Iuen
        );
        assert_eq!(
            cat("SELECT a FROM x WHERE b NOT IN (SELECT b FROM y)"),
            QueryCategory::Iuen
        );
        assert_eq!(cat("SELECT a FROM x, y"), QueryCategory::Join);
    }
}
