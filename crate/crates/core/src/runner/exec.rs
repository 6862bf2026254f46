//! Execution accuracy against SQLite databases.

use std::cmp::Ordering;
use std::path::Path;
use std::time::{Duration, Instant};

use rusqlite::types::ValueRef;
use rusqlite::{Connection, OpenFlags};

use crate::error::{Error, Result};
use crate::sqlkit::{parse_sql, Query};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// A result cell. Integers are widened to floats so `2` and `2.0` compare equal.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Null,
    Num(f64),
    Text(String),
    Blob(Vec<u8>),
}

impl Cell {
    fn rank(&self) -> u8 {
        match self {
            Cell::Null => 0,
            Cell::Num(_) => 1,
            Cell::Text(_) => 2,
            Cell::Blob(_) => 3,
        }
    }
}

impl Eq for Cell {}

impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Cell::Num(a), Cell::Num(b)) => a.total_cmp(b),
            (Cell::Text(a), Cell::Text(b)) => a.cmp(b),
            (Cell::Blob(a), Cell::Blob(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub type Row = Vec<Cell>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExecFailure {
    Timeout,
    Sql(String),
}

impl std::fmt::Display for ExecFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExecFailure::Timeout => f.write_str("timed out"),
            ExecFailure::Sql(m) => f.write_str(m),
        }
    }
}

/// A read-only connection that aborts any statement running past the timeout.
pub struct Executor {
    conn: Connection,
    timeout: Duration,
}

impl Executor {
    pub fn open(path: &Path, timeout: Duration) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::invalid(format!("missing database file {}", path.display())));
        }
        let conn =
            Connection::open_with_flags(path, OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX)
                .map_err(|e| Error::Execution(format!("{}: {e}", path.display())))?;
        Ok(Executor { conn, timeout })
    }

    pub fn from_connection(conn: Connection, timeout: Duration) -> Self {
        Executor { conn, timeout }
    }

    pub fn run(&self, sql: &str) -> std::result::Result<Vec<Row>, ExecFailure> {
        let start = Instant::now();
        let limit = self.timeout;
        self.conn.progress_handler(1000, Some(move || start.elapsed() > limit));
        let out = self.collect(sql);
        self.conn.progress_handler(0, None::<fn() -> bool>);
        out.map_err(|e| {
            if start.elapsed() > limit {
                ExecFailure::Timeout
            } else {
                ExecFailure::Sql(e.to_string())
            }
        })
    }

    fn collect(&self, sql: &str) -> rusqlite::Result<Vec<Row>> {
        let mut stmt = self.conn.prepare(sql)?;
        let n = stmt.column_count();
        let mut rows = stmt.query([])?;
        let mut out = Vec::new();
        while let Some(row) = rows.next()? {
            let mut cells = Vec::with_capacity(n);
            for i in 0..n {
                cells.push(match row.get_ref(i)? {
                    ValueRef::Null => Cell::Null,
                    ValueRef::Integer(v) => Cell::Num(v as f64),
                    ValueRef::Real(v) => Cell::Num(if v == 0.0 { 0.0 } else { v }),
                    ValueRef::Text(t) => Cell::Text(String::from_utf8_lossy(t).into_owned()),
                    ValueRef::Blob(b) => Cell::Blob(b.to_vec()),
                });
            }
            out.push(cells);
        }
        Ok(out)
    }

    /// Gold failures are errors; prediction failures are verdicts.
    pub fn compare(&self, pred: &str, gold: &str) -> Result<Verdict> {
        let gold_rows = self
            .run(gold)
            .map_err(|e| Error::Execution(format!("gold query failed: {e}")))?;
        let pred_rows = match self.run(pred) {
            Ok(r) => r,
            Err(e) => return Ok(Verdict::PredFailed(e)),
        };
        Ok(if results_match(pred_rows, gold_rows, gold_is_ordered(gold)) {
            Verdict::Match
        } else {
            Verdict::Mismatch
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Match,
    Mismatch,
    PredFailed(ExecFailure),
}

impl Verdict {
    pub fn is_match(&self) -> bool {
        matches!(self, Verdict::Match)
    }
}

/// Ordered comparison when `ordered`, multiset comparison otherwise.
pub fn results_match(mut pred: Vec<Row>, mut gold: Vec<Row>, ordered: bool) -> bool {
    if !ordered {
        pred.sort();
        gold.sort();
    }
    pred == gold
}

fn query_has_order(q: &Query) -> bool {
    !q.order_by.is_empty() || q.compound.as_ref().is_some_and(|c| query_has_order(&c.right))
}

/// Whether the outermost query sorts its result. Unparsable text falls back to a
/// scan for `ORDER BY` outside parentheses.
pub fn gold_is_ordered(gold: &str) -> bool {
    if let Ok(ast) = parse_sql(gold, None) {
        return query_has_order(&ast.root);
    }
    let upper = gold.to_ascii_uppercase();
    let mut depth = 0i32;
    let bytes = upper.as_bytes();
    for (i, b) in bytes.iter().enumerate() {
        match b {
            b'(' => depth += 1,
            b')' => depth -= 1,
            b'O' if depth == 0 && upper[i..].starts_with("ORDER BY") => return true,
            _ => {}
        }
    }
    false
}

pub fn execution_accuracy(pred: &str, gold: &str, db_file: &Path, timeout: Duration) -> Result<bool> {
    Ok(Executor::open(db_file, timeout)?.compare(pred, gold)?.is_match())
}
