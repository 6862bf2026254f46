use std::collections::{BTreeMap, HashMap};
#[cfg(feature = "sqlite")]
use std::path::{Path, PathBuf};

use super::{ColumnId, DatabaseSchema, TokenSeq, ValueType};
#[cfg(feature = "sqlite")]
use crate::error::Error;
use crate::error::Result;

/// Distinct values scanned per column.
pub const MAX_SCANNED_VALUES: usize = 5000;

/// Column → matched cell values in original casing.
pub type ValueMatches = BTreeMap<ColumnId, Vec<String>>;

#[derive(Clone, Debug, PartialEq)]
pub enum CellValue {
    Text(String),
    Number(f64),
}

impl CellValue {
    pub fn render(&self) -> String {
        match self {
            CellValue::Text(s) => s.clone(),
            CellValue::Number(x) if x.fract() == 0.0 && x.abs() < 1e15 => format!("{}", *x as i64),
            CellValue::Number(x) => x.to_string(),
        }
    }
}

/// Read access to the cell contents of one database.
pub trait ValueStore {
    /// Up to `limit` distinct non-null values of a column, in storage order.
    fn column_values(&self, table: &str, column: &str, limit: usize) -> Result<Vec<CellValue>>;
}

/// Values held in memory, keyed by column.
#[derive(Clone, Debug, Default)]
pub struct InMemoryValueStore {
    pub values: HashMap<ColumnId, Vec<CellValue>>,
}

impl InMemoryValueStore {
    pub fn insert(&mut self, col: ColumnId, values: Vec<CellValue>) {
        self.values.insert(col, values);
    }
}

impl ValueStore for InMemoryValueStore {
    fn column_values(&self, table: &str, column: &str, limit: usize) -> Result<Vec<CellValue>> {
        let key = ColumnId::new(table, column);
        Ok(self
            .values
            .get(&key)
            .map(|v| v.iter().take(limit).cloned().collect())
            .unwrap_or_default())
    }
}

#[cfg(feature = "sqlite")]
pub fn sqlite_path(db_root: &Path, db_id: &str) -> PathBuf {
    db_root.join(db_id).join(format!("{db_id}.sqlite"))
}

/// Cell values read from `<db_root>/<db_id>/<db_id>.sqlite`.
#[cfg(feature = "sqlite")]
pub struct SqliteValueStore {
    conn: rusqlite::Connection,
}

#[cfg(feature = "sqlite")]
impl SqliteValueStore {
    pub fn open(db_root: &Path, db_id: &str) -> Result<Self> {
        let path = sqlite_path(db_root, db_id);
        if !path.is_file() {
            return Err(Error::ValueStore(format!("missing database file {}", path.display())));
        }
        let conn = rusqlite::Connection::open_with_flags(
            &path,
            rusqlite::OpenFlags::SQLITE_OPEN_READ_ONLY | rusqlite::OpenFlags::SQLITE_OPEN_NO_MUTEX,
        )
        .map_err(|e| Error::ValueStore(format!("{}: {e}", path.display())))?;
        Ok(SqliteValueStore { conn })
    }
}

#[cfg(feature = "sqlite")]
impl ValueStore for SqliteValueStore {
    fn column_values(&self, table: &str, column: &str, limit: usize) -> Result<Vec<CellValue>> {
        use rusqlite::types::ValueRef;
        let sql = format!(
            "SELECT DISTINCT \"{}\" FROM \"{}\" WHERE \"{}\" IS NOT NULL LIMIT {limit}",
            column.replace('"', "\"\""),
            table.replace('"', "\"\""),
            column.replace('"', "\"\""),
        );
        let mut stmt = self
            .conn
            .prepare(&sql)
            .map_err(|e| Error::ValueStore(format!("column {table}.{column} does not match the schema: {e}")))?;
        let mut rows = stmt.query([]).map_err(|e| Error::ValueStore(e.to_string()))?;
        let mut out = Vec::new();
        while let Some(row) = rows.next().map_err(|e| Error::ValueStore(e.to_string()))? {
            let v = match row.get_ref(0).map_err(|e| Error::ValueStore(e.to_string()))? {
                ValueRef::Integer(i) => CellValue::Number(i as f64),
                ValueRef::Real(r) => CellValue::Number(r),
                ValueRef::Text(t) => CellValue::Text(String::from_utf8_lossy(t).into_owned()),
                ValueRef::Null | ValueRef::Blob(_) => continue,
            };
            out.push(v);
        }
        Ok(out)
    }
}

fn parse_number(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|x| x.is_finite())
}

/// Indices of question tokens matching a cell value: a single token equal to the
/// value (case-insensitive), both tokens of a matching bigram, or, for numeric
/// columns, tokens numerically equal to the value.
pub fn token_matches_value(tokens: &TokenSeq, value: &str, value_type: ValueType) -> Vec<usize> {
    let surfaces = tokens.surfaces();
    let mut hits = Vec::new();
    match value_type {
        ValueType::Number => {
            if let Some(x) = parse_number(value) {
                for (i, s) in surfaces.iter().enumerate() {
                    if parse_number(s) == Some(x) {
                        hits.push(i);
                    }
                }
            }
        }
        ValueType::Text | ValueType::Other => {
            let needle = value.trim().to_lowercase();
            if needle.is_empty() {
                return hits;
            }
            for (i, s) in surfaces.iter().enumerate() {
                if *s == needle {
                    hits.push(i);
                }
                if let Some(next) = surfaces.get(i + 1) {
                    if needle.len() == s.len() + 1 + next.len()
                        && needle.starts_with(s)
                        && needle.ends_with(next)
                        && needle.as_bytes()[s.len()] == b' '
                    {
                        hits.push(i);
                        hits.push(i + 1);
                    }
                }
            }
        }
        ValueType::Time | ValueType::Boolean => {}
    }
    hits.sort_unstable();
    hits.dedup();
    hits
}

/// Matches question tokens against the contents of every text and numeric column.
pub fn value_match(tokens: &TokenSeq, db: &DatabaseSchema, store: &dyn ValueStore) -> Result<ValueMatches> {
    let mut out = ValueMatches::new();
    for table in &db.tables {
        for col in &table.columns {
            if matches!(col.value_type, ValueType::Time | ValueType::Boolean) {
                continue;
            }
            let values = store.column_values(&table.name, &col.name, MAX_SCANNED_VALUES)?;
            let mut found: Vec<(usize, String)> = Vec::new();
            for v in values {
                let (rendered, ty) = match (&v, col.value_type) {
                    (CellValue::Number(_), ValueType::Number) => (v.render(), ValueType::Number),
                    (CellValue::Text(t), ValueType::Number) => match parse_number(t) {
                        Some(_) => (t.clone(), ValueType::Number),
                        None => continue,
                    },
                    (_, _) => (v.render(), ValueType::Text),
                };
                if let Some(&first) = token_matches_value(tokens, &rendered, ty).first() {
                    if !found.iter().any(|(_, s)| *s == rendered) {
                        found.push((first, rendered));
                    }
                }
            }
            if !found.is_empty() {
                found.sort();
                out.insert(
                    ColumnId::new(table.name.clone(), col.name.clone()),
                    found.into_iter().map(|(_, s)| s).collect(),
                );
            }
        }
    }
    Ok(out)
}
