//! Database schemas, datasets, question tokenization and cell-value matching.
//!
//! Everything here is immutable once loaded. Schema names are stored lowercase;
//! cell values keep their original casing because prompts print them verbatim.

mod tokenize;
mod values;

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use tokenize::{lemmatize, name_words, tokenize_question, Token, TokenSeq};
#[cfg(feature = "sqlite")]
pub use values::{sqlite_path, SqliteValueStore};
pub use values::{
    token_matches_value, value_match, CellValue, InMemoryValueStore, ValueMatches, ValueStore, MAX_SCANNED_VALUES,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueType {
    Text,
    Number,
    Time,
    Boolean,
    Other,
}

/// A fully qualified column, rendered `table.column`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ColumnId {
    pub table: String,
    pub column: String,
}

impl ColumnId {
    pub fn new(table: impl Into<String>, column: impl Into<String>) -> Self {
        ColumnId {
            table: table.into(),
            column: column.into(),
        }
    }

    /// Parses `table.column`.
    pub fn parse(s: &str) -> Option<Self> {
        let (t, c) = s.split_once('.')?;
        if t.is_empty() || c.is_empty() {
            return None;
        }
        Some(ColumnId::new(t, c))
    }
}

impl fmt::Display for ColumnId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.table, self.column)
    }
}

impl Serialize for ColumnId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [&self.table, &self.column].serialize(s)
    }
}

impl<'de> Deserialize<'de> for ColumnId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [table, column] = <[String; 2]>::deserialize(d)?;
        Ok(ColumnId { table, column })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnDef {
    pub name: String,
    #[serde(rename = "type")]
    pub value_type: ValueType,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableDef {
    pub name: String,
    pub columns: Vec<ColumnDef>,
}

impl TableDef {
    pub fn column(&self, name: &str) -> Option<&ColumnDef> {
        self.columns.iter().find(|c| c.name == name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[String; 4]", into = "[String; 4]")]
pub struct ForeignKey {
    pub from: ColumnId,
    pub to: ColumnId,
}

impl From<[String; 4]> for ForeignKey {
    fn from([ft, fc, tt, tc]: [String; 4]) -> Self {
        ForeignKey {
            from: ColumnId::new(ft, fc),
            to: ColumnId::new(tt, tc),
        }
    }
}

impl From<ForeignKey> for [String; 4] {
    fn from(fk: ForeignKey) -> Self {
        [fk.from.table, fk.from.column, fk.to.table, fk.to.column]
    }
}

impl fmt::Display for ForeignKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}", self.from, self.to)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatabaseSchema {
    pub db_id: String,
    pub tables: Vec<TableDef>,
    #[serde(default)]
    pub primary_keys: Vec<ColumnId>,
    #[serde(default)]
    pub foreign_keys: Vec<ForeignKey>,
}

/// A database schema restricted to the items kept by pruning.
pub type PrunedSchema = DatabaseSchema;

impl DatabaseSchema {
    pub fn table(&self, name: &str) -> Option<&TableDef> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn has_table(&self, name: &str) -> bool {
        self.table(name).is_some()
    }

    pub fn has_column(&self, col: &ColumnId) -> bool {
        self.table(&col.table).is_some_and(|t| t.column(&col.column).is_some())
    }

    pub fn column_type(&self, col: &ColumnId) -> Option<ValueType> {
        self.table(&col.table)?.column(&col.column).map(|c| c.value_type)
    }

    /// All columns in catalog order (tables in order, columns in order within each).
    pub fn column_ids(&self) -> impl Iterator<Item = ColumnId> + '_ {
        self.tables.iter().flat_map(|t| {
            t.columns
                .iter()
                .map(move |c| ColumnId::new(t.name.clone(), c.name.clone()))
        })
    }

    pub fn column_count(&self) -> usize {
        self.tables.iter().map(|t| t.columns.len()).sum()
    }

    /// True when every table, column and key of `self` also exists in `other`.
    pub fn is_subschema_of(&self, other: &DatabaseSchema) -> bool {
        self.db_id == other.db_id
            && self.tables.iter().all(|t| {
                other
                    .table(&t.name)
                    .is_some_and(|ot| t.columns.iter().all(|c| ot.column(&c.name).is_some()))
            })
            && self.foreign_keys.iter().all(|fk| other.foreign_keys.contains(fk))
            && self.primary_keys.iter().all(|pk| other.primary_keys.contains(pk))
    }

    /// Lowercases names and checks uniqueness and key references.
    fn normalize_and_validate(mut self) -> Result<Self> {
        self.db_id = self.db_id.trim().to_string();
        if self.db_id.is_empty() {
            return Err(Error::invalid("empty db_id"));
        }
        let db = self.db_id.clone();
        let mut seen_tables = HashSet::new();
        for t in &mut self.tables {
            t.name = t.name.to_lowercase();
            if !seen_tables.insert(t.name.clone()) {
                return Err(Error::invalid(format!("database `{db}`: duplicate table `{}`", t.name)));
            }
            let mut seen_cols = HashSet::new();
            for c in &mut t.columns {
                c.name = c.name.to_lowercase();
                if !seen_cols.insert(c.name.clone()) {
                    return Err(Error::invalid(format!(
                        "database `{db}`: duplicate column `{}.{}`",
                        t.name, c.name
                    )));
                }
            }
        }
        let lower = |c: &mut ColumnId| {
            c.table = c.table.to_lowercase();
            c.column = c.column.to_lowercase();
        };
        self.primary_keys.iter_mut().for_each(lower);
        for fk in &mut self.foreign_keys {
            lower(&mut fk.from);
            lower(&mut fk.to);
        }
        let endpoints = self
            .primary_keys
            .iter()
            .chain(self.foreign_keys.iter().flat_map(|fk| [&fk.from, &fk.to]));
        for col in endpoints {
            if !self.has_table(&col.table) {
                return Err(Error::invalid(format!(
                    "database `{db}`: key references missing table `{}`",
                    col.table
                )));
            }
            if !self.has_column(col) {
                return Err(Error::invalid(format!(
                    "database `{db}`: key references missing column `{col}`"
                )));
            }
        }
        Ok(self)
    }
}

/// All databases of a benchmark, keyed by `db_id` in ingestion order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SchemaCatalog {
    databases: IndexMap<String, DatabaseSchema>,
}

#[derive(Serialize, Deserialize)]
struct CatalogFile {
    databases: Vec<DatabaseSchema>,
}

impl SchemaCatalog {
    pub fn from_databases(dbs: impl IntoIterator<Item = DatabaseSchema>) -> Result<Self> {
        let mut databases = IndexMap::new();
        for db in dbs {
            let db = db.normalize_and_validate()?;
            if databases.contains_key(&db.db_id) {
                return Err(Error::invalid(format!("duplicate db_id `{}`", db.db_id)));
            }
            databases.insert(db.db_id.clone(), db);
        }
        Ok(SchemaCatalog { databases })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CatalogFile = serde_json::from_str(text).map_err(|e| Error::json("catalog", e))?;
        Self::from_databases(file.databases)
    }

    pub fn to_json(&self) -> String {
        let file = CatalogFile {
            databases: self.databases.values().cloned().collect(),
        };
        serde_json::to_string_pretty(&file).expect("catalog serializes")
    }

    pub fn get(&self, db_id: &str) -> Option<&DatabaseSchema> {
        self.databases.get(db_id)
    }

    pub fn require(&self, db_id: &str) -> Result<&DatabaseSchema> {
        self.get(db_id)
            .ok_or_else(|| Error::invalid(format!("unknown db_id `{db_id}`")))
    }

    pub fn databases(&self) -> impl Iterator<Item = &DatabaseSchema> {
        self.databases.values()
    }

    pub fn len(&self) -> usize {
        self.databases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.databases.is_empty()
    }
}

pub fn load_catalog(path: impl AsRef<Path>) -> Result<SchemaCatalog> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    SchemaCatalog::from_json(&text).map_err(|e| match e {
        Error::Json { source, .. } => Error::json(path.display().to_string(), source),
        other => other,
    })
}

/// One (question, database) pair, with gold SQL for pool and training samples.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub db_id: String,
    pub question: String,
    #[serde(rename = "sql", default)]
    pub gold_sql: Option<String>,
}

impl Sample {
    pub fn gold(&self) -> Result<&str> {
        self.gold_sql
            .as_deref()
            .ok_or_else(|| Error::invalid(format!("sample `{}` has no gold SQL", self.id)))
    }
}

pub fn parse_dataset(text: &str, catalog: &SchemaCatalog) -> Result<Vec<Sample>> {
    #[derive(Deserialize)]
    struct Line {
        id: String,
        db_id: String,
        question: Option<String>,
        #[serde(default)]
        sql: Option<String>,
    }

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: Line =
            serde_json::from_str(line).map_err(|e| Error::json(format!("dataset line {}", lineno + 1), e))?;
        let question = rec.question.ok_or_else(|| {
            Error::invalid(format!(
                "dataset line {}: sample `{}` is missing `question`",
                lineno + 1,
                rec.id
            ))
        })?;
        if catalog.get(&rec.db_id).is_none() {
            return Err(Error::invalid(format!(
                "dataset line {}: unknown db_id `{}`",
                lineno + 1,
                rec.db_id
            )));
        }
        if !seen.insert(rec.id.clone()) {
            return Err(Error::invalid(format!(
                "dataset line {}: duplicate id `{}`",
                lineno + 1,
                rec.id
            )));
        }
        out.push(Sample {
            id: rec.id,
            db_id: rec.db_id,
            question,
            gold_sql: rec.sql,
        });
    }
    Ok(out)
}

pub fn load_dataset(path: impl AsRef<Path>, catalog: &SchemaCatalog) -> Result<Vec<Sample>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text, catalog)
}

pub fn write_dataset(samples: &[Sample]) -> String {
    let mut out = String::new();
    for s in samples {
        out.push_str(&serde_json::to_string(s).expect("sample serializes"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub const WORLD_CATALOG: &str = r#"{"databases":[{"db_id":"world","tables":[
        {"name":"city","columns":[{"name":"ID","type":"number"},{"name":"Name","type":"text"},{"name":"CountryCode","type":"text"},{"name":"District","type":"text"},{"name":"Population","type":"number"}]},
        {"name":"sqlite_sequence","columns":[{"name":"name","type":"text"},{"name":"seq","type":"number"}]},
        {"name":"country","columns":[{"name":"Code","type":"text"},{"name":"Name","type":"text"},{"name":"Continent","type":"text"},{"name":"Region","type":"text"},{"name":"SurfaceArea","type":"number"},{"name":"IndepYear","type":"number"},{"name":"Population","type":"number"},{"name":"LifeExpectancy","type":"number"},{"name":"GNP","type":"number"},{"name":"GNPOld","type":"number"},{"name":"LocalName","type":"text"},{"name":"GovernmentForm","type":"text"},{"name":"HeadOfState","type":"text"},{"name":"Capital","type":"number"},{"name":"Code2","type":"text"}]},
        {"name":"countrylanguage","columns":[{"name":"CountryCode","type":"text"},{"name":"Language","type":"text"},{"name":"IsOfficial","type":"text"},{"name":"Percentage","type":"number"}]}],
        "primary_keys":[["city","id"],["country","code"]],
        "foreign_keys":[["city","countrycode","country","code"],["countrylanguage","countrycode","country","code"]]}]}"#;

    pub fn world() -> DatabaseSchema {
        SchemaCatalog::from_json(WORLD_CATALOG)
            .unwrap()
            .get("world")
            .unwrap()
            .clone()
    }
}
