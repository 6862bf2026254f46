//! Schema-item relevance: input layout for the cross-encoder, training labels
//! read off gold SQL, the pruning rule, and the scores file format.

mod model;

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::catalog::{
    lemmatize, name_words, tokenize_question, ColumnId, DatabaseSchema, PrunedSchema, Sample, SchemaCatalog, TableDef,
    TokenSeq,
};
use crate::error::{Error, Result};
use crate::sqlkit::{parse_sql, Expr};

pub use model::{
    evaluate_pruner, mean_loss, train_pruner, CrossEncoder, CrossEncoderConfig, CrossEncoderParams, Prf, PrunerExample,
    PrunerMetrics, PrunerTrainConfig, PrunerTrainReport, Vocab, UNK,
};

/// Decision threshold used when none is configured.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SchemaItem {
    Table(String),
    Column(ColumnId),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InputUnit {
    Question { index: usize },
    TableMarker { table: String },
    ColumnMarker { column: ColumnId },
    NameWord { word: String, owner: SchemaItem },
}

/// The flattened cross-encoder input: question tokens, then per table a marker and
/// its name words followed by a marker and name words for each of its columns.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrunerInput {
    pub question: Vec<String>,
    pub units: Vec<InputUnit>,
}

impl PrunerInput {
    pub fn question_len(&self) -> usize {
        self.question.len()
    }

    /// Marker positions with the item each one stands for, in input order.
    pub fn markers(&self) -> Vec<(usize, SchemaItem)> {
        self.units
            .iter()
            .enumerate()
            .filter_map(|(i, u)| match u {
                InputUnit::TableMarker { table } => Some((i, SchemaItem::Table(table.clone()))),
                InputUnit::ColumnMarker { column } => Some((i, SchemaItem::Column(column.clone()))),
                _ => None,
            })
            .collect()
    }

    /// Lexical overlap per unit: 1 for a question token whose lemma is a schema name
    /// word, and for a marker or name word whose lemma occurs in the question; 2 for a
    /// matched column marker whose table is matched too; 0 otherwise.
    pub fn match_levels(&self) -> Vec<usize> {
        let question: BTreeSet<String> = self.question.iter().map(|w| lemmatize(w)).collect();
        let mut schema = BTreeSet::new();
        let mut matched: HashMap<&SchemaItem, bool> = HashMap::new();
        for u in &self.units {
            if let InputUnit::NameWord { word, owner } = u {
                let lemma = lemmatize(word);
                *matched.entry(owner).or_default() |= question.contains(&lemma);
                schema.insert(lemma);
            }
        }
        let is = |item: SchemaItem| matched.get(&item).copied().unwrap_or(false);
        self.units
            .iter()
            .map(|u| match u {
                InputUnit::Question { index } => usize::from(schema.contains(&lemmatize(&self.question[*index]))),
                InputUnit::NameWord { word, .. } => usize::from(question.contains(&lemmatize(word))),
                InputUnit::TableMarker { table } => usize::from(is(SchemaItem::Table(table.clone()))),
                InputUnit::ColumnMarker { column } => {
                    match (
                        is(SchemaItem::Column(column.clone())),
                        is(SchemaItem::Table(column.table.clone())),
                    ) {
                        (false, _) => 0,
                        (true, false) => 1,
                        (true, true) => 2,
                    }
                }
            })
            .collect()
    }
}

pub fn build_input_sequence(tokens: &TokenSeq, db: &DatabaseSchema) -> PrunerInput {
    let mut units: Vec<InputUnit> = (0..tokens.len()).map(|index| InputUnit::Question { index }).collect();
    for t in &db.tables {
        units.push(InputUnit::TableMarker { table: t.name.clone() });
        let owner = SchemaItem::Table(t.name.clone());
        units.extend(name_words(&t.name).into_iter().map(|word| InputUnit::NameWord {
            word,
            owner: owner.clone(),
        }));
        for c in &t.columns {
            let column = ColumnId::new(t.name.clone(), c.name.clone());
            units.push(InputUnit::ColumnMarker { column: column.clone() });
            let owner = SchemaItem::Column(column);
            units.extend(name_words(&c.name).into_iter().map(|word| InputUnit::NameWord {
                word,
                owner: owner.clone(),
            }));
        }
    }
    PrunerInput {
        question: tokens.surfaces().iter().map(|s| s.to_string()).collect(),
        units,
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelevanceLabels {
    pub positive_tables: BTreeSet<String>,
    pub positive_columns: BTreeSet<ColumnId>,
}

impl RelevanceLabels {
    pub fn contains(&self, item: &SchemaItem) -> bool {
        match item {
            SchemaItem::Table(t) => self.positive_tables.contains(t),
            SchemaItem::Column(c) => self.positive_columns.contains(c),
        }
    }
}

/// Tables in any FROM clause and columns referenced anywhere in the gold query.
/// `*` contributes its tables only.
pub fn derive_relevance_labels(gold_sql: &str, db: &DatabaseSchema) -> Result<RelevanceLabels> {
    let ast = parse_sql(gold_sql, Some(db))?;
    let mut labels = RelevanceLabels::default();
    for q in ast.root.all_queries() {
        labels
            .positive_tables
            .extend(q.base_tables().into_iter().map(str::to_string));
        for e in q.clause_exprs() {
            e.walk(&mut |x| {
                if let Expr::Column(c) = x {
                    if let Some(id) = &c.resolved {
                        labels.positive_columns.insert(id.clone());
                    }
                }
            });
        }
    }
    Ok(labels)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemScore {
    pub prob: f64,
    /// One weight per question token, maximum 1.
    pub attention: Vec<f64>,
}

/// Relevance probability and question-token attention for every schema item of one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct RelevanceScores {
    pub sample_id: String,
    pub tables: IndexMap<String, ItemScore>,
    pub columns: IndexMap<ColumnId, ItemScore>,
}

impl RelevanceScores {
    pub fn get(&self, item: &SchemaItem) -> Option<&ItemScore> {
        match item {
            SchemaItem::Table(t) => self.tables.get(t),
            SchemaItem::Column(c) => self.columns.get(c),
        }
    }

    /// Checks coverage of `db`, attention lengths and value ranges.
    pub fn validate(&self, db: &DatabaseSchema, token_count: usize) -> Result<()> {
        let id = &self.sample_id;
        let bad = |msg: String| Err(Error::invalid(format!("scores for sample `{id}`: {msg}")));
        for t in &db.tables {
            if !self.tables.contains_key(&t.name) {
                return bad(format!("missing table `{}`", t.name));
            }
        }
        for c in db.column_ids() {
            if !self.columns.contains_key(&c) {
                return bad(format!("missing column `{c}`"));
            }
        }
        if self.tables.len() != db.tables.len() {
            return bad("unknown table".into());
        }
        if self.columns.len() != db.column_count() {
            return bad("unknown column".into());
        }
        let items = self
            .tables
            .iter()
            .map(|(t, s)| (t.clone(), s))
            .chain(self.columns.iter().map(|(c, s)| (c.to_string(), s)));
        for (name, s) in items {
            if !(0.0..=1.0).contains(&s.prob) {
                return bad(format!("probability {} of `{name}` outside [0, 1]", s.prob));
            }
            if s.attention.len() != token_count {
                return bad(format!(
                    "attention of `{name}` has {} entries for {token_count} question tokens",
                    s.attention.len()
                ));
            }
            if s.attention.iter().any(|a| !(0.0..=1.0).contains(a)) {
                return bad(format!("attention of `{name}` outside [0, 1]"));
            }
        }
        Ok(())
    }
}

/// Keeps tables and, within kept tables, columns whose probability strictly exceeds
/// the threshold. When no table passes, the most probable table and its three most
/// probable columns are kept instead. Keys survive only between kept columns.
pub fn prune(scores: &RelevanceScores, db: &DatabaseSchema, threshold: f64) -> PrunedSchema {
    let prob = |item: SchemaItem| scores.get(&item).map_or(0.0, |s| s.prob);
    let mut tables: Vec<TableDef> = db
        .tables
        .iter()
        .filter(|t| prob(SchemaItem::Table(t.name.clone())) > threshold)
        .map(|t| TableDef {
            name: t.name.clone(),
            columns: t
                .columns
                .iter()
                .filter(|c| prob(SchemaItem::Column(ColumnId::new(t.name.clone(), c.name.clone()))) > threshold)
                .cloned()
                .collect(),
        })
        .collect();
    if tables.is_empty() {
        if let Some(best) = db
            .tables
            .iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| {
                prob(SchemaItem::Table(a.name.clone()))
                    .total_cmp(&prob(SchemaItem::Table(b.name.clone())))
                    .then(ib.cmp(ia))
            })
            .map(|(_, t)| t)
        {
            let col_prob = |name: &str| prob(SchemaItem::Column(ColumnId::new(best.name.clone(), name)));
            let mut ranked: Vec<usize> = (0..best.columns.len()).collect();
            ranked.sort_by(|&a, &b| {
                col_prob(&best.columns[b].name)
                    .total_cmp(&col_prob(&best.columns[a].name))
                    .then(a.cmp(&b))
            });
            ranked.truncate(3);
            ranked.sort_unstable();
            tables.push(TableDef {
                name: best.name.clone(),
                columns: ranked.into_iter().map(|i| best.columns[i].clone()).collect(),
            });
        }
    }
    let mut pruned = DatabaseSchema {
        db_id: db.db_id.clone(),
        tables,
        primary_keys: Vec::new(),
        foreign_keys: Vec::new(),
    };
    pruned.primary_keys = db
        .primary_keys
        .iter()
        .filter(|pk| pruned.has_column(pk))
        .cloned()
        .collect();
    pruned.foreign_keys = db
        .foreign_keys
        .iter()
        .filter(|fk| pruned.has_column(&fk.from) && pruned.has_column(&fk.to))
        .cloned()
        .collect();
    pruned
}

#[derive(Serialize, Deserialize)]
struct TableLine {
    name: String,
    prob: f64,
    attention: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ColumnLine {
    table: String,
    name: String,
    prob: f64,
    attention: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ScoresLine {
    sample_id: String,
    tables: Vec<TableLine>,
    columns: Vec<ColumnLine>,
}

/// Parses scores JSONL and validates each line against its sample's question and database.
pub fn parse_scores(text: &str, samples: &[Sample], catalog: &SchemaCatalog) -> Result<Vec<RelevanceScores>> {
    let by_id: HashMap<&str, &Sample> = samples.iter().map(|s| (s.id.as_str(), s)).collect();
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: ScoresLine =
            serde_json::from_str(line).map_err(|e| Error::json(format!("scores line {}", lineno + 1), e))?;
        let sample = by_id.get(rec.sample_id.as_str()).ok_or_else(|| {
            Error::invalid(format!(
                "scores line {}: unknown sample `{}`",
                lineno + 1,
                rec.sample_id
            ))
        })?;
        let mut scores = RelevanceScores {
            sample_id: rec.sample_id.clone(),
            tables: IndexMap::new(),
            columns: IndexMap::new(),
        };
        for t in rec.tables {
            let name = t.name.to_lowercase();
            let dup = scores.tables.insert(
                name.clone(),
                ItemScore {
                    prob: t.prob,
                    attention: t.attention,
                },
            );
            if dup.is_some() {
                return Err(Error::invalid(format!(
                    "scores for sample `{}`: table `{name}` listed twice",
                    rec.sample_id
                )));
            }
        }
        for c in rec.columns {
            let id = ColumnId::new(c.table.to_lowercase(), c.name.to_lowercase());
            let dup = scores.columns.insert(
                id.clone(),
                ItemScore {
                    prob: c.prob,
                    attention: c.attention,
                },
            );
            if dup.is_some() {
                return Err(Error::invalid(format!(
                    "scores for sample `{}`: column `{id}` listed twice",
                    rec.sample_id
                )));
            }
        }
        let db = catalog.require(&sample.db_id)?;
        let tokens = tokenize_question(&sample.question)?;
        scores.validate(db, tokens.len())?;
        out.push(scores);
    }
    Ok(out)
}

pub fn load_scores_file(
    path: impl AsRef<Path>,
    samples: &[Sample],
    catalog: &SchemaCatalog,
) -> Result<Vec<RelevanceScores>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scores(&text, samples, catalog)
}

pub fn write_scores(scores: &[RelevanceScores]) -> String {
    let mut out = String::new();
    for s in scores {
        let line = ScoresLine {
            sample_id: s.sample_id.clone(),
            tables: s
                .tables
                .iter()
                .map(|(name, v)| TableLine {
                    name: name.clone(),
                    prob: v.prob,
                    attention: v.attention.clone(),
                })
                .collect(),
            columns: s
                .columns
                .iter()
                .map(|(id, v)| ColumnLine {
                    table: id.table.clone(),
                    name: id.column.clone(),
                    prob: v.prob,
                    attention: v.attention.clone(),
                })
                .collect(),
        };
        out.push_str(&serde_json::to_string(&line).expect("scores serialize"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::fixtures::world;

    fn head_db() -> DatabaseSchema {
        let cat = SchemaCatalog::from_json(
            r#"{"databases":[{"db_id":"dept","tables":[
              {"name":"head","columns":[{"name":"head_id","type":"number"},{"name":"name","type":"text"},{"name":"age","type":"number"}]},
              {"name":"department","columns":[{"name":"id","type":"number"},{"name":"budget","type":"number"}]}]}]}"#,
        )
        .unwrap();
        cat.get("dept").unwrap().clone()
    }

    fn uniform_scores(db: &DatabaseSchema, n: usize, prob: f64) -> RelevanceScores {
        let item = || ItemScore {
            prob,
            attention: vec![1.0; n],
        };
        RelevanceScores {
            sample_id: "s".into(),
            tables: db.tables.iter().map(|t| (t.name.clone(), item())).collect(),
            columns: db.column_ids().map(|c| (c, item())).collect(),
        }
    }

    #[test]
    fn input_layout_over_world() {
        let tokens = tokenize_question("Which regions speak Dutch or English?").unwrap();
        let input = build_input_sequence(&tokens, &world());
        let markers = input.markers();
        assert_eq!(markers.len(), 4 + 26);
        assert!(input.units[..6].iter().all(|u| matches!(u, InputUnit::Question { .. })));
        assert_eq!(input.units[6], InputUnit::TableMarker { table: "city".into() });
    }

    #[test]
    fn match_levels_mark_overlap() {
        let tokens = tokenize_question("Which city has the largest population").unwrap();
        let input = build_input_sequence(&tokens, &world());
        let levels = input.match_levels();
        let at = |u: InputUnit| levels[input.units.iter().position(|x| *x == u).unwrap()];
        let marker = |t: &str, c: &str| InputUnit::ColumnMarker {
            column: ColumnId::new(t, c),
        };
        assert_eq!(at(InputUnit::Question { index: 0 }), 0);
        assert_eq!(at(InputUnit::Question { index: 1 }), 1);
        assert_eq!(at(InputUnit::TableMarker { table: "city".into() }), 1);
        assert_eq!(
            at(InputUnit::TableMarker {
                table: "country".into()
            }),
            0
        );
        assert_eq!(at(marker("city", "population")), 2);
        assert_eq!(at(marker("country", "population")), 1);
        assert_eq!(at(marker("city", "name")), 0);
        assert_eq!(levels.len(), input.units.len());
    }

    #[test]
    fn multi_word_names_expand() {
        let tokens = tokenize_question("how old").unwrap();
        let input = build_input_sequence(&tokens, &head_db());
        assert_eq!(
            input.units[2..6],
            [
                InputUnit::TableMarker { table: "head".into() },
                InputUnit::NameWord {
                    word: "head".into(),
                    owner: SchemaItem::Table("head".into())
                },
                InputUnit::ColumnMarker {
                    column: ColumnId::new("head", "head_id")
                },
                InputUnit::NameWord {
                    word: "head".into(),
                    owner: SchemaItem::Column(ColumnId::new("head", "head_id"))
                },
            ]
        );
    }

    #[test]
    fn labels_from_gold() {
        let db = head_db();
        let l = derive_relevance_labels("SELECT COUNT(*) FROM head WHERE age > 56", &db).unwrap();
        assert_eq!(l.positive_tables, BTreeSet::from(["head".to_string()]));
        assert_eq!(l.positive_columns, BTreeSet::from([ColumnId::new("head", "age")]));
        let l = derive_relevance_labels("SELECT * FROM department", &db).unwrap();
        assert!(l.positive_columns.is_empty());
        let l = derive_relevance_labels(
            "SELECT T1.name FROM head AS T1 JOIN department AS T2 ON T1.head_id = T2.id WHERE T2.budget > (SELECT avg(budget) FROM department)",
            &db,
        )
        .unwrap();
        assert_eq!(l.positive_tables.len(), 2);
        assert_eq!(l.positive_columns.len(), 4);
        assert!(derive_relevance_labels("SELECT salary FROM head", &db).is_err());
    }

    #[test]
    fn prune_keeps_strictly_exceeding() {
        let db = head_db();
        let mut s = uniform_scores(&db, 2, 0.1);
        s.tables["head"].prob = 0.9;
        s.columns[&ColumnId::new("head", "age")].prob = 0.8;
        s.columns[&ColumnId::new("head", "name")].prob = 0.5;
        let p = prune(&s, &db, 0.5);
        assert_eq!(p.tables.len(), 1);
        assert_eq!(p.tables[0].name, "head");
        assert_eq!(p.tables[0].columns.len(), 1);
        assert_eq!(p.tables[0].columns[0].name, "age");
        assert!(p.is_subschema_of(&db));
    }

    #[test]
    fn prune_fallback_when_nothing_passes() {
        let db = world();
        let s = uniform_scores(&db, 1, 0.0);
        let p = prune(&s, &db, 0.5);
        assert_eq!(p.tables.len(), 1);
        assert_eq!(p.tables[0].name, "city");
        let cols: Vec<&str> = p.tables[0].columns.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(cols, ["id", "name", "countrycode"]);
        assert_eq!(p.primary_keys, vec![ColumnId::new("city", "id")]);
        assert!(p.foreign_keys.is_empty());
    }

    #[test]
    fn scores_round_trip_and_validation() {
        let db = head_db();
        let catalog = SchemaCatalog::from_databases([db.clone()]).unwrap();
        let sample = Sample {
            id: "s".into(),
            db_id: "dept".into(),
            question: "how old".into(),
            gold_sql: None,
        };
        let scores = uniform_scores(&db, 2, 0.25);
        let text = write_scores(std::slice::from_ref(&scores));
        let back = parse_scores(&text, std::slice::from_ref(&sample), &catalog).unwrap();
        assert_eq!(back, vec![scores.clone()]);

        let short = write_scores(&[uniform_scores(&db, 1, 0.25)]);
        let err = parse_scores(&short, std::slice::from_ref(&sample), &catalog).unwrap_err();
        assert!(err.to_string().contains("`s`"), "{err}");

        let mut high = scores.clone();
        high.tables["head"].prob = 1.3;
        assert!(parse_scores(&write_scores(&[high]), std::slice::from_ref(&sample), &catalog).is_err());

        let mut missing = scores;
        missing.columns.shift_remove(&ColumnId::new("head", "age"));
        let err = parse_scores(&write_scores(&[missing]), &[sample], &catalog).unwrap_err();
        assert!(err.to_string().contains("head.age"));
    }
}
