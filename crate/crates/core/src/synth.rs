//! Seeded synthetic databases and questions with known SQL skeletons.
//!
//! Every database has three tables: a parent and two children holding a foreign key to
//! it. Each of ten question templates fixes one SQL skeleton; slots are filled with the
//! database's own table and column names, so samples sharing a skeleton differ in
//! vocabulary while samples sharing a database differ in structure.

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::catalog::{
    lemmatize, name_words, tokenize_question, ColumnDef, ColumnId, DatabaseSchema, ForeignKey, Sample, SchemaCatalog,
    TableDef, ValueType,
};
use crate::error::Result;
use crate::pruner::{derive_relevance_labels, ItemScore, RelevanceScores, SchemaItem};
use crate::retriever::FileBacked;

const ENTITIES: &[&str] = &[
    "singer",
    "concert",
    "stadium",
    "student",
    "course",
    "teacher",
    "employee",
    "department",
    "project",
    "airport",
    "flight",
    "airline",
    "book",
    "author",
    "publisher",
    "movie",
    "director",
    "actor",
    "ship",
    "captain",
    "car",
    "maker",
    "team",
    "player",
    "game",
    "hospital",
    "doctor",
    "patient",
    "store",
    "product",
    "customer",
    "school",
    "club",
    "member",
    "museum",
    "visitor",
    "artist",
    "album",
    "track",
    "station",
    "train",
    "hotel",
    "guest",
    "event",
    "venue",
    "restaurant",
    "chef",
    "farm",
    "festival",
    "editor",
    "journal",
    "market",
    "painting",
    "gallery",
    "mountain",
    "river",
    "island",
    "park",
    "bank",
    "loan",
    "account",
    "vendor",
    "supplier",
    "warehouse",
    "shipment",
    "pilot",
    "truck",
    "driver",
    "race",
    "circuit",
];

const TEXT_ATTRS: &[&str] = &[
    "name",
    "title",
    "city",
    "country",
    "genre",
    "color",
    "status",
    "category",
    "nationality",
    "brand",
    "region",
    "language",
];

const NUMBER_ATTRS: &[&str] = &[
    "age",
    "price",
    "salary",
    "capacity",
    "rating",
    "year",
    "height",
    "weight",
    "budget",
    "population",
    "score",
    "duration",
    "size",
    "rank",
];

pub const SKELETONS: usize = 10;

/// Slot fillers for one question.
struct Slots<'a> {
    t: &'a str,
    c: &'a str,
    n: &'a str,
    v: u32,
    v2: u32,
    parent: &'a str,
    pc: &'a str,
}

fn render(skeleton: usize, variant: usize, s: &Slots) -> (String, String) {
    let Slots {
        t,
        c,
        n,
        v,
        v2,
        parent,
        pc,
    } = *s;
    let q = |opts: &[String]| opts[variant % opts.len()].clone();
    match skeleton {
        0 => (
            q(&[
                format!("How many {t}s are there?"),
                format!("Count the number of {t}s."),
                format!("What is the total number of {t}s?"),
                format!("Tell me how many {t} records exist."),
            ]),
            format!("SELECT count(*) FROM {t}"),
        ),
        1 => (
            q(&[
                format!("List the {c} of all {t}s."),
                format!("Show every {t} {c}."),
                format!("What are the {c}s of the {t}s?"),
                format!("Give me each {c} in the {t} table."),
            ]),
            format!("SELECT {c} FROM {t}"),
        ),
        2 => (
            q(&[
                format!("Show the {c} of {t}s whose {n} is above {v}."),
                format!("Which {t}s have {n} greater than {v}? Give their {c}."),
                format!("Return {c} for any {t} with more than {v} {n}."),
                format!("Find {t} {c}s where the {n} exceeds {v}."),
            ]),
            format!("SELECT {c} FROM {t} WHERE {n} > {v}"),
        ),
        3 => (
            q(&[
                format!("What is the average {n} of all {t}s?"),
                format!("Find the mean {n} across {t}s."),
                format!("Compute the typical {n} of a {t}."),
                format!("On average, what {n} does a {t} have?"),
            ]),
            format!("SELECT avg({n}) FROM {t}"),
        ),
        4 => (
            q(&[
                format!("List the {c} of {t}s sorted by {n} in descending order."),
                format!("Show {t} {c}s from highest to lowest {n}."),
                format!("Order the {t}s by decreasing {n} and report the {c}."),
                format!("Give each {c}, with the {t} having bigger {n} first."),
            ]),
            format!("SELECT {c} FROM {t} ORDER BY {n} DESC"),
        ),
        5 => (
            q(&[
                format!("Show the {c} of each {t} together with the {pc} of its {parent}."),
                format!("For every {t}, what is the {pc} of the related {parent}? Also give the {t} {c}."),
                format!("Pair each {t} {c} with the {pc} of the {parent} it belongs to."),
                format!("Which {parent} {pc} goes with each {t}? Include the {c}."),
            ]),
            format!("SELECT T1.{c} , T2.{pc} FROM {t} AS T1 JOIN {parent} AS T2 ON T1.{parent}_id = T2.id"),
        ),
        6 => (
            q(&[
                format!("For each {c}, how many {t}s are there?"),
                format!("Count the {t}s in each {c}."),
                format!("Group {t}s by {c} and give the size of every group."),
                format!("What is the number of {t} rows per {c}?"),
            ]),
            format!("SELECT {c} , count(*) FROM {t} GROUP BY {c}"),
        ),
        7 => (
            q(&[
                format!("Which {t}s have a {n} higher than the average? List their {c}."),
                format!("Find the {c} of {t}s whose {n} exceeds the mean {n}."),
                format!("Show {c} for {t}s that are above average in {n}."),
                format!("Return the {c} of every {t} beating the overall average {n}."),
            ]),
            format!("SELECT {c} FROM {t} WHERE {n} > (SELECT avg({n}) FROM {t})"),
        ),
        8 => (
            q(&[
                format!("Which {c} values have both {t}s with {n} above {v} and {t}s with {n} below {v2}?"),
                format!("Find the {c} shared by {t}s whose {n} exceeds {v} and {t}s whose {n} is under {v2}."),
                format!("Give any {c} that appears among {t}s over {v} {n} as well as among those under {v2}."),
                format!("What {c} occurs for a {t} with {n} more than {v} and also for one with {n} less than {v2}?"),
            ]),
            format!("SELECT {c} FROM {t} WHERE {n} > {v} INTERSECT SELECT {c} FROM {t} WHERE {n} < {v2}"),
        ),
        _ => (
            q(&[
                format!("What is the {c} of the {t} with the largest {n}?"),
                format!("Find the {t} {c} with the highest {n}."),
                format!("Which {t} has the top {n}? Report its {c}."),
                format!("Give the {c} of whichever {t} is biggest in {n}."),
            ]),
            format!("SELECT {c} FROM {t} ORDER BY {n} DESC LIMIT 1"),
        ),
    }
}

fn make_database(rng: &mut ChaCha8Rng, db_id: String, entities: [&str; 3]) -> DatabaseSchema {
    let [parent, ..] = entities;
    let mut tables = Vec::new();
    let mut primary_keys = Vec::new();
    let mut foreign_keys = Vec::new();
    for (i, &t) in entities.iter().enumerate() {
        let mut columns = vec![ColumnDef {
            name: "id".into(),
            value_type: ValueType::Number,
        }];
        for &a in TEXT_ATTRS.choose_multiple(rng, 2) {
            columns.push(ColumnDef {
                name: a.into(),
                value_type: ValueType::Text,
            });
        }
        for &a in NUMBER_ATTRS.choose_multiple(rng, 2) {
            columns.push(ColumnDef {
                name: a.into(),
                value_type: ValueType::Number,
            });
        }
        if i > 0 {
            let fk = format!("{parent}_id");
            columns.push(ColumnDef {
                name: fk.clone(),
                value_type: ValueType::Number,
            });
            foreign_keys.push(ForeignKey {
                from: ColumnId::new(t, fk),
                to: ColumnId::new(parent, "id"),
            });
        }
        primary_keys.push(ColumnId::new(t, "id"));
        tables.push(TableDef {
            name: t.into(),
            columns,
        });
    }
    DatabaseSchema {
        db_id,
        tables,
        primary_keys,
        foreign_keys,
    }
}

fn columns_of(t: &TableDef, ty: ValueType) -> Vec<&str> {
    t.columns
        .iter()
        .filter(|c| c.value_type == ty && c.name != "id" && !c.name.ends_with("_id"))
        .map(|c| c.name.as_str())
        .collect()
}

fn make_sample(rng: &mut ChaCha8Rng, id: String, db: &DatabaseSchema, skeleton: usize) -> Sample {
    // Skeleton 5 needs a child table; others may use any table.
    let ti = if skeleton == 5 {
        rng.random_range(1..3)
    } else {
        rng.random_range(0..3)
    };
    let t = &db.tables[ti];
    let parent = &db.tables[0];
    let texts = columns_of(t, ValueType::Text);
    let numbers = columns_of(t, ValueType::Number);
    let slots = Slots {
        t: &t.name,
        c: texts.choose(rng).expect("text column"),
        n: numbers.choose(rng).expect("number column"),
        v: rng.random_range(2..10) * 10,
        v2: rng.random_range(11..20) * 10,
        parent: &parent.name,
        pc: columns_of(parent, ValueType::Text).choose(rng).expect("text column"),
    };
    let (question, sql) = render(skeleton, rng.random_range(0..4), &slots);
    Sample {
        id,
        db_id: db.db_id.clone(),
        question,
        gold_sql: Some(sql),
    }
}

/// Samples with the skeleton each was generated from.
#[derive(Clone, Debug)]
pub struct SynthCorpus {
    pub catalog: SchemaCatalog,
    pub samples: Vec<Sample>,
    pub skeletons: Vec<usize>,
}

impl SynthCorpus {
    /// One sample per (database, skeleton) pair, `databases × 10` in total.
    pub fn generate(databases: usize, seed: u64, prefix: &str) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dbs = Vec::with_capacity(databases);
        let mut samples = Vec::new();
        let mut skeletons = Vec::new();
        for d in 0..databases {
            let picks: Vec<&str> = ENTITIES.choose_multiple(&mut rng, 3).copied().collect();
            let db = make_database(&mut rng, format!("{prefix}_db{d:02}"), [picks[0], picks[1], picks[2]]);
            for k in 0..SKELETONS {
                samples.push(make_sample(&mut rng, format!("{prefix}-{d:02}-{k}"), &db, k));
                skeletons.push(k);
            }
            dbs.push(db);
        }
        SynthCorpus {
            catalog: SchemaCatalog::from_databases(dbs).expect("generated databases are valid"),
            samples,
            skeletons,
        }
    }

    /// Seeded shuffle split: the first `train_fraction` of indices train, the rest are held out.
    pub fn split(&self, train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
        let mut idx: Vec<usize> = (0..self.samples.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let cut = (self.samples.len() as f64 * train_fraction).round() as usize;
        let held = idx.split_off(cut);
        (idx, held)
    }

    pub fn db(&self, sample: &Sample) -> &DatabaseSchema {
        self.catalog
            .get(&sample.db_id)
            .expect("generated sample has a database")
    }
}

/// The 200-sample pruner corpus: 20 databases, seed 7.
pub fn pruner_corpus() -> SynthCorpus {
    SynthCorpus::generate(20, 7, "prune")
}

/// The 500-sample retrieval pool: 50 databases, seed 7.
pub fn retrieval_pool() -> SynthCorpus {
    SynthCorpus::generate(50, 7, "pool")
}

/// Usefulness with planted positives: `0.9 + 0.05u` for a shared skeleton, `0.1u`
/// otherwise, `u` uniform in `[0, 1)` from a seeded generator.
pub fn planted_usefulness(corpus: &SynthCorpus, seed: u64) -> FileBacked {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fb = FileBacked::default();
    for (i, a) in corpus.samples.iter().enumerate() {
        for (j, c) in corpus.samples.iter().enumerate() {
            if i == j {
                continue;
            }
            let u: f64 = rng.random();
            let s = if corpus.skeletons[i] == corpus.skeletons[j] {
                0.9 + 0.05 * u
            } else {
                0.1 * u
            };
            fb.insert(&a.id, &c.id, s);
        }
    }
    fb
}

/// Relevance scores a perfect pruner would emit: probability 0.95 for items the gold
/// SQL uses and 0.05 otherwise; attention 1 on tokens whose lemma is one of the item's
/// name words (lemmatized), 0 elsewhere.
pub fn gold_scores(sample: &Sample, db: &DatabaseSchema) -> Result<RelevanceScores> {
    let tokens = tokenize_question(&sample.question)?;
    let labels = derive_relevance_labels(sample.gold()?, db)?;
    let attention = |name: &str| -> Vec<f64> {
        let words: BTreeSet<String> = name_words(name).iter().map(|w| lemmatize(w)).collect();
        tokens
            .tokens
            .iter()
            .map(|t| if words.contains(&t.lemma) { 1.0 } else { 0.0 })
            .collect()
    };
    let item = |rel: bool, name: &str| ItemScore {
        prob: if rel { 0.95 } else { 0.05 },
        attention: attention(name),
    };
    Ok(RelevanceScores {
        sample_id: sample.id.clone(),
        tables: db
            .tables
            .iter()
            .map(|t| {
                let rel = labels.contains(&SchemaItem::Table(t.name.clone()));
                (t.name.clone(), item(rel, &t.name))
            })
            .collect(),
        columns: db
            .column_ids()
            .map(|c| {
                let rel = labels.contains(&SchemaItem::Column(c.clone()));
                let s = item(rel, &c.column);
                (c, s)
            })
            .collect(),
    })
}

#[cfg(feature = "sqlite")]
const CELL_WORDS: &[&str] = &[
    "amber", "birch", "cedar", "delta", "ember", "fjord", "garnet", "harbor", "indigo", "juniper", "kestrel", "lumen",
];

/// Writes `db` as a SQLite file with `rows` seeded rows per table. Ids run from 1, foreign
/// keys point at existing parent ids, text cells come from a small word list, numbers
/// are integers in `0..200`.
#[cfg(feature = "sqlite")]
pub fn populate_sqlite(db: &DatabaseSchema, path: &std::path::Path, rows: usize, seed: u64) -> Result<()> {
    use crate::error::Error;

    let fail = |e: rusqlite::Error| Error::Execution(format!("{}: {e}", path.display()));
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut conn = rusqlite::Connection::open(path).map_err(fail)?;
    let tx = conn.transaction().map_err(fail)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in &db.tables {
        let cols: Vec<String> = t
            .columns
            .iter()
            .map(|c| {
                let ty = if c.value_type == ValueType::Number {
                    "INTEGER"
                } else {
                    "TEXT"
                };
                format!("\"{}\" {ty}", c.name)
            })
            .collect();
        tx.execute(&format!("DROP TABLE IF EXISTS \"{}\"", t.name), [])
            .map_err(fail)?;
        tx.execute(&format!("CREATE TABLE \"{}\" ({})", t.name, cols.join(", ")), [])
            .map_err(fail)?;
        let marks = vec!["?"; t.columns.len()].join(", ");
        let mut stmt = tx
            .prepare(&format!("INSERT INTO \"{}\" VALUES ({marks})", t.name))
            .map_err(fail)?;
        for r in 1..=rows {
            let cells: Vec<rusqlite::types::Value> = t
                .columns
                .iter()
                .map(|c| {
                    use rusqlite::types::Value;
                    if c.name == "id" {
                        Value::Integer(r as i64)
                    } else if c.name.ends_with("_id") {
                        Value::Integer(rng.random_range(1..=rows as i64))
                    } else if c.value_type == ValueType::Number {
                        Value::Integer(rng.random_range(0..200))
                    } else {
                        Value::Text(CELL_WORDS.choose(&mut rng).expect("word list").to_string())
                    }
                })
                .collect();
            stmt.execute(rusqlite::params_from_iter(cells)).map_err(fail)?;
        }
    }
    tx.commit().map_err(fail)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sqlkit::{categorize, parse_sql, QueryCategory};

    #[cfg(feature = "sqlite")]
    #[test]
    fn populated_database_answers_gold_queries() {
        let corpus = SynthCorpus::generate(1, 5, "pop");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pop.sqlite");
        let db = corpus.catalog.databases().next().unwrap();
        populate_sqlite(db, &path, 25, 1).unwrap();
        populate_sqlite(db, &path, 25, 1).unwrap();
        let conn = rusqlite::Connection::open(&path).unwrap();
        for s in &corpus.samples {
            let mut stmt = conn.prepare(s.gold_sql.as_deref().unwrap()).unwrap();
            let mut rows = stmt.query([]).unwrap();
            rows.next().unwrap();
        }
        let n: i64 = conn
            .query_row(&format!("SELECT count(*) FROM {}", db.tables[0].name), [], |r| r.get(0))
            .unwrap();
        assert_eq!(n, 25);
    }

    #[test]
    fn deterministic_and_parsable() {
        let a = pruner_corpus();
        let b = pruner_corpus();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.samples.len(), 200);
        for s in &a.samples {
            let db = a.db(s);
            parse_sql(s.gold().unwrap(), Some(db)).unwrap();
            let scores = gold_scores(s, db).unwrap();
            scores
                .validate(db, tokenize_question(&s.question).unwrap().len())
                .unwrap();
        }
    }

    #[test]
    fn skeleton_categories() {
        let c = SynthCorpus::generate(1, 3, "x");
        let cat = |k: usize| categorize(&parse_sql(c.samples[k].gold().unwrap(), None).unwrap().root);
        assert_eq!(cat(0), QueryCategory::Simple);
        assert_eq!(cat(5), QueryCategory::Join);
        assert_eq!(cat(7), QueryCategory::Nested);
        assert_eq!(cat(8), QueryCategory::Iuen);
    }

    #[test]
    fn planted_scores_separate_skeletons() {
        let c = SynthCorpus::generate(3, 1, "x");
        let fb = planted_usefulness(&c, 2);
        assert_eq!(fb.len(), 30 * 29);
        assert!(fb.get("x-00-1", "x-02-1").unwrap() >= 0.9);
        assert!(fb.get("x-00-1", "x-00-2").unwrap() < 0.1);
    }

    #[test]
    fn split_partitions() {
        let c = pruner_corpus();
        let (train, held) = c.split(0.8, 7);
        assert_eq!((train.len(), held.len()), (160, 40));
        let all: BTreeSet<usize> = train.iter().chain(&held).copied().collect();
        assert_eq!(all.len(), 200);
    }
}
