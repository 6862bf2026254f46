//! Synthetic fixture and `dcg` binary helpers shared by the CLI test targets.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use dcg_core::catalog::{sqlite_path, write_dataset, Sample};
use dcg_core::pruner::write_scores;
use dcg_core::synth::{gold_scores, planted_usefulness, populate_sqlite, SynthCorpus};

pub struct Fixture {
    _dir: tempfile::TempDir,
    pub root: PathBuf,
}

impl Fixture {
    pub fn p(&self, name: &str) -> String {
        self.root.join(name).to_string_lossy().into_owned()
    }
}

/// 12 databases x 10 skeletons. The test set takes databases 0 and 1 (two samples per
/// skeleton); the pool holds the other 100 samples plus a gold twin of every test sample.
pub fn build_fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let corpus = SynthCorpus::generate(12, 11, "e2e");
    let w = |name: &str, text: &str| std::fs::write(root.join(name), text).unwrap();
    w("catalog.json", &corpus.catalog.to_json());

    let mut test = Vec::new();
    let mut pool = Vec::new();
    let mut pool_skeletons = Vec::new();
    for (s, &k) in corpus.samples.iter().zip(&corpus.skeletons) {
        if s.id.starts_with("e2e-00-") || s.id.starts_with("e2e-01-") {
            test.push(s.clone());
            pool.push(Sample {
                id: format!("twin-{}", s.id),
                ..s.clone()
            });
        } else {
            pool.push(s.clone());
        }
        pool_skeletons.push(k);
    }
    assert_eq!(test.len(), 20);
    w("test.jsonl", &write_dataset(&test));
    w("pool.jsonl", &write_dataset(&pool));

    let db_of = |s: &Sample| corpus.catalog.get(&s.db_id).unwrap();
    for (name, set) in [("test", &test), ("pool", &pool)] {
        let raw: Vec<_> = set.iter().map(|s| gold_scores(s, db_of(s)).unwrap()).collect();
        w(&format!("{name}_raw_scores.jsonl"), &write_scores(&raw));
    }

    let pool_corpus = SynthCorpus {
        catalog: corpus.catalog.clone(),
        samples: pool,
        skeletons: pool_skeletons,
    };
    w("usefulness.jsonl", &planted_usefulness(&pool_corpus, 3).to_jsonl());

    for db in corpus.catalog.databases() {
        populate_sqlite(db, &sqlite_path(&root.join("dbs"), &db.db_id), 30, 5).unwrap();
    }
    Fixture { _dir: dir, root }
}

pub fn dcg(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_dcg")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

pub fn ok(args: &[&str]) -> String {
    let (code, stdout, stderr) = dcg(args);
    assert_eq!(code, 0, "dcg {args:?} failed:\n{stderr}");
    stdout
}

pub fn report(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Runs every stage up to `retrieve` and returns the fixture.
pub fn pipeline_through_retrieval() -> Fixture {
    let f = build_fixture();
    let (cat, dbs) = (f.p("catalog.json"), f.p("dbs"));
    for set in ["test", "pool"] {
        let data = f.p(&format!("{set}.jsonl"));
        ok(&["ingest", "--catalog", &cat, "--data", &data, "--db-root", &dbs]);
        let scores = f.p(&format!("{set}_scores.jsonl"));
        ok(&[
            "score",
            "--catalog",
            &cat,
            "--data",
            &data,
            "--from",
            &f.p(&format!("{set}_raw_scores.jsonl")),
            "--out",
            &scores,
        ]);
        let graphs = f.p(&format!("{set}_graphs.jsonl"));
        ok(&[
            "build-graphs",
            "--catalog",
            &cat,
            "--data",
            &data,
            "--scores",
            &scores,
            "--db-root",
            &dbs,
            "--out",
            &graphs,
        ]);
    }
    ok(&[
        "rank",
        "--catalog",
        &cat,
        "--data",
        &f.p("pool.jsonl"),
        "--graphs",
        &f.p("pool_graphs.jsonl"),
        "--provider",
        "file",
        "--usefulness",
        &f.p("usefulness.jsonl"),
        "--out",
        &f.p("sets.jsonl"),
    ]);
    let conf = f.p("train.conf");
    std::fs::write(&conf, "epochs = 2\nbatch = 32\nseed = 7\n").unwrap();
    ok(&[
        "train-retriever",
        "--config",
        &conf,
        "--graphs",
        &f.p("pool_graphs.jsonl"),
        "--sets",
        &f.p("sets.jsonl"),
        "--out",
        &f.p("encoder.ckpt"),
    ]);
    ok(&[
        "index",
        "--graphs",
        &f.p("pool_graphs.jsonl"),
        "--encoder",
        &f.p("encoder.ckpt"),
        "--out",
        &f.p("index.jsonl"),
    ]);
    ok(&[
        "retrieve",
        "--index",
        &f.p("index.jsonl"),
        "--encoder",
        &f.p("encoder.ckpt"),
        "--graphs",
        &f.p("test_graphs.jsonl"),
        "--out",
        &f.p("demos.jsonl"),
    ]);
    f
}
