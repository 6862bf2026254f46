//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits non-zero when a
//! criterion outside `KNOWN_GAPS` fails. Known gaps are measured and reported, never skipped.

mod common;

use std::collections::{BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use ndarray::{s, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dcg_core::catalog::{ColumnId, DatabaseSchema, Sample, SchemaCatalog, ValueMatches};
use dcg_core::encoder::{EncoderConfig, GraphEmbedding, GraphEncoder};
use dcg_core::linker::{attention_match_edges, link_sample, EdgeType, LinkConfig, NodeRef, SchemaLinkGraph};
use dcg_core::nn::{relative_error, Layer, Mat, Parameters, RelMatrix};
use dcg_core::promptkit::{assemble_prompt, render_cot_demo, DemoOrder};
use dcg_core::pruner::{
    parse_scores, train_pruner, write_scores, CrossEncoder, CrossEncoderConfig, ItemScore, PrunerExample,
    PrunerTrainConfig, RelevanceScores, Vocab,
};
use dcg_core::retriever::{
    build_index, contrastive_loss, retrieve_top_k, score_candidates, train_retriever, RetrievalIndex,
    RetrieverTrainConfig, ScoredCandidateSet,
};
use dcg_core::runner::exec::{ExecFailure, Executor, Verdict};
use dcg_core::runner::measure_retrieval_latency;
use dcg_core::sqlkit::{
    categorize, exact_set_match_with, parse_sql, tree_distance, LabeledTree, MatchOptions, QueryCategory,
};
use dcg_core::synth::{gold_scores, planted_usefulness, pruner_corpus, retrieval_pool, SynthCorpus};

/// Criteria measured to fail at desk scale; see the notes in the README.
const KNOWN_GAPS: [usize; 2] = [10, 11];

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn main() {
    let checks: [(usize, &str, fn() -> Check); 12] = [
        (1, "gradient correctness", gradients),
        (2, "zero-relation reduction", zero_relations),
        (3, "tree edit distance oracle", ted_oracle),
        (4, "exact-set-match oracle suite", em_suite),
        (5, "execution accuracy harness", ex_harness),
        (6, "categorizer fidelity", categorizer),
        (7, "prompt fixtures", prompt_fixtures),
        (8, "attention-match semantics", attention_semantics),
        (9, "scaled-down pruner", pruner_training),
        (10, "scaled-down retrieval", retrieval_training),
        (11, "end-to-end offline run", end_to_end),
        (12, "retrieval latency", latency),
    ];
    let mut unexpected = Vec::new();
    for (n, name, f) in checks {
        let start = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(format!("panic: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match out {
            Ok(detail) => println!("PASS criterion {n:>2} {name}: {detail} [{secs:.1} s]"),
            Err(detail) => {
                let note = if KNOWN_GAPS.contains(&n) { " (known gap)" } else { "" };
                println!("FAIL criterion {n:>2} {name}{note}: {detail} [{secs:.1} s]");
                if !KNOWN_GAPS.contains(&n) {
                    unexpected.push(n);
                }
            }
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------- 1

fn flat(m: &mut Mat) -> &mut [f64] {
    m.as_slice_memory_order_mut().expect("contiguous")
}

fn weighted_sum(y: &Mat, w: &Mat) -> f64 {
    (y * w).sum()
}

fn gradients() -> Check {
    let eps = 1e-5;
    let (d, heads, relations) = (16, 4, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let instances = 24;
    let start = Instant::now();
    for inst in 0..instances {
        let n = 2 + inst % 7;
        let layer = Layer::new(&mut rng, d, 32, heads, relations, 0.5);
        let x = Array2::from_shape_simple_fn((n, d), || rng.random_range(-1.0..1.0));
        let rel: RelMatrix = Array2::from_shape_simple_fn((n, n), || rng.random_range(0..relations));
        let w = Array2::from_shape_simple_fn((n, d), || rng.random_range(-1.0..1.0));
        let loss = |l: &Layer, x: &Mat| weighted_sum(&l.forward(x, Some(&rel), heads).0, &w);

        let (_, cache) = layer.forward(&x, Some(&rel), heads);
        let mut grad = layer.zeros_like();
        let dx = layer.backward(&w, &cache, Some(&rel), heads, &mut grad);

        for (t, analytic) in grad.tensors().into_iter().enumerate() {
            let mut numeric = Mat::zeros(analytic.raw_dim());
            for e in 0..analytic.len() {
                let mut plus = layer.clone();
                flat(plus.tensors_mut()[t])[e] += eps;
                let mut minus = layer.clone();
                flat(minus.tensors_mut()[t])[e] -= eps;
                flat(&mut numeric)[e] = (loss(&plus, &x) - loss(&minus, &x)) / (2.0 * eps);
            }
            let err = relative_error(analytic, &numeric);
            worst = worst.max(err);
            ensure(err < 1e-4, || {
                format!("instance {inst} (N={n}) tensor {t}: relative error {err:.2e}")
            })?;
        }
        let mut numeric = Mat::zeros(x.raw_dim());
        for e in 0..x.len() {
            let mut xp = x.clone();
            flat(&mut xp)[e] += eps;
            let mut xm = x.clone();
            flat(&mut xm)[e] -= eps;
            flat(&mut numeric)[e] = (loss(&layer, &xp) - loss(&layer, &xm)) / (2.0 * eps);
        }
        let err = relative_error(&dx, &numeric);
        worst = worst.max(err);
        ensure(err < 1e-4, || {
            format!("instance {inst} (N={n}) input: relative error {err:.2e}")
        })?;
    }

    for inst in 0..instances {
        let vec = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..d).map(|_| rng.random_range(-0.3..0.3)).collect() };
        let anchor = vec(&mut rng);
        let positives: Vec<Vec<f64>> = (0..1 + inst % 3).map(|_| vec(&mut rng)).collect();
        let negatives: Vec<Vec<f64>> = (0..2 + inst % 4).map(|_| vec(&mut rng)).collect();
        let t = 0.1;
        let l = contrastive_loss(&anchor, &positives, &negatives, t).map_err(|e| e.to_string())?;
        let f = |a: &[f64], p: &[Vec<f64>], n: &[Vec<f64>]| contrastive_loss(a, p, n, t).unwrap().loss;

        let numeric_anchor: Vec<f64> = (0..d)
            .map(|e| {
                let (mut ap, mut am) = (anchor.clone(), anchor.clone());
                ap[e] += eps;
                am[e] -= eps;
                (f(&ap, &positives, &negatives) - f(&am, &positives, &negatives)) / (2.0 * eps)
            })
            .collect();
        let mut pairs = vec![(l.d_anchor.clone(), numeric_anchor)];
        for i in 0..positives.len() {
            let num = (0..d)
                .map(|e| {
                    let (mut pp, mut pm) = (positives.clone(), positives.clone());
                    pp[i][e] += eps;
                    pm[i][e] -= eps;
                    (f(&anchor, &pp, &negatives) - f(&anchor, &pm, &negatives)) / (2.0 * eps)
                })
                .collect();
            pairs.push((l.d_positives[i].clone(), num));
        }
        for i in 0..negatives.len() {
            let num = (0..d)
                .map(|e| {
                    let (mut np, mut nm) = (negatives.clone(), negatives.clone());
                    np[i][e] += eps;
                    nm[i][e] -= eps;
                    (f(&anchor, &positives, &np) - f(&anchor, &positives, &nm)) / (2.0 * eps)
                })
                .collect();
            pairs.push((l.d_negatives[i].clone(), num));
        }
        for (a, n) in pairs {
            let a = Array2::from_shape_vec((1, d), a).unwrap();
            let n = Array2::from_shape_vec((1, d), n).unwrap();
            let err = relative_error(&a, &n);
            worst = worst.max(err);
            ensure(err < 1e-4, || {
                format!("contrastive instance {inst}: relative error {err:.2e}")
            })?;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 30.0, || format!("took {secs:.1} s"))?;
    Ok(format!(
        "{instances} attention-layer and {instances} contrastive instances, worst relative error {worst:.1e}"
    ))
}

// ---------------------------------------------------------------- 2

fn pool_graphs(corpus: &SynthCorpus) -> Vec<SchemaLinkGraph> {
    let cfg = LinkConfig::default();
    corpus
        .samples
        .iter()
        .map(|s| {
            let db = corpus.db(s);
            link_sample(s, db, &gold_scores(s, db).unwrap(), None, 0.5, &cfg).unwrap()
        })
        .collect()
}

fn layer_norm(x: &Mat, gain: &Mat, bias: &Mat) -> Mat {
    let d = x.ncols() as f64;
    let mut y = x.clone();
    for mut row in y.rows_mut() {
        let mean = row.sum() / d;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
        let inv = 1.0 / (var + 1e-5).sqrt();
        for (j, v) in row.iter_mut().enumerate() {
            *v = (*v - mean) * inv * gain[[0, j]] + bias[[0, j]];
        }
    }
    y
}

fn gelu(u: f64) -> f64 {
    0.5 * u * (1.0 + ((2.0 / std::f64::consts::PI).sqrt() * (u + 0.044715 * u.powi(3))).tanh())
}

/// Textbook post-norm transformer layer without relations.
fn plain_layer(l: &Layer, x: &Mat, heads: usize) -> Mat {
    let (n, d) = x.dim();
    let dh = d / heads;
    let (q, k, v) = (x.dot(&l.wq), x.dot(&l.wk), x.dot(&l.wv));
    let mut z = Mat::zeros((n, d));
    for h in 0..heads {
        let cols = s![.., h * dh..(h + 1) * dh];
        let (qh, kh, vh) = (q.slice(cols), k.slice(cols), v.slice(cols));
        for i in 0..n {
            let logits: Vec<f64> = (0..n).map(|j| qh.row(i).dot(&kh.row(j)) / (dh as f64).sqrt()).collect();
            let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = logits.iter().map(|a| (a - m).exp()).collect();
            let total: f64 = exps.iter().sum();
            for j in 0..n {
                for c in 0..dh {
                    z[[i, h * dh + c]] += exps[j] / total * vh[[j, c]];
                }
            }
        }
    }
    let h1 = layer_norm(&(x + &z.dot(&l.wo)), &l.ln1_gain, &l.ln1_bias);
    let f = (h1.dot(&l.w1) + l.b1.row(0)).mapv(gelu).dot(&l.w2) + l.b2.row(0);
    layer_norm(&(&h1 + &f), &l.ln2_gain, &l.ln2_bias)
}

fn zero_relations() -> Check {
    let corpus = SynthCorpus::generate(3, 2, "zr");
    let graphs = pool_graphs(&corpus);
    let mut enc =
        GraphEncoder::new(EncoderConfig::default(), GraphEncoder::vocab_for(&graphs)).map_err(|e| e.to_string())?;
    for l in &mut enc.params.stack.layers {
        l.rel_k.fill(0.0);
        l.rel_v.fill(0.0);
    }
    let heads = enc.params.stack.heads;
    let mut worst: f64 = 0.0;
    for g in &graphs {
        let graph_vec = enc.encode(g).map_err(|e| e.to_string())?.vector;
        let x = enc.initial_states(g);
        let mut h = x.clone();
        for l in &enc.params.stack.layers {
            h = plain_layer(l, &h, heads);
        }
        let plain = h.mean_axis(ndarray::Axis(0)).unwrap();
        let (lib_plain, _) = enc.params.stack.forward(&x, None).map_err(|e| e.to_string())?;
        let lib_plain = lib_plain.mean_axis(ndarray::Axis(0)).unwrap();
        for ((a, b), c) in graph_vec.iter().zip(&plain).zip(&lib_plain) {
            worst = worst.max((a - b).abs()).max((a - c).abs());
        }
    }
    ensure(worst < 1e-10, || format!("max abs diff {worst:.2e}"))?;
    Ok(format!("{} graphs, max abs diff {worst:.1e}", graphs.len()))
}

// ---------------------------------------------------------------- 3

#[derive(Clone)]
struct Tree {
    label: u8,
    children: Vec<Tree>,
}

/// Every ordered tree with `n` nodes over labels 0..3, by size.
fn all_trees(max: usize) -> Vec<Vec<Tree>> {
    let mut trees: Vec<Vec<Tree>> = vec![Vec::new(); max + 1];
    let mut forests: Vec<Vec<Vec<Tree>>> = vec![vec![Vec::new()]];
    for n in 1..=max {
        for label in 0..3 {
            for f in &forests[n - 1] {
                trees[n].push(Tree {
                    label,
                    children: f.clone(),
                });
            }
        }
        // forests of size n: first tree of size k, then a forest of size n-k
        let mut fs = Vec::new();
        for k in 1..=n {
            for t in &trees[k] {
                for rest in &forests[n - k] {
                    let mut f = vec![t.clone()];
                    f.extend(rest.iter().cloned());
                    fs.push(f);
                }
            }
        }
        forests.push(fs);
    }
    trees
}

fn to_labeled(t: &Tree) -> LabeledTree<u8> {
    LabeledTree::node(t.label, t.children.iter().map(to_labeled).collect())
}

/// Postorder labels and leftmost-leaf indices.
fn postorder(t: &Tree, labels: &mut Vec<u8>, leftmost: &mut Vec<usize>) -> usize {
    let mut first = None;
    for c in &t.children {
        let lm = postorder(c, labels, leftmost);
        first.get_or_insert(lm);
    }
    let me = labels.len();
    labels.push(t.label);
    let lm = first.unwrap_or(me);
    leftmost.push(lm);
    lm
}

/// Unit-cost edit distance by the plain forest recursion on the rightmost roots,
/// memoized over postorder intervals.
fn oracle_distance(a: &Tree, b: &Tree) -> usize {
    let (mut la, mut ma, mut lb, mut mb) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    postorder(a, &mut la, &mut ma);
    postorder(b, &mut lb, &mut mb);
    let (n, m) = (la.len(), lb.len());
    let mut memo = vec![usize::MAX; (n + 1).pow(2) * (m + 1).pow(2)];
    struct Ctx<'a> {
        la: &'a [u8],
        ma: &'a [usize],
        lb: &'a [u8],
        mb: &'a [usize],
        n: usize,
        m: usize,
    }
    fn go(c: &Ctx, memo: &mut [usize], l1: usize, r1: usize, l2: usize, r2: usize) -> usize {
        if l1 == r1 {
            return r2 - l2;
        }
        if l2 == r2 {
            return r1 - l1;
        }
        let key = ((l1 * (c.n + 1) + r1) * (c.m + 1) + l2) * (c.m + 1) + r2;
        if memo[key] != usize::MAX {
            return memo[key];
        }
        let (i, j) = (r1 - 1, r2 - 1);
        let delete = go(c, memo, l1, i, l2, r2) + 1;
        let insert = go(c, memo, l1, r1, l2, j) + 1;
        let relabel = go(c, memo, l1, c.ma[i], l2, c.mb[j])
            + go(c, memo, c.ma[i], i, c.mb[j], j)
            + usize::from(c.la[i] != c.lb[j]);
        let best = delete.min(insert).min(relabel);
        memo[key] = best;
        best
    }
    let ctx = Ctx {
        la: &la,
        ma: &ma,
        lb: &lb,
        mb: &mb,
        n,
        m,
    };
    go(&ctx, &mut memo, 0, n, 0, m)
}

fn ted_oracle() -> Check {
    let trees = all_trees(6);
    let labeled: Vec<Vec<LabeledTree<u8>>> = trees.iter().map(|ts| ts.iter().map(to_labeled).collect()).collect();
    let mut pairs = 0u64;
    for a in 1..=6 {
        for b in 1..=6 {
            if a + b > 8 {
                continue;
            }
            for (i, ta) in trees[a].iter().enumerate() {
                for (j, tb) in trees[b].iter().enumerate() {
                    let got = tree_distance(&labeled[a][i], &labeled[b][j]);
                    let want = oracle_distance(ta, tb);
                    pairs += 1;
                    ensure(got == want, || {
                        format!("sizes {a}+{b}, pair ({i}, {j}): {got} != {want}")
                    })?;
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let random = 20_000;
    for _ in 0..random {
        let i = rng.random_range(0..trees[6].len());
        let j = rng.random_range(0..trees[6].len());
        let got = tree_distance(&labeled[6][i], &labeled[6][j]);
        let want = oracle_distance(&trees[6][i], &trees[6][j]);
        ensure(got == want, || format!("6+6 pair ({i}, {j}): {got} != {want}"))?;
    }
    Ok(format!(
        "all {pairs} pairs with at most 8 nodes combined (each tree at most 6) plus {random} random 6+6 pairs agree; \
         the per-tree reading (about 1.2e9 pairs) is not run"
    ))
}

// ---------------------------------------------------------------- 4

const EM_SCHEMA: &str = r#"{"databases":[{"db_id":"concert","tables":[
    {"name":"singer","columns":[{"name":"singer_id","type":"number"},{"name":"name","type":"text"},{"name":"age","type":"number"},{"name":"country","type":"text"},{"name":"song_count","type":"number"}]},
    {"name":"stadium","columns":[{"name":"stadium_id","type":"number"},{"name":"name","type":"text"},{"name":"capacity","type":"number"},{"name":"location","type":"text"}]},
    {"name":"concert","columns":[{"name":"concert_id","type":"number"},{"name":"name","type":"text"},{"name":"year","type":"number"},{"name":"stadium_id","type":"number"}]},
    {"name":"singer_in_concert","columns":[{"name":"concert_id","type":"number"},{"name":"singer_id","type":"number"}]}],
    "foreign_keys":[["concert","stadium_id","stadium","stadium_id"],["singer_in_concert","concert_id","concert","concert_id"],["singer_in_concert","singer_id","singer","singer_id"]]}]}"#;

/// (pred, gold, same under clause-set canonicalization, compare literal values)
const EM_CASES: &[(&str, &str, bool, bool)] = &[
    (
        "SELECT name, age FROM singer",
        "SELECT age, name FROM singer",
        true,
        false,
    ),
    (
        "SELECT name, age, country FROM singer",
        "SELECT country, name, age FROM singer",
        true,
        false,
    ),
    (
        "SELECT max(age), min(age), avg(age) FROM singer",
        "SELECT avg(age), max(age), min(age) FROM singer",
        true,
        false,
    ),
    (
        "SELECT T1.name FROM concert AS T1 JOIN stadium AS T2 ON T1.stadium_id = T2.stadium_id",
        "SELECT T1.name FROM concert AS T1 JOIN stadium AS T2 ON T2.stadium_id = T1.stadium_id",
        true,
        false,
    ),
    (
        "SELECT a.name FROM concert AS a JOIN stadium AS b ON a.stadium_id = b.stadium_id",
        "SELECT T1.name FROM concert AS T1 JOIN stadium AS T2 ON T1.stadium_id = T2.stadium_id",
        true,
        false,
    ),
    (
        "SELECT T1.name FROM concert AS T1 JOIN stadium AS T2 ON T1.stadium_id = T2.stadium_id",
        "SELECT T2.name FROM stadium AS T1 JOIN concert AS T2 ON T2.stadium_id = T1.stadium_id",
        true,
        false,
    ),
    (
        "SELECT T1.name FROM singer AS T1",
        "SELECT name FROM singer",
        true,
        false,
    ),
    (
        "select NAME from SINGER where AGE > 20",
        "SELECT name FROM singer WHERE age > 20",
        true,
        false,
    ),
    (
        "SELECT name FROM singer WHERE age = song_count",
        "SELECT name FROM singer WHERE song_count = age",
        true,
        false,
    ),
    (
        "SELECT name FROM singer WHERE age > 20",
        "SELECT name FROM singer WHERE song_count > 20",
        false,
        false,
    ),
    (
        "SELECT name FROM singer WHERE age > 20",
        "SELECT name FROM singer WHERE age < 20",
        false,
        false,
    ),
    (
        "SELECT name FROM singer WHERE age > 20",
        "SELECT name FROM singer WHERE age > 30",
        true,
        false,
    ),
    (
        "SELECT name FROM singer WHERE age > 20",
        "SELECT name FROM singer WHERE age > 30",
        false,
        true,
    ),
    (
        "SELECT name FROM singer WHERE country = 'France' AND age > 20",
        "SELECT name FROM singer WHERE age > 20 AND country = 'France'",
        true,
        false,
    ),
    (
        "SELECT name FROM singer WHERE country = 'France' AND age > 20",
        "SELECT name FROM singer WHERE country = 'France' OR age > 20",
        false,
        false,
    ),
    (
        "SELECT name FROM singer WHERE age > 20",
        "SELECT name FROM singer WHERE age > 20 AND country = 'France'",
        false,
        false,
    ),
    (
        "SELECT country, count(*) FROM singer GROUP BY country",
        "SELECT country, count(*) FROM singer GROUP BY name",
        false,
        false,
    ),
    (
        "SELECT country, count(*) FROM singer GROUP BY country",
        "SELECT country, count(*) FROM singer",
        false,
        false,
    ),
    (
        "SELECT country FROM singer GROUP BY country HAVING count(*) > 1",
        "SELECT country FROM singer GROUP BY country HAVING sum(age) > 1",
        false,
        false,
    ),
    (
        "SELECT country FROM singer GROUP BY country HAVING count(*) > 1",
        "SELECT country FROM singer GROUP BY country HAVING count(*) > 5",
        true,
        false,
    ),
    (
        "SELECT name FROM singer ORDER BY age",
        "SELECT name FROM singer ORDER BY age DESC",
        false,
        false,
    ),
    (
        "SELECT name FROM singer ORDER BY age",
        "SELECT name FROM singer ORDER BY age ASC",
        true,
        false,
    ),
    (
        "SELECT name FROM singer ORDER BY age LIMIT 1",
        "SELECT name FROM singer ORDER BY age",
        false,
        false,
    ),
    (
        "SELECT name FROM singer ORDER BY age LIMIT 1",
        "SELECT name FROM singer ORDER BY age LIMIT 3",
        true,
        false,
    ),
    (
        "SELECT name FROM singer ORDER BY age LIMIT 1",
        "SELECT name FROM singer ORDER BY age LIMIT 3",
        false,
        true,
    ),
    (
        "SELECT DISTINCT country FROM singer",
        "SELECT country FROM singer",
        false,
        false,
    ),
    (
        "SELECT count(name) FROM singer",
        "SELECT max(name) FROM singer",
        false,
        false,
    ),
    (
        "SELECT count(*) FROM singer",
        "SELECT count(name) FROM singer",
        false,
        false,
    ),
    (
        "SELECT COUNT(*) FROM singer",
        "select count(*) from singer",
        true,
        false,
    ),
    (
        "SELECT count(DISTINCT country) FROM singer",
        "SELECT COUNT(distinct country) FROM singer",
        true,
        false,
    ),
    (
        "SELECT count(DISTINCT country) FROM singer",
        "SELECT count(country) FROM singer",
        false,
        false,
    ),
    (
        "SELECT name FROM singer WHERE age > 20 UNION SELECT name FROM singer WHERE age < 10",
        "SELECT name FROM singer WHERE age > 20 INTERSECT SELECT name FROM singer WHERE age < 10",
        false,
        false,
    ),
    (
        "SELECT name FROM singer WHERE age > 20 UNION SELECT name FROM singer WHERE age < 10",
        "SELECT name FROM singer WHERE age > 20",
        false,
        false,
    ),
    (
        "SELECT name, age FROM singer WHERE age > (SELECT avg(age) FROM singer)",
        "SELECT age, name FROM singer WHERE age > (SELECT avg(age) FROM singer)",
        true,
        false,
    ),
    (
        "SELECT name FROM singer WHERE age > (SELECT avg(age) FROM singer)",
        "SELECT name FROM singer WHERE age > (SELECT max(age) FROM singer)",
        false,
        false,
    ),
    (
        "SELECT name FROM singer WHERE singer_id IN (SELECT singer_id FROM singer_in_concert)",
        "SELECT name FROM singer WHERE singer_id NOT IN (SELECT singer_id FROM singer_in_concert)",
        false,
        false,
    ),
    ("SELECT name FROM singer", "SELECT name FROM stadium", false, false),
    (
        "SELECT T1.name FROM singer AS T1 JOIN singer_in_concert AS T2 ON T1.singer_id = T2.singer_id",
        "SELECT name FROM singer",
        false,
        false,
    ),
    (
        "SELECT name FROM singer WHERE country IN ('France', 'Spain')",
        "SELECT name FROM singer WHERE country IN ('Spain', 'France')",
        true,
        false,
    ),
    (
        "SELECT name FROM singer WHERE name LIKE '%a%'",
        "SELECT name FROM singer WHERE name = 'a'",
        false,
        false,
    ),
    (
        "SELECT name FROM singer WHERE age BETWEEN 20 AND 30",
        "SELECT name FROM singer WHERE age >= 20",
        false,
        false,
    ),
];

fn em_suite() -> Check {
    let catalog = SchemaCatalog::from_json(EM_SCHEMA).map_err(|e| e.to_string())?;
    let db = catalog.get("concert").unwrap();
    let mut wrong = Vec::new();
    for (i, &(pred, gold, want, strict)) in EM_CASES.iter().enumerate() {
        let opts = MatchOptions { compare_values: strict };
        let p = parse_sql(pred, Some(db)).map_err(|e| format!("case {i}: {e}"))?;
        let g = parse_sql(gold, Some(db)).map_err(|e| format!("case {i}: {e}"))?;
        let got = exact_set_match_with(&p.root, &g.root, opts);
        let back = exact_set_match_with(&g.root, &p.root, opts);
        let refl = exact_set_match_with(&p.root, &p.root, opts);
        if got != want || back != got || !refl {
            wrong.push(i);
        }
    }
    ensure(wrong.is_empty(), || {
        format!("cases disagreeing with the oracle: {wrong:?}")
    })?;
    let same = EM_CASES.iter().filter(|c| c.2).count();
    Ok(format!(
        "{} pairs ({same} equal, {} different), 100% agreement",
        EM_CASES.len(),
        EM_CASES.len() - same
    ))
}

// ---------------------------------------------------------------- 5

const EX_DB: &str = "
CREATE TABLE dept (id INTEGER PRIMARY KEY, name TEXT, budget REAL);
CREATE TABLE emp (id INTEGER PRIMARY KEY, name TEXT, dept_id INTEGER, salary INTEGER);
CREATE TABLE proj (id INTEGER PRIMARY KEY, title TEXT, dept_id INTEGER, cost INTEGER);
INSERT INTO dept VALUES (1, 'eng', 100), (2, 'ops', 50), (3, 'hr', NULL);
INSERT INTO emp VALUES (1, 'ann', 1, 10), (2, 'bob', 1, 20), (3, 'cy', 2, 20), (4, 'dee', NULL, 5);
INSERT INTO proj VALUES (1, 'x', 1, 7), (2, 'y', 1, 3), (3, 'z', 2, 3);
";

#[derive(Debug, PartialEq)]
enum Truth {
    Match,
    Mismatch,
    PredError,
    PredTimeout,
    GoldError,
}

const RUNAWAY: &str = "WITH RECURSIVE c(x) AS (SELECT 1 UNION ALL SELECT x + 1 FROM c) SELECT max(x) FROM c";

fn ex_harness() -> Check {
    use Truth::*;
    let cases: Vec<(&str, &str, Truth)> = vec![
        ("SELECT name FROM emp", "SELECT name FROM emp", Match),
        (
            "SELECT name FROM emp ORDER BY salary DESC",
            "SELECT name FROM emp",
            Match,
        ),
        (
            "SELECT name FROM emp ORDER BY salary DESC",
            "SELECT name FROM emp ORDER BY salary, id",
            Mismatch,
        ),
        (
            "SELECT name FROM emp ORDER BY salary ASC, id ASC",
            "SELECT name FROM emp ORDER BY salary, id",
            Match,
        ),
        ("SELECT count(*) FROM emp", "SELECT count(id) FROM emp", Match),
        ("SELECT count(dept_id) FROM emp", "SELECT count(*) FROM emp", Mismatch),
        ("SELECT DISTINCT salary FROM emp", "SELECT salary FROM emp", Mismatch),
        (
            "SELECT avg(salary) FROM emp",
            "SELECT sum(salary) / 4.0 FROM emp",
            Match,
        ),
        ("SELECT 2", "SELECT 2.0", Match),
        (
            "SELECT T2.name FROM dept AS T1 JOIN emp AS T2 ON T1.id = T2.dept_id WHERE T1.name = 'eng'",
            "SELECT name FROM emp WHERE dept_id = 1",
            Match,
        ),
        (
            "SELECT name FROM emp WHERE dept_id = 2",
            "SELECT name FROM emp WHERE dept_id = 1",
            Mismatch,
        ),
        ("SELECT budget FROM dept WHERE id = 3", "SELECT NULL", Match),
        (
            "SELECT name FROM dept WHERE budget > 60",
            "SELECT name FROM dept WHERE budget >= 100",
            Match,
        ),
        ("SELECT name, salary FROM emp", "SELECT salary, name FROM emp", Mismatch),
        ("SELEC name FROM emp", "SELECT name FROM emp", PredError),
        ("SELECT nope FROM emp", "SELECT name FROM emp", PredError),
        (RUNAWAY, "SELECT 1", PredTimeout),
        (
            "SELECT name FROM emp ORDER BY salary LIMIT 1",
            "SELECT name FROM emp WHERE salary = (SELECT min(salary) FROM emp)",
            Match,
        ),
        (
            "SELECT dept_id, count(*) FROM proj GROUP BY dept_id ORDER BY dept_id",
            "SELECT dept_id, count(*) FROM proj GROUP BY dept_id ORDER BY dept_id DESC",
            Mismatch,
        ),
        (
            "SELECT dept_id, count(*) FROM proj GROUP BY dept_id ORDER BY dept_id DESC",
            "SELECT dept_id, count(*) FROM proj GROUP BY dept_id ORDER BY count(*) ASC",
            Match,
        ),
        (
            "SELECT name FROM emp WHERE salary = 10 UNION SELECT name FROM emp WHERE salary = 5",
            "SELECT name FROM emp WHERE salary IN (5, 10)",
            Match,
        ),
        (
            "SELECT title FROM proj WHERE cost = 3 ORDER BY title",
            "SELECT title FROM proj WHERE cost = 3 ORDER BY title DESC",
            Mismatch,
        ),
        ("SELECT 'Eng'", "SELECT name FROM dept WHERE id = 1", Mismatch),
        ("SELECT 1", "SELECT x FROM nowhere", GoldError),
        (
            "SELECT name FROM emp WHERE dept_id IS NULL",
            "SELECT name FROM emp WHERE id = 4",
            Match,
        ),
    ];
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("seeded.sqlite");
    rusqlite::Connection::open(&path)
        .and_then(|c| c.execute_batch(EX_DB))
        .map_err(|e| e.to_string())?;
    let exec = Executor::open(&path, Duration::from_millis(500)).map_err(|e| e.to_string())?;
    let mut wrong = Vec::new();
    for (i, (pred, gold, want)) in cases.iter().enumerate() {
        let got = match exec.compare(pred, gold) {
            Ok(Verdict::Match) => Match,
            Ok(Verdict::Mismatch) => Mismatch,
            Ok(Verdict::PredFailed(ExecFailure::Timeout)) => PredTimeout,
            Ok(Verdict::PredFailed(ExecFailure::Sql(_))) => PredError,
            Err(_) => GoldError,
        };
        if &got != want {
            wrong.push(format!("case {i}: {got:?} != {want:?}"));
        }
    }
    ensure(wrong.is_empty(), || wrong.join("; "))?;
    Ok(format!(
        "{} pairs on a 3-table database, all verdicts as computed by hand",
        cases.len()
    ))
}

// ---------------------------------------------------------------- 6

fn categorizer() -> Check {
    let cases = [
        ("SELECT COUNT(*) FROM head WHERE age > 56", QueryCategory::Simple),
        (
            "SELECT T1.name , T1.long , avg(T2.duration) FROM station AS T1 JOIN trip AS T2 ON T1.id = T2.start_station_id GROUP BY T2.start_station_id",
            QueryCategory::Join,
        ),
        (
            "SELECT date , zip_code FROM weather WHERE min_dew_point_f < (SELECT min(min_dew_point_f) FROM weather WHERE zip_code = 94107)",
            QueryCategory::Nested,
        ),
        (
            "SELECT Status FROM city WHERE Population > 1500 INTERSECT SELECT Status FROM city WHERE Population < 500",
            QueryCategory::Iuen,
        ),
        (
            "SELECT T1.a FROM x AS T1 JOIN y AS T2 ON T1.id = T2.id WHERE T1.b > (SELECT avg(b) FROM x)",
            QueryCategory::Nested,
        ),
        ("SELECT a FROM x WHERE b IN (SELECT b FROM y) UNION SELECT a FROM z", QueryCategory::Iuen),
        ("SELECT a FROM x WHERE b NOT IN (SELECT b FROM y)", QueryCategory::Iuen),
    ];
    for (sql, want) in cases {
        let got = categorize(&parse_sql(sql, None).map_err(|e| e.to_string())?.root);
        ensure(got == want, || format!("{sql}: {got:?} != {want:?}"))?;
    }
    Ok("4 exemplars and 3 precedence cases".into())
}

// ---------------------------------------------------------------- 7

fn world() -> DatabaseSchema {
    SchemaCatalog::from_json(include_str!("fixtures/world_catalog.json"))
        .unwrap()
        .get("world")
        .unwrap()
        .clone()
}

fn sample(id: &str, db: &str, question: &str, sql: &str) -> Sample {
    Sample {
        id: id.into(),
        db_id: db.into(),
        question: question.into(),
        gold_sql: Some(sql.into()),
    }
}

fn prompt_fixtures() -> Check {
    let fixture: String = include_str!("fixtures/world_prompt.txt")
        .lines()
        .filter(|l| !l.starts_with("%%"))
        .map(|l| format!("{l}\n"))
        .collect();
    let matches = ValueMatches::from([(
        ColumnId::new("countrylanguage", "language"),
        vec!["Dutch".into(), "English".into()],
    )]);
    let test = sample("t", "world", "Which regions speak Dutch or English?", "SELECT 1");
    let p = assemble_prompt(&[], &test, &world(), &matches, DemoOrder::default()).map_err(|e| e.to_string())?;
    ensure(p.full_text == fixture, || {
        format!("world prompt differs:\n{}", p.full_text)
    })?;
    for line in [
        "# countrylanguage (countrycode, language [Dutch, English], isofficial, percentage)",
        "# Foreign Keys = [city.countrycode = country.code, countrylanguage.countrycode = country.code]",
    ] {
        ensure(p.full_text.lines().any(|l| l == line), || {
            format!("missing line {line}")
        })?;
    }

    let demos = [
        (
            sample(
                "j",
                "bike",
                "For each station, return its longitude and the average duration of trips that started from the station.",
                "SELECT T1.name , T1.long , avg(T2.duration) FROM station AS T1 JOIN trip AS T2 ON T1.id = T2.start_station_id GROUP BY T2.start_station_id",
            ),
            QueryCategory::Join,
            vec![
                "Let's think step by step. we need to join the tables 'station' and 'trip'.",
                "Intermediate representation: \"FROM station AS T1 JOIN trip AS T2 ON T1.id = T2.start_station_id\".",
            ],
        ),
        (
            sample(
                "n",
                "bike",
                "On which day and in which zip code was the min dew point lower than any day in zip code 94107?",
                "SELECT date , zip_code FROM weather WHERE min_dew_point_f < (SELECT min(min_dew_point_f) FROM weather WHERE zip_code = 94107)",
            ),
            QueryCategory::Nested,
            vec!["Nested subquery: \"( SELECT min ( min_dew_point_f ) FROM weather WHERE zip_code = 94107 )\"."],
        ),
        (
            sample(
                "i",
                "farm",
                "Show the status shared by cities with population bigger than 1500 and smaller than 500.",
                "SELECT Status FROM city WHERE Population > 1500 INTERSECT SELECT Status FROM city WHERE Population < 500",
            ),
            QueryCategory::Iuen,
            vec![
                "First subquery: SELECT Status FROM city WHERE Population > 1500",
                "Second subquery: SELECT Status FROM city WHERE Population < 500",
            ],
        ),
    ];
    let mut found = 0;
    for (demo, cat, lines) in &demos {
        let block = render_cot_demo(demo, *cat, "SCHEMA").map_err(|e| e.to_string())?;
        ensure(block.contains("SCHEMA"), || "schema block missing".into())?;
        let nested_line = block.lines().find(|l| l.contains("we need a nested subquery for"));
        ensure(*cat != QueryCategory::Nested || nested_line.is_some(), || {
            "nested reasoning line missing".into()
        })?;
        let sql_line = format!("### SQL: {} ;", demo.gold_sql.as_deref().unwrap());
        ensure(block.ends_with(&sql_line), || {
            format!("{} does not end with its SQL", demo.id)
        })?;
        for want in lines {
            ensure(block.lines().any(|l| l.contains(want)), || {
                format!("{}: missing {want}\n{block}", demo.id)
            })?;
            found += 1;
        }
    }
    Ok(format!(
        "world prompt byte-exact; {found} reasoning lines in 3 demonstrations"
    ))
}

// ---------------------------------------------------------------- 8

fn links(scores: &RelevanceScores, db: &DatabaseSchema, tt: f64, tc: f64) -> Result<BTreeSet<String>, String> {
    let edges = attention_match_edges(scores, db, tt, tc).map_err(|e| e.to_string())?;
    Ok(edges
        .iter()
        .filter(|e| matches!(e.ty, EdgeType::AttentionMatchTable | EdgeType::AttentionMatchColumn))
        .map(|e| match (&e.src, &e.dst) {
            (NodeRef::Table(t), NodeRef::Token(i)) => format!("{t}@{i}"),
            (NodeRef::Column(c), NodeRef::Token(i)) => format!("{c}@{i}"),
            other => panic!("unexpected attention edge {other:?}"),
        })
        .collect())
}

/// Items whose attention strictly exceeds their kind's threshold, by hand.
fn expected_links(scores: &RelevanceScores, tt: f64, tc: f64) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for (t, s) in &scores.tables {
        out.extend(
            s.attention
                .iter()
                .enumerate()
                .filter(|(_, &a)| a > tt)
                .map(|(i, _)| format!("{t}@{i}")),
        );
    }
    for (c, s) in &scores.columns {
        out.extend(
            s.attention
                .iter()
                .enumerate()
                .filter(|(_, &a)| a > tc)
                .map(|(i, _)| format!("{c}@{i}")),
        );
    }
    out
}

fn attention_semantics() -> Check {
    let (tt, tc) = (0.66, 0.43);
    let db = world();
    let catalog = SchemaCatalog::from_databases([db.clone()]).map_err(|e| e.to_string())?;
    let question = "Which regions speak Dutch or English?";
    let samples = vec![sample("s", "world", question, "SELECT 1")];
    let at_table = [0.66, 0.6600000001, 0.65, 1.0, 0.0, 0.7];
    let at_column = [0.43, 0.4300000001, 0.42, 0.66, 0.0, 1.0];
    let mut scores = RelevanceScores {
        sample_id: "s".into(),
        tables: Default::default(),
        columns: Default::default(),
    };
    for t in &db.tables {
        scores.tables.insert(
            t.name.clone(),
            ItemScore {
                prob: 0.9,
                attention: at_table.to_vec(),
            },
        );
        for c in &t.columns {
            scores.columns.insert(
                ColumnId::new(&t.name, &c.name),
                ItemScore {
                    prob: 0.9,
                    attention: at_column.to_vec(),
                },
            );
        }
    }
    let parsed = parse_scores(&write_scores(&[scores]), &samples, &catalog).map_err(|e| e.to_string())?;
    let got = links(&parsed[0], &db, tt, tc)?;
    let want = expected_links(&parsed[0], tt, tc);
    ensure(got == want, || format!("synthetic file: {got:?} != {want:?}"))?;
    let per_table: BTreeSet<usize> = got
        .iter()
        .filter(|l| l.starts_with("city@"))
        .map(|l| l[5..].parse().unwrap())
        .collect();
    ensure(per_table == BTreeSet::from([1, 3, 5]), || {
        format!("city links {per_table:?}")
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let rounds = 200;
    for round in 0..rounds {
        let mut s = parsed[0].clone();
        for v in s.tables.values_mut().chain(s.columns.values_mut()) {
            for a in &mut v.attention {
                // a coarse grid puts many scores exactly on thresholds
                *a = (rng.random_range(0..=100) as f64) / 100.0;
            }
        }
        let (t1, t2): (f64, f64) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
        let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        let (lo, hi) = ((lo * 100.0).round() / 100.0, (hi * 100.0).round() / 100.0);
        let loose = links(&s, &db, lo, lo)?;
        let strict = links(&s, &db, hi, hi)?;
        ensure(strict.is_subset(&loose), || {
            format!("round {round}: raising τ added links")
        })?;
        ensure(loose == expected_links(&s, lo, lo), || {
            format!("round {round}: links at τ={lo}")
        })?;
        ensure(strict == expected_links(&s, hi, hi), || {
            format!("round {round}: links at τ={hi}")
        })?;
    }
    Ok(format!(
        "{} links from the synthetic score file, monotone over {rounds} random score sets",
        got.len()
    ))
}

// ---------------------------------------------------------------- 9

fn pruner_training() -> Check {
    let corpus = pruner_corpus();
    let (train_idx, held_idx) = corpus.split(0.8, 7);
    let examples = |idx: &[usize]| -> Result<Vec<PrunerExample>, String> {
        idx.iter()
            .map(|&i| {
                let s = &corpus.samples[i];
                PrunerExample::from_sample(s, corpus.db(s)).map_err(|e| e.to_string())
            })
            .collect()
    };
    let train = examples(&train_idx)?;
    let held = examples(&held_idx)?;
    let mut model = CrossEncoder::new(
        CrossEncoderConfig::default(),
        Vocab::from_inputs(train.iter().map(|e| &e.input)),
    )
    .map_err(|e| e.to_string())?;
    let start = Instant::now();
    let report = train_pruner(&mut model, &train, &held, &PrunerTrainConfig::default()).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let (tf, cf) = (report.metrics.table.f1, report.metrics.column.f1);
    let detail = format!(
        "{} train / {} held out, 30 epochs, table F1 {tf:.3}, column F1 {cf:.3}, {secs:.0} s",
        train.len(),
        held.len()
    );
    ensure(tf >= 0.85 && cf >= 0.75 && secs < 300.0, || detail.clone())?;
    Ok(detail)
}

// ---------------------------------------------------------------- 10

fn recall_at_4(corpus: &SynthCorpus, graphs: &[SchemaLinkGraph], enc: &GraphEncoder) -> f64 {
    let index = build_index(graphs, enc).unwrap();
    let skeleton: HashMap<&str, usize> = corpus
        .samples
        .iter()
        .zip(&corpus.skeletons)
        .map(|(s, &k)| (s.id.as_str(), k))
        .collect();
    let mut hits = 0;
    for g in graphs {
        let top = retrieve_top_k(&index, g, enc, 5).unwrap();
        hits += top
            .iter()
            .filter(|(id, _)| *id != g.sample_id)
            .take(4)
            .filter(|(id, _)| skeleton[id.as_str()] == skeleton[g.sample_id.as_str()])
            .count();
    }
    hits as f64 / (4 * graphs.len()) as f64
}

fn retrieval_training() -> Check {
    let pool = retrieval_pool();
    let graphs = pool_graphs(&pool);
    let mut usefulness = planted_usefulness(&pool, 7);
    let sets: Vec<ScoredCandidateSet> = pool
        .samples
        .iter()
        .zip(&graphs)
        .map(|(s, g)| score_candidates(s, g, &pool.samples, &mut usefulness, 4, 16))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let mut enc =
        GraphEncoder::new(EncoderConfig::default(), GraphEncoder::vocab_for(&graphs)).map_err(|e| e.to_string())?;
    let untrained = recall_at_4(&pool, &graphs, &enc);
    let cfg = RetrieverTrainConfig {
        epochs: 6,
        lr: 1e-3,
        batch: 32,
        temperature: 0.1,
        seed: 7,
    };
    let start = Instant::now();
    let report = train_retriever(&mut enc, &graphs, &sets, &cfg).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let trained = recall_at_4(&pool, &graphs, &enc);
    let l = &report.losses;
    let detail = format!(
        "{} samples, recall@4 untrained {untrained:.4} (target <= 0.3), trained {trained:.4} (target >= 0.8), \
         loss {:.3} -> {:.3} after 5 epochs, training {secs:.0} s",
        pool.samples.len(),
        l[0],
        l[5]
    );
    ensure(
        untrained <= 0.3 && trained >= 0.8 && l[5] < l[0] && secs < 600.0,
        || detail.clone(),
    )?;
    Ok(detail)
}

// ---------------------------------------------------------------- 11

fn end_to_end() -> Check {
    use common::{ok, pipeline_through_retrieval, report};
    let f = pipeline_through_retrieval();
    let cat = f.p("catalog.json");
    ok(&[
        "prompt",
        "--catalog",
        &cat,
        "--data",
        &f.p("test.jsonl"),
        "--graphs",
        &f.p("test_graphs.jsonl"),
        "--pool",
        &f.p("pool.jsonl"),
        "--pool-graphs",
        &f.p("pool_graphs.jsonl"),
        "--demos",
        &f.p("demos.jsonl"),
        "--out",
        &f.p("prompts.jsonl"),
    ]);
    ok(&[
        "generate",
        "--prompts",
        &f.p("prompts.jsonl"),
        "--client",
        "echo",
        "--out",
        &f.p("preds.jsonl"),
    ]);
    ok(&[
        "evaluate",
        "--pred",
        &f.p("preds.jsonl"),
        "--data",
        &f.p("test.jsonl"),
        "--catalog",
        &cat,
        "--db-root",
        &f.p("dbs"),
        "--demos",
        &f.p("demos.jsonl"),
        "--pool",
        &f.p("pool.jsonl"),
        "--out",
        &f.p("report.json"),
    ]);
    let r = report(&f.root.join("report.json"));
    let demos = std::fs::read_to_string(f.p("demos.jsonl")).map_err(|e| e.to_string())?;
    let twin_first = demos
        .lines()
        .filter(|l| {
            let v: serde_json::Value = serde_json::from_str(l).unwrap();
            v["demos"][0]["id"].as_str().unwrap() == format!("twin-{}", v["sample_id"].as_str().unwrap())
        })
        .count();
    let (n, ex, em) = (
        &r["overall"]["n"],
        r["overall"]["ex"].as_f64().unwrap(),
        r["overall"]["em"].as_f64().unwrap(),
    );
    let detail = format!(
        "all stages exit 0; n = {n}, EX {ex:.1}%, EM {em:.1}%, gold twin ranked first for {twin_first}/20 samples"
    );
    ensure(ex == 100.0 && em == 100.0 && n == 20, || detail.clone())?;
    Ok(detail)
}

// ---------------------------------------------------------------- 12

fn latency() -> Check {
    let corpus = SynthCorpus::generate(5, 12, "lat");
    let graphs = pool_graphs(&corpus);
    let enc =
        GraphEncoder::new(EncoderConfig::default(), GraphEncoder::vocab_for(&graphs)).map_err(|e| e.to_string())?;
    let dim = enc.config.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let index = RetrievalIndex {
        fingerprint: enc.fingerprint(),
        entries: (0..7000)
            .map(|i| GraphEmbedding {
                sample_id: format!("e{i:04}"),
                vector: (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            })
            .collect(),
    };
    let r = measure_retrieval_latency(&index, &graphs, &enc, 4).map_err(|e| e.to_string())?;
    let detail = format!(
        "{} queries, k = 4, {} entries at d = {dim}: mean {:.2} ms, p95 {:.2} ms",
        r.queries,
        r.index_size,
        r.mean_seconds * 1e3,
        r.p95_seconds * 1e3
    );
    ensure(r.mean_seconds < 1.0 && r.index_size == 7000, || detail.clone())?;
    Ok(detail)
}
