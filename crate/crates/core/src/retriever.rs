//! Usefulness ranking, contrastive training of the graph encoder, and exact top-k retrieval.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::io::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::Sample;
use crate::encoder::{dot, EncodeTrace, GraphEmbedding, GraphEncoder};
use crate::error::{Error, Result};
use crate::linker::SchemaLinkGraph;
use crate::nn::{Adam, AdamConfig, Parameters};

pub const DEFAULT_M_POS: usize = 4;
pub const DEFAULT_M_NEG: usize = 16;
pub const DEFAULT_TEMPERATURE: f64 = 0.1;
pub const DEFAULT_K: usize = 4;

/// How useful `candidate` is as a demonstration for answering `anchor`, in `[0, 1]`.
pub trait UsefulnessProvider {
    fn score(&mut self, anchor: &Sample, anchor_graph: &SchemaLinkGraph, candidate: &Sample) -> Result<f64>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UsefulnessRecord {
    pub anchor_id: String,
    pub candidate_id: String,
    pub score: f64,
}

/// Lookup table of precomputed scores.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FileBacked {
    scores: BTreeMap<(String, String), f64>,
}

impl FileBacked {
    pub fn from_records(records: impl IntoIterator<Item = UsefulnessRecord>) -> Result<Self> {
        let mut fb = FileBacked::default();
        for r in records {
            check_score(r.score, &r.anchor_id, &r.candidate_id)?;
            fb.scores.insert((r.anchor_id, r.candidate_id), r.score);
        }
        Ok(fb)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            records.push(
                serde_json::from_str::<UsefulnessRecord>(line)
                    .map_err(|e| Error::json(format!("usefulness line {}", i + 1), e))?,
            );
        }
        FileBacked::from_records(records)
    }

    pub fn get(&self, anchor: &str, candidate: &str) -> Option<f64> {
        self.scores.get(&(anchor.to_string(), candidate.to_string())).copied()
    }

    pub fn insert(&mut self, anchor: &str, candidate: &str, score: f64) {
        self.scores.insert((anchor.to_string(), candidate.to_string()), score);
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// JSONL, sorted by anchor then candidate.
    pub fn to_jsonl(&self) -> String {
        let mut out = Vec::new();
        for ((a, c), s) in &self.scores {
            let r = UsefulnessRecord {
                anchor_id: a.clone(),
                candidate_id: c.clone(),
                score: *s,
            };
            serde_json::to_writer(&mut out, &r).expect("record serializes");
            writeln!(out).expect("write to vec");
        }
        String::from_utf8(out).expect("JSON is UTF-8")
    }
}

impl UsefulnessProvider for FileBacked {
    fn score(&mut self, anchor: &Sample, _: &SchemaLinkGraph, candidate: &Sample) -> Result<f64> {
        self.get(&anchor.id, &candidate.id).ok_or_else(|| {
            Error::invalid(format!(
                "no usefulness score for anchor `{}` and candidate `{}`",
                anchor.id, candidate.id
            ))
        })
    }
}

/// Every candidate gets the same score.
#[derive(Clone, Copy, Debug)]
pub struct StubConstant(pub f64);

impl UsefulnessProvider for StubConstant {
    fn score(&mut self, _: &Sample, _: &SchemaLinkGraph, _: &Sample) -> Result<f64> {
        Ok(self.0)
    }
}

/// Answers from a cache first and records whatever the inner provider computes.
pub struct Caching<P> {
    pub inner: P,
    pub cache: FileBacked,
}

impl<P: UsefulnessProvider> UsefulnessProvider for Caching<P> {
    fn score(&mut self, anchor: &Sample, graph: &SchemaLinkGraph, candidate: &Sample) -> Result<f64> {
        if let Some(s) = self.cache.get(&anchor.id, &candidate.id) {
            return Ok(s);
        }
        let s = self.inner.score(anchor, graph, candidate)?;
        self.cache.insert(&anchor.id, &candidate.id, s);
        Ok(s)
    }
}

fn check_score(s: f64, anchor: &str, candidate: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::invalid(format!(
            "usefulness score {s} for anchor `{anchor}` and candidate `{candidate}` is outside [0, 1]"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidateSet {
    pub anchor_id: String,
    /// Descending by score, ties by candidate id.
    pub ranked: Vec<(String, f64)>,
    pub positives: Vec<String>,
    pub negatives: Vec<String>,
}

fn by_score_then_id(a: &(String, f64), b: &(String, f64)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.0.cmp(&b.0))
}

/// Scores every pool sample except the anchor; the top `m_pos` become positives and the
/// bottom `m_neg` negatives.
pub fn score_candidates(
    anchor: &Sample,
    anchor_graph: &SchemaLinkGraph,
    pool: &[Sample],
    provider: &mut dyn UsefulnessProvider,
    m_pos: usize,
    m_neg: usize,
) -> Result<ScoredCandidateSet> {
    anchor.gold()?;
    let candidates: Vec<&Sample> = pool.iter().filter(|c| c.id != anchor.id).collect();
    if m_pos == 0 || m_neg == 0 || m_pos + m_neg > candidates.len() {
        return Err(Error::invalid(format!(
            "anchor `{}`: need {m_pos} positives and {m_neg} negatives from {} candidates",
            anchor.id,
            candidates.len()
        )));
    }
    let mut ranked = Vec::with_capacity(candidates.len());
    for c in candidates {
        let s = provider
            .score(anchor, anchor_graph, c)
            .map_err(|e| Error::invalid(format!("scoring candidate `{}` for anchor `{}`: {e}", c.id, anchor.id)))?;
        check_score(s, &anchor.id, &c.id)?;
        ranked.push((c.id.clone(), s));
    }
    ranked.sort_by(by_score_then_id);
    let positives = ranked[..m_pos].iter().map(|r| r.0.clone()).collect();
    let negatives = ranked[ranked.len() - m_neg..].iter().map(|r| r.0.clone()).collect();
    Ok(ScoredCandidateSet {
        anchor_id: anchor.id.clone(),
        ranked,
        positives,
        negatives,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContrastiveLoss {
    pub loss: f64,
    pub d_anchor: Vec<f64>,
    pub d_positives: Vec<Vec<f64>>,
    pub d_negatives: Vec<Vec<f64>>,
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// InfoNCE averaged over positives, each contrasted with all negatives of the set.
pub fn contrastive_loss(
    anchor: &[f64],
    positives: &[Vec<f64>],
    negatives: &[Vec<f64>],
    t: f64,
) -> Result<ContrastiveLoss> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::invalid("contrastive loss needs a positive and a negative"));
    }
    if !(t > 0.0) {
        return Err(Error::invalid(format!("temperature must be positive, got {t}")));
    }
    let sims = |vs: &[Vec<f64>]| -> Result<Vec<f64>> { vs.iter().map(|v| dot(anchor, v).map(|s| s / t)).collect() };
    let sp = sims(positives)?;
    let sn = sims(negatives)?;
    if sp.iter().chain(&sn).any(|s| !s.is_finite()) {
        return Err(Error::NonFinite {
            what: "similarity".into(),
            step: 0,
        });
    }
    let p = positives.len() as f64;
    let d = anchor.len();
    let mut loss = 0.0;
    // Gradients with respect to the scaled similarities.
    let mut gp = vec![0.0; sp.len()];
    let mut gn = vec![0.0; sn.len()];
    let mut logits = Vec::with_capacity(1 + sn.len());
    for (i, &s) in sp.iter().enumerate() {
        logits.clear();
        logits.push(s);
        logits.extend(&sn);
        let lse = log_sum_exp(&logits);
        loss += (lse - s) / p;
        gp[i] += ((s - lse).exp() - 1.0) / p;
        for (g, &n) in gn.iter_mut().zip(&sn) {
            *g += (n - lse).exp() / p;
        }
    }
    let mut d_anchor = vec![0.0; d];
    let mut grads_for = |vs: &[Vec<f64>], gs: &[f64]| -> Vec<Vec<f64>> {
        vs.iter()
            .zip(gs)
            .map(|(v, &g)| {
                let g = g / t;
                for (da, x) in d_anchor.iter_mut().zip(v) {
                    *da += g * x;
                }
                anchor.iter().map(|a| g * a).collect()
            })
            .collect()
    };
    let d_positives = grads_for(positives, &gp);
    let d_negatives = grads_for(negatives, &gn);
    Ok(ContrastiveLoss {
        loss,
        d_anchor,
        d_positives,
        d_negatives,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetrieverTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub temperature: f64,
    pub seed: u64,
}

impl Default for RetrieverTrainConfig {
    fn default() -> Self {
        RetrieverTrainConfig {
            epochs: 10,
            lr: 1e-3,
            batch: 16,
            temperature: DEFAULT_TEMPERATURE,
            seed: 7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetrieverTrainReport {
    /// Mean loss over all sets before training, then after each epoch.
    pub losses: Vec<f64>,
}

fn graph_lookup<'a>(
    graphs: &'a [SchemaLinkGraph],
    sets: &[ScoredCandidateSet],
) -> Result<HashMap<&'a str, &'a SchemaLinkGraph>> {
    let map: HashMap<&str, &SchemaLinkGraph> = graphs.iter().map(|g| (g.sample_id.as_str(), g)).collect();
    for s in sets {
        for id in std::iter::once(&s.anchor_id).chain(&s.positives).chain(&s.negatives) {
            if !map.contains_key(id.as_str()) {
                return Err(Error::invalid(format!("no graph for sample `{id}`")));
            }
        }
    }
    Ok(map)
}

fn set_ids(s: &ScoredCandidateSet) -> impl Iterator<Item = &String> {
    std::iter::once(&s.anchor_id).chain(&s.positives).chain(&s.negatives)
}

fn set_loss(s: &ScoredCandidateSet, emb: &HashMap<&str, Vec<f64>>, t: f64) -> Result<ContrastiveLoss> {
    let get = |ids: &[String]| -> Vec<Vec<f64>> { ids.iter().map(|id| emb[id.as_str()].clone()).collect() };
    contrastive_loss(&emb[s.anchor_id.as_str()], &get(&s.positives), &get(&s.negatives), t)
}

/// Mean loss over all sets under the current encoder.
pub fn mean_contrastive_loss(
    encoder: &GraphEncoder,
    graphs: &[SchemaLinkGraph],
    sets: &[ScoredCandidateSet],
    t: f64,
) -> Result<f64> {
    let lookup = graph_lookup(graphs, sets)?;
    let mut emb: HashMap<&str, Vec<f64>> = HashMap::new();
    for s in sets {
        for id in set_ids(s) {
            if !emb.contains_key(id.as_str()) {
                emb.insert(id.as_str(), encoder.encode(lookup[id.as_str()])?.vector);
            }
        }
    }
    let mut total = 0.0;
    for s in sets {
        total += set_loss(s, &emb, t)?.loss;
    }
    Ok(total / sets.len().max(1) as f64)
}

/// Minibatch Adam over shuffled candidate sets. Each distinct graph in a batch is encoded
/// once and back-propagated once with its accumulated embedding gradient.
pub fn train_retriever(
    encoder: &mut GraphEncoder,
    graphs: &[SchemaLinkGraph],
    sets: &[ScoredCandidateSet],
    cfg: &RetrieverTrainConfig,
) -> Result<RetrieverTrainReport> {
    if cfg.batch == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    let lookup = graph_lookup(graphs, sets)?;
    let mut losses = vec![mean_contrastive_loss(encoder, graphs, sets, cfg.temperature)?];
    if cfg.epochs == 0 || sets.is_empty() {
        return Ok(RetrieverTrainReport { losses });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(
        &encoder.params,
        AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        },
    );
    let mut order: Vec<usize> = (0..sets.len()).collect();
    let mut step = 0;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch) {
            let mut traces: HashMap<&str, EncodeTrace> = HashMap::new();
            for &si in batch {
                for id in set_ids(&sets[si]) {
                    if !traces.contains_key(id.as_str()) {
                        traces.insert(id.as_str(), encoder.forward(lookup[id.as_str()])?);
                    }
                }
            }
            let emb: HashMap<&str, Vec<f64>> = traces.iter().map(|(k, tr)| (*k, tr.embedding.vector.clone())).collect();
            let mut demb: HashMap<&str, Vec<f64>> = HashMap::new();
            let scale = 1.0 / batch.len() as f64;
            let mut add = |id: &str, g: &[f64]| {
                let slot = demb
                    .entry(lookup[id].sample_id.as_str())
                    .or_insert_with(|| vec![0.0; g.len()]);
                for (s, v) in slot.iter_mut().zip(g) {
                    *s += scale * v;
                }
            };
            for &si in batch {
                let s = &sets[si];
                let l = set_loss(s, &emb, cfg.temperature)?;
                if !l.loss.is_finite() {
                    return Err(Error::NonFinite {
                        what: "retriever loss".into(),
                        step,
                    });
                }
                add(&s.anchor_id, &l.d_anchor);
                for (id, g) in s.positives.iter().zip(&l.d_positives) {
                    add(id, g);
                }
                for (id, g) in s.negatives.iter().zip(&l.d_negatives) {
                    add(id, g);
                }
            }
            let mut grad = encoder.params.zeros_like();
            let mut ids: Vec<&&str> = demb.keys().collect();
            ids.sort();
            for id in ids {
                encoder.backward(&traces[*id], &demb[*id], &mut grad)?;
            }
            adam.step(&mut encoder.params, &grad);
            if !encoder.params.all_finite() {
                return Err(Error::NonFinite {
                    what: format!("encoder weights in epoch {epoch}"),
                    step,
                });
            }
            step += 1;
        }
        losses.push(mean_contrastive_loss(encoder, graphs, sets, cfg.temperature)?);
    }
    Ok(RetrieverTrainReport { losses })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct IndexHeader {
    fingerprint: String,
    dim: usize,
    count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RetrievalIndex {
    pub fingerprint: String,
    pub entries: Vec<GraphEmbedding>,
}

impl RetrievalIndex {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Header line with the checkpoint fingerprint, then one embedding per line.
    pub fn to_jsonl(&self) -> String {
        let header = IndexHeader {
            fingerprint: self.fingerprint.clone(),
            dim: self.entries.first().map_or(0, |e| e.vector.len()),
            count: self.entries.len(),
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        out.push_str(&crate::encoder::write_embeddings(&self.entries));
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (head, body) = text.split_once('\n').unwrap_or((text, ""));
        let header: IndexHeader = serde_json::from_str(head).map_err(|e| Error::json("index header", e))?;
        let entries = crate::encoder::parse_embeddings(body)?;
        if entries.len() != header.count {
            return Err(Error::invalid(format!(
                "index header promises {} entries, found {}",
                header.count,
                entries.len()
            )));
        }
        let index = RetrievalIndex {
            fingerprint: header.fingerprint,
            entries,
        };
        index.validate(header.dim)?;
        Ok(index)
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.sample_id.as_str()) {
                return Err(Error::invalid(format!("duplicate index entry `{}`", e.sample_id)));
            }
            if e.vector.len() != dim {
                return Err(Error::Dimension(format!(
                    "index entry `{}` has dimension {}, expected {dim}",
                    e.sample_id,
                    e.vector.len()
                )));
            }
        }
        Ok(())
    }

    /// Exact top-k of `query` against every entry: similarity descending, ties by id.
    pub fn top_k(&self, query: &[f64], k: usize) -> Result<Vec<(String, f64)>> {
        if k == 0 || k > self.entries.len() {
            return Err(Error::invalid(format!("k = {k} is outside 1..={}", self.entries.len())));
        }
        let mut all = Vec::with_capacity(self.entries.len());
        for e in &self.entries {
            all.push((e.sample_id.clone(), dot(query, &e.vector)?));
        }
        if k < all.len() {
            all.select_nth_unstable_by(k - 1, by_score_then_id);
            all.truncate(k);
        }
        all.sort_by(by_score_then_id);
        Ok(all)
    }
}

pub fn build_index(graphs: &[SchemaLinkGraph], encoder: &GraphEncoder) -> Result<RetrievalIndex> {
    let entries = graphs.iter().map(|g| encoder.encode(g)).collect::<Result<Vec<_>>>()?;
    let index = RetrievalIndex {
        fingerprint: encoder.fingerprint(),
        entries,
    };
    index.validate(encoder.config.dim)?;
    Ok(index)
}

pub fn check_fingerprint(index: &RetrievalIndex, encoder: &GraphEncoder) -> Result<()> {
    let found = encoder.fingerprint();
    if found != index.fingerprint {
        return Err(Error::Fingerprint {
            expected: index.fingerprint.clone(),
            found,
        });
    }
    Ok(())
}

pub fn retrieve_top_k(
    index: &RetrievalIndex,
    graph: &SchemaLinkGraph,
    encoder: &GraphEncoder,
    k: usize,
) -> Result<Vec<(String, f64)>> {
    check_fingerprint(index, encoder)?;
    let q = encoder.encode(graph)?;
    index.top_k(&q.vector, k)
}
