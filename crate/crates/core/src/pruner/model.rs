//! Desk-scale cross-encoder scoring schema items against a question.

use std::collections::HashMap;
use std::path::Path;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    build_input_sequence, derive_relevance_labels, InputUnit, ItemScore, PrunerInput, RelevanceLabels, RelevanceScores,
    SchemaItem,
};
use crate::catalog::{name_words, tokenize_question, DatabaseSchema, Sample};
use crate::error::{Error, Result};
use crate::nn::{sigmoid, uniform, Adam, AdamConfig, LayerCache, Mat, Parameters, Stack, StackConfig};

/// Id of the reserved unknown-word embedding.
pub const UNK: usize = 0;

const MATCH_LEVELS: usize = 3;

/// Word-level vocabulary; id 0 is the unknown word.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocab {
    fn from(words: Vec<String>) -> Self {
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Vocab { words, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.words
    }
}

impl Vocab {
    /// Sorted distinct words after the unknown-word slot.
    pub fn build<'a>(words: impl IntoIterator<Item = &'a str>) -> Self {
        let mut ws: Vec<String> = words.into_iter().map(str::to_lowercase).collect();
        ws.sort();
        ws.dedup();
        ws.retain(|w| w != "<unk>");
        ws.insert(0, "<unk>".to_string());
        Vocab::from(ws)
    }

    /// Vocabulary over the question tokens and schema name words of a set of inputs.
    pub fn from_inputs<'a>(inputs: impl IntoIterator<Item = &'a PrunerInput>) -> Self {
        let mut words = Vec::new();
        for input in inputs {
            words.extend(input.question.iter().map(String::as_str));
            for u in &input.units {
                if let InputUnit::NameWord { word, .. } = u {
                    words.push(word.as_str());
                }
            }
        }
        Vocab::build(words)
    }

    pub fn id(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(UNK)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossEncoderConfig {
    pub dim: usize,
    pub ff_dim: usize,
    pub heads: usize,
    pub layers: usize,
    pub max_len: usize,
    pub init_bound: f64,
    pub seed: u64,
}

impl Default for CrossEncoderConfig {
    fn default() -> Self {
        CrossEncoderConfig {
            dim: 64,
            ff_dim: 128,
            heads: 4,
            layers: 2,
            max_len: 256,
            init_bound: 0.05,
            seed: 7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossEncoderParams {
    pub embed: Mat,
    pub pos: Mat,
    /// One row per lexical match level.
    pub match_embed: Mat,
    pub stack: Stack,
    pub table_head: Mat,
    pub table_bias: Mat,
    pub column_head: Mat,
    pub column_bias: Mat,
}

impl Parameters for CrossEncoderParams {
    fn tensors(&self) -> Vec<&Mat> {
        let mut t = vec![&self.embed, &self.pos, &self.match_embed];
        t.extend(self.stack.tensors());
        t.extend([&self.table_head, &self.table_bias, &self.column_head, &self.column_bias]);
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut Mat> {
        let mut t = vec![&mut self.embed, &mut self.pos, &mut self.match_embed];
        t.extend(self.stack.tensors_mut());
        t.extend([
            &mut self.table_head,
            &mut self.table_bias,
            &mut self.column_head,
            &mut self.column_bias,
        ]);
        t
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossEncoder {
    pub config: CrossEncoderConfig,
    pub vocab: Vocab,
    pub params: CrossEncoderParams,
}

struct Forward {
    ids: Vec<Vec<usize>>,
    levels: Vec<usize>,
    caches: Vec<LayerCache>,
    states: Mat,
    markers: Vec<(usize, SchemaItem)>,
    logits: Vec<f64>,
}

impl CrossEncoder {
    pub fn new(config: CrossEncoderConfig, vocab: Vocab) -> Result<Self> {
        let stack_cfg = StackConfig {
            dim: config.dim,
            ff_dim: config.ff_dim,
            heads: config.heads,
            layers: config.layers,
            relations: 0,
        };
        stack_cfg.validate()?;
        if config.max_len == 0 {
            return Err(Error::Dimension("maximum sequence length must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let b = config.init_bound;
        let d = config.dim;
        let params = CrossEncoderParams {
            embed: uniform(&mut rng, vocab.len(), d, b),
            pos: uniform(&mut rng, config.max_len, d, b),
            match_embed: uniform(&mut rng, MATCH_LEVELS, d, b),
            stack: Stack::new(&mut rng, stack_cfg, b),
            table_head: uniform(&mut rng, d, 1, b),
            table_bias: Mat::zeros((1, 1)),
            column_head: uniform(&mut rng, d, 1, b),
            column_bias: Mat::zeros((1, 1)),
        };
        Ok(CrossEncoder { config, vocab, params })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self).expect("model serializes");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: CrossEncoder =
            serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        if model.params.embed.nrows() != model.vocab.len() {
            return Err(Error::Dimension(format!(
                "{}: {} embeddings for {} vocabulary words",
                path.display(),
                model.params.embed.nrows(),
                model.vocab.len()
            )));
        }
        Ok(model)
    }

    /// Vocabulary ids whose embeddings are averaged for each unit.
    fn unit_ids(&self, input: &PrunerInput) -> Vec<Vec<usize>> {
        input
            .units
            .iter()
            .map(|u| match u {
                InputUnit::Question { index } => vec![self.vocab.id(&input.question[*index])],
                InputUnit::NameWord { word, .. } => vec![self.vocab.id(word)],
                InputUnit::TableMarker { table } => self.word_ids(table),
                InputUnit::ColumnMarker { column } => self.word_ids(&column.column),
            })
            .collect()
    }

    fn word_ids(&self, name: &str) -> Vec<usize> {
        let ids: Vec<usize> = name_words(name).iter().map(|w| self.vocab.id(w)).collect();
        if ids.is_empty() {
            vec![UNK]
        } else {
            ids
        }
    }

    /// Unit states before positions are added: word embeddings for question tokens and
    /// name words, the mean of the item's name-word embeddings for markers.
    pub fn init_special_token_states(&self, input: &PrunerInput) -> Mat {
        let ids = self.unit_ids(input);
        self.embed_ids(&ids)
    }

    fn embed_ids(&self, ids: &[Vec<usize>]) -> Mat {
        let mut x = Mat::zeros((ids.len(), self.config.dim));
        for (i, group) in ids.iter().enumerate() {
            let mut row = x.row_mut(i);
            for &id in group {
                row += &self.params.embed.row(id);
            }
            row /= group.len() as f64;
        }
        x
    }

    fn position(&self, i: usize) -> usize {
        i.min(self.config.max_len - 1)
    }

    fn forward(&self, input: &PrunerInput) -> Result<Forward> {
        let ids = self.unit_ids(input);
        let levels = input.match_levels();
        let mut x = self.embed_ids(&ids);
        for (i, mut row) in x.rows_mut().into_iter().enumerate() {
            row += &self.params.pos.row(self.position(i));
            row += &self.params.match_embed.row(levels[i]);
        }
        let (states, caches) = self.params.stack.forward(&x, None)?;
        let markers = input.markers();
        let logits = markers
            .iter()
            .map(|(pos, item)| {
                let (w, b) = self.head(item);
                states.row(*pos).dot(&w.column(0)) + b[[0, 0]]
            })
            .collect();
        Ok(Forward {
            ids,
            levels,
            caches,
            states,
            markers,
            logits,
        })
    }

    fn head(&self, item: &SchemaItem) -> (&Mat, &Mat) {
        match item {
            SchemaItem::Table(_) => (&self.params.table_head, &self.params.table_bias),
            SchemaItem::Column(_) => (&self.params.column_head, &self.params.column_bias),
        }
    }

    fn backward(&self, fwd: &Forward, dlogits: &[f64], grad: &mut CrossEncoderParams) {
        let mut dstates = Mat::zeros(fwd.states.raw_dim());
        for ((pos, item), &g) in fwd.markers.iter().zip(dlogits) {
            let (w, _) = self.head(item);
            let (gw, gb) = match item {
                SchemaItem::Table(_) => (&mut grad.table_head, &mut grad.table_bias),
                SchemaItem::Column(_) => (&mut grad.column_head, &mut grad.column_bias),
            };
            gw.column_mut(0).scaled_add(g, &fwd.states.row(*pos));
            gb[[0, 0]] += g;
            dstates.row_mut(*pos).scaled_add(g, &w.column(0));
        }
        let dx = self.params.stack.backward(&dstates, &fwd.caches, None, &mut grad.stack);
        for (i, group) in fwd.ids.iter().enumerate() {
            let row = dx.row(i);
            grad.pos.row_mut(self.position(i)).scaled_add(1.0, &row);
            grad.match_embed.row_mut(fwd.levels[i]).scaled_add(1.0, &row);
            let share = 1.0 / group.len() as f64;
            for &id in group {
                grad.embed.row_mut(id).scaled_add(share, &row);
            }
        }
    }

    /// Relevance probability per item, plus last-layer attention from each marker to the
    /// question tokens: averaged over heads, renormalized over the question, then scaled
    /// so the row maximum is 1.
    pub fn score_relevance(&self, sample_id: &str, input: &PrunerInput) -> Result<RelevanceScores> {
        let fwd = self.forward(input)?;
        let q = input.question_len();
        let last = fwd.caches.last();
        let mut scores = RelevanceScores {
            sample_id: sample_id.to_string(),
            tables: IndexMap::new(),
            columns: IndexMap::new(),
        };
        for ((pos, item), &logit) in fwd.markers.iter().zip(&fwd.logits) {
            let mut row = vec![0.0; q];
            match last {
                Some(cache) => {
                    for h in 0..self.config.heads {
                        let a = cache.attention(h);
                        for (j, r) in row.iter_mut().enumerate() {
                            *r += a[[*pos, j]] / self.config.heads as f64;
                        }
                    }
                }
                None => row.fill(1.0),
            }
            let attention = normalize_attention(&row);
            let s = ItemScore {
                prob: sigmoid(logit),
                attention,
            };
            match item {
                SchemaItem::Table(t) => scores.tables.insert(t.clone(), s),
                SchemaItem::Column(c) => scores.columns.insert(c.clone(), s),
            };
        }
        Ok(scores)
    }
}

/// Renormalizes to sum 1, then divides by the maximum.
pub(crate) fn normalize_attention(row: &[f64]) -> Vec<f64> {
    let sum: f64 = row.iter().sum();
    if sum <= 0.0 {
        return vec![1.0; row.len()];
    }
    let normed: Vec<f64> = row.iter().map(|x| x / sum).collect();
    let max = normed.iter().copied().fold(0.0, f64::max);
    normed.iter().map(|x| x / max).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrunerExample {
    pub sample_id: String,
    pub input: PrunerInput,
    pub labels: RelevanceLabels,
}

impl PrunerExample {
    /// Input sequence and gold-derived labels for a sample with gold SQL.
    pub fn from_sample(sample: &Sample, db: &DatabaseSchema) -> Result<Self> {
        let tokens = tokenize_question(&sample.question)?;
        Ok(PrunerExample {
            sample_id: sample.id.clone(),
            input: build_input_sequence(&tokens, db),
            labels: derive_relevance_labels(sample.gold()?, db)?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrunerTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub seed: u64,
    pub threshold: f64,
}

impl Default for PrunerTrainConfig {
    fn default() -> Self {
        PrunerTrainConfig {
            epochs: 30,
            lr: 1e-3,
            batch: 8,
            seed: 7,
            threshold: super::DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf { precision, recall, f1 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PrunerMetrics {
    pub table: Prf,
    pub column: Prf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrunerTrainReport {
    /// Held-out metrics after the last epoch.
    pub metrics: PrunerMetrics,
    /// Mean training cross-entropy before training, then after each epoch.
    pub losses: Vec<f64>,
}

fn bce(p: f64, y: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

fn targets(fwd: &Forward, labels: &RelevanceLabels) -> Vec<f64> {
    fwd.markers
        .iter()
        .map(|(_, item)| if labels.contains(item) { 1.0 } else { 0.0 })
        .collect()
}

/// Mean per-marker cross-entropy of one example.
fn example_loss(model: &CrossEncoder, ex: &PrunerExample) -> Result<f64> {
    let fwd = model.forward(&ex.input)?;
    let ys = targets(&fwd, &ex.labels);
    let n = ys.len().max(1) as f64;
    Ok(fwd
        .logits
        .iter()
        .zip(&ys)
        .map(|(&z, &y)| bce(sigmoid(z), y))
        .sum::<f64>()
        / n)
}

pub fn mean_loss(model: &CrossEncoder, examples: &[PrunerExample]) -> Result<f64> {
    let mut total = 0.0;
    for ex in examples {
        total += example_loss(model, ex)?;
    }
    Ok(total / examples.len().max(1) as f64)
}

/// Micro-averaged precision, recall and F1 per item kind at `threshold`.
pub fn evaluate_pruner(model: &CrossEncoder, examples: &[PrunerExample], threshold: f64) -> Result<PrunerMetrics> {
    let mut counts = [[0usize; 3]; 2];
    for ex in examples {
        let fwd = model.forward(&ex.input)?;
        for ((_, item), &z) in fwd.markers.iter().zip(&fwd.logits) {
            let kind = usize::from(matches!(item, SchemaItem::Column(_)));
            let predicted = sigmoid(z) > threshold;
            match (predicted, ex.labels.contains(item)) {
                (true, true) => counts[kind][0] += 1,
                (true, false) => counts[kind][1] += 1,
                (false, true) => counts[kind][2] += 1,
                (false, false) => {}
            }
        }
    }
    let prf = |c: [usize; 3]| Prf::from_counts(c[0], c[1], c[2]);
    Ok(PrunerMetrics {
        table: prf(counts[0]),
        column: prf(counts[1]),
    })
}

/// Minibatch Adam on mean per-marker binary cross-entropy. The example order is
/// reshuffled every epoch from `cfg.seed`, so runs are reproducible.
pub fn train_pruner(
    model: &mut CrossEncoder,
    train: &[PrunerExample],
    held_out: &[PrunerExample],
    cfg: &PrunerTrainConfig,
) -> Result<PrunerTrainReport> {
    if train.is_empty() {
        return Err(Error::invalid("pruner training set is empty"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Adam::new(
        &model.params,
        AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        },
    );
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut losses = vec![mean_loss(model, train)?];
    let batch = cfg.batch.max(1);
    let mut step = 0;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let mut grad = model.params.zeros_like();
            let mut batch_loss = 0.0;
            for &i in chunk {
                let ex = &train[i];
                let fwd = model.forward(&ex.input)?;
                let ys = targets(&fwd, &ex.labels);
                let n = ys.len().max(1) as f64 * chunk.len() as f64;
                let mut dlogits = Vec::with_capacity(ys.len());
                for (&z, &y) in fwd.logits.iter().zip(&ys) {
                    let p = sigmoid(z);
                    batch_loss += bce(p, y) / n;
                    dlogits.push((p - y) / n);
                }
                model.backward(&fwd, &dlogits, &mut grad);
            }
            if !batch_loss.is_finite() || !grad.all_finite() {
                return Err(Error::NonFinite {
                    what: "pruner loss".into(),
                    step,
                });
            }
            opt.step(&mut model.params, &grad);
            step += 1;
        }
        losses.push(mean_loss(model, train)?);
    }
    Ok(PrunerTrainReport {
        metrics: evaluate_pruner(model, held_out, cfg.threshold)?,
        losses,
    })
}
