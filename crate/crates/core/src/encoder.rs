//! Relation-aware graph encoder: one embedding per schema link graph.

use std::io::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::catalog::name_words;
use crate::error::{Error, Result};
use crate::linker::{EdgeType, GraphNode, SchemaLinkGraph};
use crate::nn::{uniform, LayerCache, Mat, Parameters, RelMatrix, Stack, StackConfig};
use crate::pruner::{Vocab, UNK};

/// Fixed bijection between edge types and relation ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationVocabulary {
    types: Vec<EdgeType>,
}

impl Default for RelationVocabulary {
    fn default() -> Self {
        RelationVocabulary { types: EdgeType::all() }
    }
}

impl RelationVocabulary {
    pub fn id(&self, t: EdgeType) -> Result<usize> {
        self.types
            .iter()
            .position(|&x| x == t)
            .ok_or_else(|| Error::invalid(format!("edge type {t} has no relation id")))
    }

    pub fn edge_type(&self, id: usize) -> Option<EdgeType> {
        self.types.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }
}

/// Whether `new` should replace `old` for the ordered pair `(src, dst)`. Equal
/// priorities only arise for a kind and its own inverse (two foreign keys pointing
/// at each other); the forward type wins on the pair with `src < dst`.
fn outranks(new: EdgeType, old: EdgeType, src: usize, dst: usize) -> bool {
    let forward_side = |t: EdgeType| t.is_inverse() == (src > dst);
    new.priority() > old.priority() || (new.priority() == old.priority() && forward_side(new) && !forward_side(old))
}

/// Relation id for every ordered node pair: the highest-priority edge between them,
/// `SelfLoop` on the diagonal, `NoRelation` elsewhere.
pub fn relation_matrix(g: &SchemaLinkGraph, vocab: &RelationVocabulary) -> Result<RelMatrix> {
    let n = g.nodes.len();
    let mut best = vec![vec![EdgeType::NoRelation; n]; n];
    for &(s, d, t) in &g.edges {
        if s >= n || d >= n {
            return Err(Error::invalid(format!("edge ({s}, {d}) outside a graph of {n} nodes")));
        }
        if s != d && outranks(t, best[s][d], s, d) {
            best[s][d] = t;
        }
    }
    let mut m = RelMatrix::zeros((n, n));
    for i in 0..n {
        best[i][i] = EdgeType::SelfLoop;
        for j in 0..n {
            m[[i, j]] = vocab.id(best[i][j])?;
        }
    }
    Ok(m)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub dim: usize,
    pub ff_dim: usize,
    pub heads: usize,
    pub layers: usize,
    pub init_bound: f64,
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            dim: 64,
            ff_dim: 128,
            heads: 4,
            layers: 2,
            init_bound: 0.05,
            seed: 7,
        }
    }
}

const NODE_KINDS: usize = 3;

fn kind_index(n: &GraphNode) -> usize {
    match n {
        GraphNode::Token { .. } => 0,
        GraphNode::Table { .. } => 1,
        GraphNode::Column { .. } => 2,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub kind_embed: Mat,
    pub word_embed: Mat,
    pub stack: Stack,
}

impl Parameters for EncoderParams {
    fn tensors(&self) -> Vec<&Mat> {
        let mut t = vec![&self.kind_embed, &self.word_embed];
        t.extend(self.stack.tensors());
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut Mat> {
        let mut t = vec![&mut self.kind_embed, &mut self.word_embed];
        t.extend(self.stack.tensors_mut());
        t
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphEmbedding {
    pub sample_id: String,
    pub vector: Vec<f64>,
}

/// Dot product.
pub fn similarity(a: &GraphEmbedding, b: &GraphEmbedding) -> Result<f64> {
    dot(&a.vector, &b.vector)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "cannot compare embeddings of dimension {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).sum())
}

/// Intermediate values of one forward pass, consumed by [`GraphEncoder::backward`].
pub struct EncodeTrace {
    words: Vec<Vec<usize>>,
    kinds: Vec<usize>,
    rel: RelMatrix,
    caches: Vec<LayerCache>,
    pub embedding: GraphEmbedding,
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    dim: usize,
    ff_dim: usize,
    layers: usize,
    heads: usize,
    relations: usize,
    init_bound: f64,
    seed: u64,
    vocab: Vocab,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphEncoder {
    pub config: EncoderConfig,
    pub vocab: Vocab,
    pub relations: RelationVocabulary,
    pub params: EncoderParams,
}

impl GraphEncoder {
    pub fn new(config: EncoderConfig, vocab: Vocab) -> Result<Self> {
        let relations = RelationVocabulary::default();
        let stack_cfg = StackConfig {
            dim: config.dim,
            ff_dim: config.ff_dim,
            heads: config.heads,
            layers: config.layers,
            relations: relations.len(),
        };
        stack_cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let b = config.init_bound;
        let params = EncoderParams {
            kind_embed: uniform(&mut rng, NODE_KINDS, config.dim, b),
            word_embed: uniform(&mut rng, vocab.len(), config.dim, b),
            stack: Stack::new(&mut rng, stack_cfg, b),
        };
        Ok(GraphEncoder {
            config,
            vocab,
            relations,
            params,
        })
    }

    /// Vocabulary over the lexical words of every node.
    pub fn vocab_for<'a>(graphs: impl IntoIterator<Item = &'a SchemaLinkGraph>) -> Vocab {
        let words: Vec<String> = graphs
            .into_iter()
            .flat_map(|g| g.nodes.iter().flat_map(|n| name_words(n.text())))
            .collect();
        Vocab::build(words.iter().map(String::as_str))
    }

    fn node_words(&self, n: &GraphNode) -> Vec<usize> {
        let ids: Vec<usize> = name_words(n.text()).iter().map(|w| self.vocab.id(w)).collect();
        if ids.is_empty() {
            vec![UNK]
        } else {
            ids
        }
    }

    /// Kind embedding plus the mean embedding of the node's words.
    pub fn initial_states(&self, g: &SchemaLinkGraph) -> Mat {
        let mut x = Mat::zeros((g.nodes.len(), self.config.dim));
        for (i, n) in g.nodes.iter().enumerate() {
            let ids = self.node_words(n);
            let mut row = x.row_mut(i);
            for &id in &ids {
                row += &self.params.word_embed.row(id);
            }
            row /= ids.len() as f64;
            row += &self.params.kind_embed.row(kind_index(n));
        }
        x
    }

    pub fn forward(&self, g: &SchemaLinkGraph) -> Result<EncodeTrace> {
        if g.nodes.is_empty() {
            return Err(Error::invalid(format!("graph `{}` has no nodes", g.sample_id)));
        }
        let rel = relation_matrix(g, &self.relations)?;
        let x = self.initial_states(g);
        let (h, caches) = self.params.stack.forward(&x, Some(&rel))?;
        let vector = h.mean_axis(ndarray::Axis(0)).expect("non-empty").to_vec();
        Ok(EncodeTrace {
            words: g.nodes.iter().map(|n| self.node_words(n)).collect(),
            kinds: g.nodes.iter().map(kind_index).collect(),
            rel,
            caches,
            embedding: GraphEmbedding {
                sample_id: g.sample_id.clone(),
                vector,
            },
        })
    }

    pub fn encode(&self, g: &SchemaLinkGraph) -> Result<GraphEmbedding> {
        Ok(self.forward(g)?.embedding)
    }

    /// Adds the parameter gradients for upstream gradient `dvec` on the embedding to `grad`.
    pub fn backward(&self, trace: &EncodeTrace, dvec: &[f64], grad: &mut EncoderParams) -> Result<()> {
        if dvec.len() != self.config.dim {
            return Err(Error::Dimension(format!(
                "upstream gradient has {} entries, embedding has {}",
                dvec.len(),
                self.config.dim
            )));
        }
        let n = trace.kinds.len();
        let mut dh = Mat::zeros((n, self.config.dim));
        for mut row in dh.rows_mut() {
            for (r, &g) in row.iter_mut().zip(dvec) {
                *r = g / n as f64;
            }
        }
        let dx = self
            .params
            .stack
            .backward(&dh, &trace.caches, Some(&trace.rel), &mut grad.stack);
        for (i, ids) in trace.words.iter().enumerate() {
            let row = dx.row(i);
            grad.kind_embed.row_mut(trace.kinds[i]).scaled_add(1.0, &row);
            let share = 1.0 / ids.len() as f64;
            for &id in ids {
                grad.word_embed.row_mut(id).scaled_add(share, &row);
            }
        }
        Ok(())
    }

    /// Parameter gradients of `dvec · encode(g)`.
    pub fn encode_backward(&self, g: &SchemaLinkGraph, dvec: &[f64]) -> Result<EncoderParams> {
        let trace = self.forward(g)?;
        let mut grad = self.params.zeros_like();
        self.backward(&trace, dvec, &mut grad)?;
        Ok(grad)
    }

    pub fn checkpoint_bytes(&self) -> Vec<u8> {
        let header = CheckpointHeader {
            dim: self.config.dim,
            ff_dim: self.config.ff_dim,
            layers: self.config.layers,
            heads: self.config.heads,
            relations: self.relations.len(),
            init_bound: self.config.init_bound,
            seed: self.config.seed,
            vocab: self.vocab.clone(),
        };
        let head = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(8 + head.len() + 8 * self.params.param_count());
        out.extend_from_slice(&(head.len() as u64).to_le_bytes());
        out.extend_from_slice(&head);
        for t in self.params.tensors() {
            for v in t.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<Self> {
        let truncated = || Error::invalid("encoder checkpoint is truncated");
        let len_bytes: [u8; 8] = bytes.get(..8).ok_or_else(truncated)?.try_into().expect("8 bytes");
        let head_len = u64::from_le_bytes(len_bytes) as usize;
        let head = bytes.get(8..8usize.saturating_add(head_len)).ok_or_else(truncated)?;
        let h: CheckpointHeader = serde_json::from_slice(head).map_err(|e| Error::json("checkpoint header", e))?;
        let config = EncoderConfig {
            dim: h.dim,
            ff_dim: h.ff_dim,
            heads: h.heads,
            layers: h.layers,
            init_bound: h.init_bound,
            seed: h.seed,
        };
        let mut enc = GraphEncoder::new(config, h.vocab)?;
        if h.relations != enc.relations.len() {
            return Err(Error::Dimension(format!(
                "checkpoint has {} relations, this build knows {}",
                h.relations,
                enc.relations.len()
            )));
        }
        let body = &bytes[8 + head_len..];
        if body.len() != 8 * enc.params.param_count() {
            return Err(Error::Dimension(format!(
                "checkpoint body holds {} bytes, expected {}",
                body.len(),
                8 * enc.params.param_count()
            )));
        }
        let mut chunks = body.chunks_exact(8);
        for t in enc.params.tensors_mut() {
            for v in t.iter_mut() {
                *v = f64::from_le_bytes(chunks.next().expect("sized").try_into().expect("8 bytes"));
            }
        }
        if !enc.params.all_finite() {
            return Err(Error::invalid("encoder checkpoint contains non-finite weights"));
        }
        Ok(enc)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.checkpoint_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        GraphEncoder::from_checkpoint_bytes(&bytes)
    }

    /// SHA-256 of the checkpoint bytes, hex encoded.
    pub fn fingerprint(&self) -> String {
        hex_sha256(&self.checkpoint_bytes())
    }
}

pub(crate) fn hex_sha256(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_embeddings(embs: &[GraphEmbedding]) -> String {
    let mut out = Vec::new();
    for e in embs {
        serde_json::to_writer(&mut out, e).expect("embedding serializes");
        writeln!(out).expect("write to vec");
    }
    String::from_utf8(out).expect("JSON is UTF-8")
}

pub fn parse_embeddings(text: &str) -> Result<Vec<GraphEmbedding>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let e: GraphEmbedding =
            serde_json::from_str(line).map_err(|err| Error::json(format!("embedding line {}", i + 1), err))?;
        if !e.vector.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid(format!(
                "embedding `{}` has non-finite entries",
                e.sample_id
            )));
        }
        out.push(e);
    }
    Ok(out)
}
