//! LLM clients, SQL generation, evaluation and the command-line driver.

use std::collections::HashMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::catalog::{Sample, SchemaCatalog, ValueMatches};
use crate::encoder::{hex_sha256, GraphEncoder};
use crate::error::{Error, Result};
use crate::linker::SchemaLinkGraph;
use crate::promptkit::{render_cot_demo, render_schema_block, render_test_block, PromptBundle};
use crate::retriever::{check_fingerprint, RetrievalIndex, UsefulnessProvider};
use crate::sqlkit::{categorize, parse_sql};

#[cfg(feature = "cli")]
pub mod cli;
pub mod config;
#[cfg(feature = "sqlite")]
pub mod eval;
#[cfg(feature = "sqlite")]
pub mod exec;
#[cfg(feature = "http")]
mod http;

#[cfg(feature = "http")]
pub use http::HttpClient;

pub const DEFAULT_TEMPERATURE: f64 = 0.5;
pub const DEFAULT_MAX_TOKENS: usize = 256;

pub trait LlmClient {
    fn complete(&self, prompt: &str, temperature: f64, max_tokens: usize) -> Result<String>;
    /// Per-token log-probabilities of `continuation` given `prompt`.
    fn loglikelihood(&self, prompt: &str, continuation: &str) -> Result<Vec<f64>>;
}

/// Canned completions keyed by the SHA-256 of the prompt.
#[derive(Clone, Debug, Default)]
pub struct StubClient {
    responses: HashMap<String, String>,
    fallback: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StubRecord {
    pub prompt_sha256: String,
    pub text: String,
}

impl StubClient {
    pub fn new(fallback: Option<String>) -> Self {
        StubClient {
            responses: HashMap::new(),
            fallback,
        }
    }

    pub fn insert(&mut self, prompt: &str, text: impl Into<String>) {
        self.responses.insert(prompt_hash(prompt), text.into());
    }

    /// JSONL of `{"prompt_sha256", "text"}` records.
    pub fn parse(text: &str, fallback: Option<String>) -> Result<Self> {
        let mut stub = StubClient::new(fallback);
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let r: StubRecord =
                serde_json::from_str(line).map_err(|e| Error::json(format!("stub line {}", i + 1), e))?;
            stub.responses.insert(r.prompt_sha256, r.text);
        }
        Ok(stub)
    }
}

pub fn prompt_hash(prompt: &str) -> String {
    hex_sha256(prompt.as_bytes())
}

impl LlmClient for StubClient {
    fn complete(&self, prompt: &str, _temperature: f64, _max_tokens: usize) -> Result<String> {
        let key = prompt_hash(prompt);
        self.responses
            .get(&key)
            .or(self.fallback.as_ref())
            .cloned()
            .ok_or_else(|| Error::Llm(format!("stub has no response for prompt {key}")))
    }

    /// One value in [-2, 0] per whitespace token, derived from the hash of both texts.
    fn loglikelihood(&self, prompt: &str, continuation: &str) -> Result<Vec<f64>> {
        let digest = hex_sha256(format!("{prompt}\u{0}{continuation}").as_bytes());
        let bytes: Vec<u8> = (0..digest.len() / 2)
            .map(|i| u8::from_str_radix(&digest[2 * i..2 * i + 2], 16).expect("hex digest"))
            .collect();
        let n = continuation.split_whitespace().count().max(1);
        Ok((0..n)
            .map(|i| -2.0 * f64::from(bytes[i % bytes.len()]) / 255.0)
            .collect())
    }
}

/// Answers with the gold SQL of the last demonstration in the prompt.
#[derive(Clone, Copy, Debug, Default)]
pub struct EchoClient;

impl LlmClient for EchoClient {
    fn complete(&self, prompt: &str, _temperature: f64, _max_tokens: usize) -> Result<String> {
        let (_, rest) = prompt
            .rsplit_once("### SQL:")
            .ok_or_else(|| Error::Llm("echo: prompt has no demonstration".into()))?;
        let line = rest.lines().next().unwrap_or("").trim();
        let sql = line.strip_suffix(';').unwrap_or(line).trim_end();
        Ok(format!("{sql};"))
    }

    /// 0 for continuation words present in the prompt, -3 for the rest.
    fn loglikelihood(&self, prompt: &str, continuation: &str) -> Result<Vec<f64>> {
        let lower = prompt.to_lowercase();
        let lp = continuation
            .split_whitespace()
            .map(|w| if lower.contains(&w.to_lowercase()) { 0.0 } else { -3.0 })
            .collect::<Vec<_>>();
        Ok(if lp.is_empty() { vec![0.0] } else { lp })
    }
}

/// The SQL inside a completion: code fences removed, then from the first `SELECT`
/// (any case) to the first `;` or the end.
pub fn extract_sql(completion: &str) -> Option<String> {
    let text: String = completion
        .lines()
        .filter(|l| !l.trim_start().starts_with("```"))
        .collect::<Vec<_>>()
        .join("\n");
    let start = text.to_ascii_uppercase().find("SELECT")?;
    let body = &text[start..];
    let end = body.find(';').unwrap_or(body.len());
    let sql = body[..end].trim();
    (!sql.is_empty()).then(|| sql.to_string())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerateConfig {
    pub temperature: f64,
    pub max_tokens: usize,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig {
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }
}

pub fn generate(client: &dyn LlmClient, bundle: &PromptBundle, cfg: &GenerateConfig) -> Result<String> {
    let text = client.complete(&bundle.full_text, cfg.temperature, cfg.max_tokens)?;
    if text.trim().is_empty() {
        return Err(Error::Llm("empty completion".into()));
    }
    extract_sql(&text).ok_or_else(|| Error::Llm("completion contains no SELECT".into()))
}

/// How per-token log-probabilities turn into one usefulness score.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LikelihoodNorm {
    #[default]
    MeanPerToken,
    Sum,
}

/// Usefulness as the likelihood of the anchor's gold SQL when the candidate is shown
/// as the only demonstration. The anchor graph enters as its pruned schema block.
pub struct LlmUsefulness<'a> {
    pub client: &'a dyn LlmClient,
    pub catalog: &'a SchemaCatalog,
    pub norm: LikelihoodNorm,
}

impl LlmUsefulness<'_> {
    pub fn prompt(&self, anchor: &Sample, anchor_graph: &SchemaLinkGraph, candidate: &Sample) -> Result<String> {
        let db = self.catalog.require(&candidate.db_id)?;
        let category = categorize(&parse_sql(candidate.gold()?, None)?.root);
        let demo = render_cot_demo(candidate, category, &render_schema_block(db, &ValueMatches::new()))?;
        let test = render_test_block(
            &anchor.question,
            &anchor_graph.pruned_schema,
            &anchor_graph.value_matches,
        );
        Ok(format!("{demo}\n\n{test}\n### SQL:"))
    }
}

impl UsefulnessProvider for LlmUsefulness<'_> {
    fn score(&mut self, anchor: &Sample, anchor_graph: &SchemaLinkGraph, candidate: &Sample) -> Result<f64> {
        let prompt = self.prompt(anchor, anchor_graph, candidate)?;
        let lp = self.client.loglikelihood(&prompt, &format!(" {}", anchor.gold()?))?;
        if lp.is_empty() || lp.iter().any(|x| !x.is_finite()) {
            return Err(Error::Llm("log-probabilities are empty or non-finite".into()));
        }
        let total: f64 = lp.iter().sum();
        let log_score = match self.norm {
            LikelihoodNorm::MeanPerToken => total / lp.len() as f64,
            LikelihoodNorm::Sum => total,
        };
        Ok(log_score.exp().clamp(0.0, 1.0))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub queries: usize,
    pub k: usize,
    pub index_size: usize,
    pub mean_seconds: f64,
    pub p95_seconds: f64,
}

/// Wall-clock time of embedding each query graph and searching the index.
pub fn measure_retrieval_latency(
    index: &RetrievalIndex,
    queries: &[SchemaLinkGraph],
    encoder: &GraphEncoder,
    k: usize,
) -> Result<LatencyReport> {
    if queries.is_empty() {
        return Err(Error::invalid("empty query set"));
    }
    check_fingerprint(index, encoder)?;
    let mut times = Vec::with_capacity(queries.len());
    for g in queries {
        let start = Instant::now();
        let q = encoder.encode(g)?;
        std::hint::black_box(index.top_k(&q.vector, k)?);
        times.push(start.elapsed().as_secs_f64());
    }
    let mean = times.iter().sum::<f64>() / times.len() as f64;
    times.sort_by(f64::total_cmp);
    let p95 = times[(times.len() * 95).div_ceil(100) - 1];
    Ok(LatencyReport {
        queries: queries.len(),
        k,
        index_size: index.len(),
        mean_seconds: mean,
        p95_seconds: p95,
    })
}
