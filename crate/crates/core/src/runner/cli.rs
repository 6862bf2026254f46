//! The `dcg` command line. Every subcommand reads an optional `--config` file whose keys
//! are flag names; flags win over the file.

use std::collections::{BTreeMap, HashMap};
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use super::config::Config;
use super::eval::{evaluate, parse_predictions, write_predictions, DemoGolds, EvalOptions, Prediction};
use super::{
    generate, measure_retrieval_latency, EchoClient, GenerateConfig, HttpClient, LikelihoodNorm, LlmClient,
    LlmUsefulness, StubClient, DEFAULT_MAX_TOKENS, DEFAULT_TEMPERATURE,
};
use crate::catalog::{
    load_catalog, load_dataset, sqlite_path, tokenize_question, write_dataset, Sample, SchemaCatalog, SqliteValueStore,
    ValueStore,
};
use crate::encoder::{EncoderConfig, GraphEncoder};
use crate::error::{Error, Result};
use crate::linker::{
    link_sample, parse_graphs, write_graphs, LinkConfig, SchemaLinkGraph, DEFAULT_TAU_COLUMN, DEFAULT_TAU_TABLE,
};
use crate::promptkit::{assemble_prompt, DemoInput, DemoOrder};
use crate::pruner::{
    build_input_sequence, parse_scores, train_pruner, write_scores, CrossEncoder, CrossEncoderConfig, PrunerExample,
    PrunerTrainConfig, Vocab, DEFAULT_THRESHOLD,
};
use crate::retriever::{
    build_index, retrieve_top_k, score_candidates, train_retriever, Caching, FileBacked, RetrievalIndex,
    RetrieverTrainConfig, ScoredCandidateSet, StubConstant, UsefulnessProvider, DEFAULT_K, DEFAULT_M_NEG,
    DEFAULT_M_POS,
};
use crate::sqlkit::MatchOptions;

#[derive(Parser, Debug)]
#[command(
    name = "dcg",
    version,
    about = "Graph-retrieved demonstrations for text-to-SQL prompting"
)]
struct Cli {
    /// Flat key = value file supplying defaults for any flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Validate a catalog and dataset and print a summary.
    Ingest(IngestArgs),
    /// Train the schema-relevance cross-encoder on samples with gold SQL.
    TrainPruner(TrainPrunerArgs),
    /// Write relevance scores from a trained pruner or a precomputed file.
    Score(ScoreArgs),
    /// Build schema link graphs.
    BuildGraphs(BuildGraphsArgs),
    /// Rank pool candidates for each anchor by usefulness.
    Rank(RankArgs),
    /// Train the graph encoder contrastively (zero epochs writes an untrained encoder).
    TrainRetriever(TrainRetrieverArgs),
    /// Embed pool graphs into a retrieval index.
    Index(IndexArgs),
    /// Retrieve the top-k demonstrations for each query graph.
    Retrieve(RetrieveArgs),
    /// Assemble few-shot prompts.
    Prompt(PromptArgs),
    /// Generate SQL for each prompt.
    Generate(GenerateArgs),
    /// Score predictions: execution accuracy, exact match, hardness breakdown.
    Evaluate(EvaluateArgs),
    /// Measure retrieval latency.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct IngestArgs {
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Check that every referenced database file exists.
    #[arg(long)]
    db_root: Option<PathBuf>,
    /// Write the normalized dataset here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainPrunerArgs {
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Fraction of samples held out for the reported metrics.
    #[arg(long)]
    holdout: Option<f64>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    heads: Option<usize>,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Trained pruner model.
    #[arg(long, conflicts_with = "from")]
    model: Option<PathBuf>,
    /// Precomputed scores JSONL, validated and rewritten.
    #[arg(long)]
    from: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BuildGraphsArgs {
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    scores: Option<PathBuf>,
    /// Databases for value matching; without it no values are matched.
    #[arg(long)]
    db_root: Option<PathBuf>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    tau_table: Option<f64>,
    #[arg(long)]
    tau_column: Option<f64>,
    #[arg(long)]
    no_value_edges: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RankArgs {
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Pool samples; each one is ranked against all the others.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    graphs: Option<PathBuf>,
    /// file | constant | llm
    #[arg(long)]
    provider: Option<String>,
    /// Usefulness JSONL for the file provider.
    #[arg(long)]
    usefulness: Option<PathBuf>,
    #[arg(long)]
    constant: Option<f64>,
    /// Usefulness cache for the llm provider, read if present and rewritten after.
    #[arg(long)]
    cache: Option<PathBuf>,
    #[command(flatten)]
    llm: LlmArgs,
    /// mean-per-token | sum
    #[arg(long)]
    likelihood_norm: Option<String>,
    #[arg(long)]
    m_pos: Option<usize>,
    #[arg(long)]
    m_neg: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainRetrieverArgs {
    #[arg(long)]
    graphs: Option<PathBuf>,
    /// Ranked candidate sets; required when epochs > 0.
    #[arg(long)]
    sets: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    ff_dim: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    heads: Option<usize>,
}

#[derive(Args, Debug)]
struct IndexArgs {
    #[arg(long)]
    graphs: Option<PathBuf>,
    #[arg(long)]
    encoder: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RetrieveArgs {
    #[arg(long)]
    index: Option<PathBuf>,
    #[arg(long)]
    encoder: Option<PathBuf>,
    /// Query graphs.
    #[arg(long)]
    graphs: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PromptArgs {
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Test samples.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Test graphs, for the pruned schema and value matches.
    #[arg(long)]
    graphs: Option<PathBuf>,
    #[arg(long)]
    pool: Option<PathBuf>,
    #[arg(long)]
    pool_graphs: Option<PathBuf>,
    /// Output of `retrieve`; without it prompts are zero-shot.
    #[arg(long)]
    demos: Option<PathBuf>,
    /// Show each demonstration's full schema instead of its pruned one.
    #[arg(long)]
    full_demo_schema: bool,
    /// most-similar-last | most-similar-first
    #[arg(long)]
    demo_order: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LlmArgs {
    /// http | stub | echo
    #[arg(long)]
    client: Option<String>,
    /// Base URL of the completion service (or env DCG_LLM_URL).
    #[arg(long)]
    llm_url: Option<String>,
    /// Canned stub responses JSONL.
    #[arg(long)]
    stub_file: Option<PathBuf>,
    /// Stub answer for prompts missing from the stub file.
    #[arg(long)]
    stub_default: Option<String>,
    #[arg(long)]
    llm_timeout_secs: Option<u64>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    prompts: Option<PathBuf>,
    #[command(flatten)]
    llm: LlmArgs,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    max_tokens: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    pred: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long)]
    db_root: Option<PathBuf>,
    /// Output of `retrieve`, for the average tree edit distance.
    #[arg(long, requires = "pool")]
    demos: Option<PathBuf>,
    #[arg(long)]
    pool: Option<PathBuf>,
    #[arg(long)]
    timeout_secs: Option<u64>,
    /// Compare literal values in exact match.
    #[arg(long)]
    em_compare_values: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long)]
    index: Option<PathBuf>,
    #[arg(long)]
    encoder: Option<PathBuf>,
    #[arg(long)]
    graphs: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `argv` (program name first) and runs it: 0 on success, 1 for usage and input
/// errors, 2 for internal failures.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_user_error() {
                1
            } else {
                2
            }
        }
    }
}

struct Ctx {
    cfg: Config,
}

impl Ctx {
    fn path(&self, key: &str, flag: Option<PathBuf>) -> Result<PathBuf> {
        self.cfg
            .resolve_opt(key, flag)?
            .ok_or_else(|| Error::invalid(format!("missing --{key}")))
    }

    fn opt_path(&self, key: &str, flag: Option<PathBuf>) -> Result<Option<PathBuf>> {
        self.cfg.resolve_opt(key, flag)
    }

    fn val<T: std::str::FromStr>(&self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.cfg.resolve(key, flag, default)
    }

    fn flag(&self, key: &str, set: bool) -> Result<bool> {
        self.val(key, set.then_some(true), false)
    }

    fn catalog(&self, flag: Option<PathBuf>) -> Result<SchemaCatalog> {
        load_catalog(self.path("catalog", flag)?)
    }

    fn client(&self, a: LlmArgs) -> Result<Box<dyn LlmClient>> {
        let kind = self.val("client", a.client, "http".to_string())?;
        match kind.as_str() {
            "echo" => Ok(Box::new(EchoClient)),
            "stub" => {
                let fallback = self.cfg.resolve_opt("stub-default", a.stub_default)?;
                match self.opt_path("stub-file", a.stub_file)? {
                    Some(p) => Ok(Box::new(StubClient::parse(&read(&p)?, fallback)?)),
                    None => Ok(Box::new(StubClient::new(fallback))),
                }
            }
            "http" => {
                let url = self
                    .cfg
                    .resolve_opt("llm-url", a.llm_url.or_else(|| std::env::var("DCG_LLM_URL").ok()))?
                    .ok_or_else(|| Error::invalid("the http client needs --llm-url or DCG_LLM_URL"))?;
                let timeout = self.val("llm-timeout-secs", a.llm_timeout_secs, 120)?;
                Ok(Box::new(HttpClient::new(
                    url,
                    std::env::var("DCG_LLM_TOKEN").ok(),
                    Duration::from_secs(timeout),
                )))
            }
            other => Err(Error::invalid(format!("unknown client `{other}` (http, stub, echo)"))),
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    items
        .iter()
        .map(|x| serde_json::to_string(x).expect("record serializes") + "\n")
        .collect()
}

fn from_jsonl<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> Result<Vec<T>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::json(format!("{what} line {}", i + 1), e)))
        .collect()
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("report serializes"));
}

fn load_graphs(path: &Path) -> Result<Vec<SchemaLinkGraph>> {
    parse_graphs(&read(path)?)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct RetrievedDemo {
    id: String,
    similarity: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct RetrievalRecord {
    sample_id: String,
    demos: Vec<RetrievedDemo>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct PromptRecord {
    id: String,
    demos: Vec<String>,
    token_estimate: usize,
    prompt: String,
}

fn execute(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let ctx = Ctx { cfg };
    match cli.cmd {
        Cmd::Ingest(a) => ingest(&ctx, a),
        Cmd::TrainPruner(a) => train_pruner_cmd(&ctx, a),
        Cmd::Score(a) => score(&ctx, a),
        Cmd::BuildGraphs(a) => build_graphs(&ctx, a),
        Cmd::Rank(a) => rank(&ctx, a),
        Cmd::TrainRetriever(a) => train_retriever_cmd(&ctx, a),
        Cmd::Index(a) => index(&ctx, a),
        Cmd::Retrieve(a) => retrieve(&ctx, a),
        Cmd::Prompt(a) => prompt(&ctx, a),
        Cmd::Generate(a) => generate_cmd(&ctx, a),
        Cmd::Evaluate(a) => evaluate_cmd(&ctx, a),
        Cmd::Bench(a) => bench(&ctx, a),
    }
}

fn ingest(ctx: &Ctx, a: IngestArgs) -> Result<()> {
    let catalog = ctx.catalog(a.catalog)?;
    let data = load_dataset(ctx.path("data", a.data)?, &catalog)?;
    if let Some(root) = ctx.opt_path("db-root", a.db_root)? {
        let mut seen = std::collections::BTreeSet::new();
        for s in &data {
            if seen.insert(s.db_id.as_str()) && !sqlite_path(&root, &s.db_id).is_file() {
                return Err(Error::invalid(format!(
                    "missing database file {}",
                    sqlite_path(&root, &s.db_id).display()
                )));
            }
        }
    }
    if let Some(out) = ctx.opt_path("out", a.out)? {
        write(&out, &write_dataset(&data))?;
    }
    let tables: usize = catalog.databases().map(|d| d.tables.len()).sum();
    let columns: usize = catalog.databases().map(|d| d.column_count()).sum();
    print_json(&serde_json::json!({
        "databases": catalog.len(),
        "tables": tables,
        "columns": columns,
        "samples": data.len(),
        "with_gold": data.iter().filter(|s| s.gold_sql.is_some()).count(),
    }));
    Ok(())
}

fn train_pruner_cmd(ctx: &Ctx, a: TrainPrunerArgs) -> Result<()> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    let catalog = ctx.catalog(a.catalog)?;
    let data = load_dataset(ctx.path("data", a.data)?, &catalog)?;
    let out = ctx.path("out", a.out)?;
    let tc = PrunerTrainConfig {
        epochs: ctx.val("epochs", a.epochs, 30)?,
        lr: ctx.val("lr", a.lr, 1e-3)?,
        batch: ctx.val("batch", a.batch, 8)?,
        seed: ctx.val("seed", a.seed, 7)?,
        threshold: ctx.val("threshold", a.threshold, DEFAULT_THRESHOLD)?,
    };
    let holdout = ctx.val("holdout", a.holdout, 0.2)?;
    if !(0.0..1.0).contains(&holdout) {
        return Err(Error::invalid(format!("--holdout {holdout} must be in [0, 1)")));
    }
    let mut examples = data
        .iter()
        .map(|s| PrunerExample::from_sample(s, catalog.require(&s.db_id)?))
        .collect::<Result<Vec<_>>>()?;
    examples.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(tc.seed));
    let n_held = (examples.len() as f64 * holdout).round() as usize;
    let held = examples.split_off(examples.len() - n_held);
    let defaults = CrossEncoderConfig::default();
    let mc = CrossEncoderConfig {
        dim: ctx.val("dim", a.dim, defaults.dim)?,
        layers: ctx.val("layers", a.layers, defaults.layers)?,
        heads: ctx.val("heads", a.heads, defaults.heads)?,
        seed: tc.seed,
        ..defaults
    };
    let mut model = CrossEncoder::new(mc, Vocab::from_inputs(examples.iter().map(|e| &e.input)))?;
    let report = train_pruner(&mut model, &examples, &held, &tc)?;
    model.save(&out)?;
    print_json(&report);
    Ok(())
}

fn score(ctx: &Ctx, a: ScoreArgs) -> Result<()> {
    let catalog = ctx.catalog(a.catalog)?;
    let data = load_dataset(ctx.path("data", a.data)?, &catalog)?;
    let out = ctx.path("out", a.out)?;
    let scores = match (ctx.opt_path("model", a.model)?, ctx.opt_path("from", a.from)?) {
        (Some(m), None) => {
            let model = CrossEncoder::load(&m)?;
            data.iter()
                .map(|s| {
                    let tokens = tokenize_question(&s.question)?;
                    model.score_relevance(&s.id, &build_input_sequence(&tokens, catalog.require(&s.db_id)?))
                })
                .collect::<Result<Vec<_>>>()?
        }
        (None, Some(f)) => parse_scores(&read(&f)?, &data, &catalog)?,
        _ => return Err(Error::invalid("give exactly one of --model and --from")),
    };
    write(&out, &write_scores(&scores))?;
    print_json(&serde_json::json!({ "scored": scores.len() }));
    Ok(())
}

fn build_graphs(ctx: &Ctx, a: BuildGraphsArgs) -> Result<()> {
    let catalog = ctx.catalog(a.catalog)?;
    let data = load_dataset(ctx.path("data", a.data)?, &catalog)?;
    let scores = parse_scores(&read(&ctx.path("scores", a.scores)?)?, &data, &catalog)?;
    let by_id: HashMap<&str, _> = scores.iter().map(|s| (s.sample_id.as_str(), s)).collect();
    let out = ctx.path("out", a.out)?;
    let threshold = ctx.val("threshold", a.threshold, DEFAULT_THRESHOLD)?;
    let cfg = LinkConfig {
        tau_table: ctx.val("tau-table", a.tau_table, DEFAULT_TAU_TABLE)?,
        tau_column: ctx.val("tau-column", a.tau_column, DEFAULT_TAU_COLUMN)?,
        value_edges: !ctx.flag("no-value-edges", a.no_value_edges)?,
    };
    let root = ctx.opt_path("db-root", a.db_root)?;
    let mut stores: HashMap<String, SqliteValueStore> = HashMap::new();
    let mut graphs = Vec::with_capacity(data.len());
    for s in &data {
        let sc = by_id
            .get(s.id.as_str())
            .ok_or_else(|| Error::invalid(format!("no relevance scores for sample `{}`", s.id)))?;
        if let Some(root) = &root {
            if !stores.contains_key(&s.db_id) {
                stores.insert(s.db_id.clone(), SqliteValueStore::open(root, &s.db_id)?);
            }
        }
        let store = stores.get(&s.db_id).map(|v| v as &dyn ValueStore);
        graphs.push(link_sample(s, catalog.require(&s.db_id)?, sc, store, threshold, &cfg)?);
    }
    write(&out, &write_graphs(&graphs))?;
    let edges: usize = graphs.iter().map(|g| g.edges.len()).sum();
    print_json(&serde_json::json!({ "graphs": graphs.len(), "edges": edges }));
    Ok(())
}

fn rank(ctx: &Ctx, a: RankArgs) -> Result<()> {
    let catalog = ctx.catalog(a.catalog)?;
    let pool = load_dataset(ctx.path("data", a.data)?, &catalog)?;
    let graphs = load_graphs(&ctx.path("graphs", a.graphs)?)?;
    let by_id: HashMap<&str, &SchemaLinkGraph> = graphs.iter().map(|g| (g.sample_id.as_str(), g)).collect();
    let out = ctx.path("out", a.out)?;
    let m_pos = ctx.val("m-pos", a.m_pos, DEFAULT_M_POS)?;
    let m_neg = ctx.val("m-neg", a.m_neg, DEFAULT_M_NEG)?;
    let kind = ctx.val("provider", a.provider, "file".to_string())?;

    let cache_path = ctx.opt_path("cache", a.cache)?;
    let client;
    let mut provider: Box<dyn UsefulnessProvider> = match kind.as_str() {
        "file" => Box::new(FileBacked::parse(&read(&ctx.path("usefulness", a.usefulness)?)?)?),
        "constant" => Box::new(StubConstant(ctx.val("constant", a.constant, 0.5)?)),
        "llm" => {
            client = ctx.client(a.llm)?;
            let norm = match ctx
                .val("likelihood-norm", a.likelihood_norm, "mean-per-token".to_string())?
                .as_str()
            {
                "mean-per-token" => LikelihoodNorm::MeanPerToken,
                "sum" => LikelihoodNorm::Sum,
                other => return Err(Error::invalid(format!("unknown likelihood norm `{other}`"))),
            };
            let cache = match &cache_path {
                Some(p) if p.is_file() => FileBacked::parse(&read(p)?)?,
                _ => FileBacked::default(),
            };
            Box::new(Caching {
                inner: LlmUsefulness {
                    client: client.as_ref(),
                    catalog: &catalog,
                    norm,
                },
                cache,
            })
        }
        other => {
            return Err(Error::invalid(format!(
                "unknown provider `{other}` (file, constant, llm)"
            )))
        }
    };

    let mut sets: Vec<ScoredCandidateSet> = Vec::with_capacity(pool.len());
    let mut cache = FileBacked::default();
    for anchor in &pool {
        let g = by_id
            .get(anchor.id.as_str())
            .ok_or_else(|| Error::invalid(format!("no graph for sample `{}`", anchor.id)))?;
        let set = score_candidates(anchor, g, &pool, provider.as_mut(), m_pos, m_neg)?;
        for (c, s) in &set.ranked {
            cache.insert(&anchor.id, c, *s);
        }
        sets.push(set);
    }
    if let (Some(p), "llm") = (&cache_path, kind.as_str()) {
        write(p, &cache.to_jsonl())?;
    }
    write(&out, &to_jsonl(&sets))?;
    print_json(&serde_json::json!({ "anchors": sets.len(), "m_pos": m_pos, "m_neg": m_neg }));
    Ok(())
}

fn train_retriever_cmd(ctx: &Ctx, a: TrainRetrieverArgs) -> Result<()> {
    let graphs = load_graphs(&ctx.path("graphs", a.graphs)?)?;
    let out = ctx.path("out", a.out)?;
    let d = RetrieverTrainConfig::default();
    let tc = RetrieverTrainConfig {
        epochs: ctx.val("epochs", a.epochs, d.epochs)?,
        lr: ctx.val("lr", a.lr, d.lr)?,
        batch: ctx.val("batch", a.batch, d.batch)?,
        temperature: ctx.val("temperature", a.temperature, d.temperature)?,
        seed: ctx.val("seed", a.seed, d.seed)?,
    };
    let sets: Vec<ScoredCandidateSet> = match ctx.opt_path("sets", a.sets)? {
        Some(p) => from_jsonl(&read(&p)?, "candidate sets")?,
        None if tc.epochs == 0 => Vec::new(),
        None => return Err(Error::invalid("training needs --sets (or --epochs 0)")),
    };
    let ed = EncoderConfig::default();
    let ec = EncoderConfig {
        dim: ctx.val("dim", a.dim, ed.dim)?,
        ff_dim: ctx.val("ff-dim", a.ff_dim, ed.ff_dim)?,
        layers: ctx.val("layers", a.layers, ed.layers)?,
        heads: ctx.val("heads", a.heads, ed.heads)?,
        seed: tc.seed,
        ..ed
    };
    let mut enc = GraphEncoder::new(ec, GraphEncoder::vocab_for(&graphs))?;
    let report = train_retriever(&mut enc, &graphs, &sets, &tc)?;
    enc.save(&out)?;
    print_json(&serde_json::json!({ "losses": report.losses, "fingerprint": enc.fingerprint() }));
    Ok(())
}

fn index(ctx: &Ctx, a: IndexArgs) -> Result<()> {
    let graphs = load_graphs(&ctx.path("graphs", a.graphs)?)?;
    let enc = GraphEncoder::load(ctx.path("encoder", a.encoder)?)?;
    let out = ctx.path("out", a.out)?;
    let idx = build_index(&graphs, &enc)?;
    write(&out, &idx.to_jsonl())?;
    print_json(&serde_json::json!({ "entries": idx.len(), "fingerprint": idx.fingerprint }));
    Ok(())
}

fn retrieve(ctx: &Ctx, a: RetrieveArgs) -> Result<()> {
    let idx = RetrievalIndex::parse(&read(&ctx.path("index", a.index)?)?)?;
    let enc = GraphEncoder::load(ctx.path("encoder", a.encoder)?)?;
    let graphs = load_graphs(&ctx.path("graphs", a.graphs)?)?;
    let k = ctx.val("k", a.k, DEFAULT_K)?;
    let out = ctx.path("out", a.out)?;
    let mut records = Vec::with_capacity(graphs.len());
    for g in &graphs {
        let top = retrieve_top_k(&idx, g, &enc, k)?;
        records.push(RetrievalRecord {
            sample_id: g.sample_id.clone(),
            demos: top
                .into_iter()
                .map(|(id, similarity)| RetrievedDemo { id, similarity })
                .collect(),
        });
    }
    write(&out, &to_jsonl(&records))?;
    print_json(&serde_json::json!({ "queries": records.len(), "k": k }));
    Ok(())
}

fn prompt(ctx: &Ctx, a: PromptArgs) -> Result<()> {
    let catalog = ctx.catalog(a.catalog)?;
    let data = load_dataset(ctx.path("data", a.data)?, &catalog)?;
    let graphs = load_graphs(&ctx.path("graphs", a.graphs)?)?;
    let graph_of: HashMap<&str, &SchemaLinkGraph> = graphs.iter().map(|g| (g.sample_id.as_str(), g)).collect();
    let out = ctx.path("out", a.out)?;
    let full_demo_schema = ctx.flag("full-demo-schema", a.full_demo_schema)?;
    let order = match ctx
        .val("demo-order", a.demo_order, "most-similar-last".to_string())?
        .as_str()
    {
        "most-similar-last" => DemoOrder::MostSimilarLast,
        "most-similar-first" => DemoOrder::MostSimilarFirst,
        other => return Err(Error::invalid(format!("unknown demo order `{other}`"))),
    };

    let retrieved: BTreeMap<String, Vec<String>> = match ctx.opt_path("demos", a.demos)? {
        Some(p) => from_jsonl::<RetrievalRecord>(&read(&p)?, "retrieval")?
            .into_iter()
            .map(|r| (r.sample_id, r.demos.into_iter().map(|d| d.id).collect()))
            .collect(),
        None => BTreeMap::new(),
    };
    let (pool, pool_graphs) = if retrieved.is_empty() {
        (Vec::new(), Vec::new())
    } else {
        let pool = load_dataset(ctx.path("pool", a.pool)?, &catalog)?;
        let pg = if full_demo_schema {
            Vec::new()
        } else {
            load_graphs(&ctx.path("pool-graphs", a.pool_graphs)?)?
        };
        (pool, pg)
    };
    let pool_by_id: HashMap<&str, &Sample> = pool.iter().map(|s| (s.id.as_str(), s)).collect();
    let pool_graph_of: HashMap<&str, &SchemaLinkGraph> =
        pool_graphs.iter().map(|g| (g.sample_id.as_str(), g)).collect();

    let mut records = Vec::with_capacity(data.len());
    for s in &data {
        let g = graph_of
            .get(s.id.as_str())
            .ok_or_else(|| Error::invalid(format!("no graph for sample `{}`", s.id)))?;
        let ids = retrieved.get(&s.id).cloned().unwrap_or_default();
        let mut demos = Vec::with_capacity(ids.len());
        for id in &ids {
            let d = pool_by_id
                .get(id.as_str())
                .ok_or_else(|| Error::invalid(format!("retrieved demonstration `{id}` is not in the pool")))?;
            let (schema, matches) = if full_demo_schema {
                (catalog.require(&d.db_id)?.clone(), Default::default())
            } else {
                let dg = pool_graph_of
                    .get(id.as_str())
                    .ok_or_else(|| Error::invalid(format!("no pool graph for `{id}`")))?;
                (dg.pruned_schema.clone(), dg.value_matches.clone())
            };
            demos.push(DemoInput {
                sample: (*d).clone(),
                schema,
                matches,
            });
        }
        let bundle = assemble_prompt(&demos, s, &g.pruned_schema, &g.value_matches, order)?;
        records.push(PromptRecord {
            id: s.id.clone(),
            demos: ids,
            token_estimate: bundle.token_estimate,
            prompt: bundle.full_text,
        });
    }
    write(&out, &to_jsonl(&records))?;
    let tokens: usize = records.iter().map(|r| r.token_estimate).sum();
    print_json(&serde_json::json!({ "prompts": records.len(), "token_estimate": tokens }));
    Ok(())
}

fn generate_cmd(ctx: &Ctx, a: GenerateArgs) -> Result<()> {
    let prompts: Vec<PromptRecord> = from_jsonl(&read(&ctx.path("prompts", a.prompts)?)?, "prompts")?;
    let out = ctx.path("out", a.out)?;
    let gc = GenerateConfig {
        temperature: ctx.val("temperature", a.temperature, DEFAULT_TEMPERATURE)?,
        max_tokens: ctx.val("max-tokens", a.max_tokens, DEFAULT_MAX_TOKENS)?,
    };
    let client = ctx.client(a.llm)?;
    let mut preds = Vec::with_capacity(prompts.len());
    let mut failed = 0;
    for p in &prompts {
        let bundle = crate::promptkit::PromptBundle {
            demonstrations: Vec::new(),
            test_block: String::new(),
            full_text: p.prompt.clone(),
            token_estimate: p.token_estimate,
        };
        let sql = match generate(client.as_ref(), &bundle, &gc) {
            Ok(sql) => sql,
            Err(e @ Error::Llm(_)) => {
                eprintln!("warning: `{}`: {e}", p.id);
                failed += 1;
                String::new()
            }
            Err(e) => return Err(e),
        };
        preds.push(Prediction { id: p.id.clone(), sql });
    }
    write(&out, &write_predictions(&preds))?;
    print_json(&serde_json::json!({ "predictions": preds.len(), "failed": failed }));
    Ok(())
}

fn evaluate_cmd(ctx: &Ctx, a: EvaluateArgs) -> Result<()> {
    let catalog = ctx.catalog(a.catalog)?;
    let data = load_dataset(ctx.path("data", a.data)?, &catalog)?;
    let preds = parse_predictions(&read(&ctx.path("pred", a.pred)?)?)?;
    let root = ctx.path("db-root", a.db_root)?;
    let opts = EvalOptions {
        timeout: Duration::from_secs(ctx.val("timeout-secs", a.timeout_secs, 30)?),
        matching: MatchOptions {
            compare_values: ctx.flag("em-compare-values", a.em_compare_values)?,
        },
    };
    let demos: Option<DemoGolds> = match ctx.opt_path("demos", a.demos)? {
        Some(p) => {
            let pool = load_dataset(ctx.path("pool", a.pool)?, &catalog)?;
            let gold_of: HashMap<&str, &Sample> = pool.iter().map(|s| (s.id.as_str(), s)).collect();
            let mut map = DemoGolds::new();
            for r in from_jsonl::<RetrievalRecord>(&read(&p)?, "retrieval")? {
                let mut golds = Vec::with_capacity(r.demos.len());
                for d in &r.demos {
                    let s = gold_of.get(d.id.as_str()).ok_or_else(|| {
                        Error::invalid(format!("retrieved demonstration `{}` is not in the pool", d.id))
                    })?;
                    golds.push(s.gold()?.to_string());
                }
                map.insert(r.sample_id, golds);
            }
            Some(map)
        }
        None => None,
    };
    let report = evaluate(&data, &preds, &catalog, &root, demos.as_ref(), &opts)?;
    if let Some(out) = ctx.opt_path("out", a.out)? {
        write(&out, &report.to_json())?;
    }
    print!("{}", report.render_table());
    Ok(())
}

fn bench(ctx: &Ctx, a: BenchArgs) -> Result<()> {
    let idx = RetrievalIndex::parse(&read(&ctx.path("index", a.index)?)?)?;
    let enc = GraphEncoder::load(ctx.path("encoder", a.encoder)?)?;
    let graphs = load_graphs(&ctx.path("graphs", a.graphs)?)?;
    let k = ctx.val("k", a.k, DEFAULT_K)?;
    let report = measure_retrieval_latency(&idx, &graphs, &enc, k)?;
    if let Some(out) = ctx.opt_path("out", a.out)? {
        write(&out, &serde_json::to_string_pretty(&report).expect("report serializes"))?;
    }
    print_json(&report);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["dcg", "frobnicate"]), 1);
        assert_eq!(run(["dcg", "evaluate", "--bogus"]), 1);
        assert_eq!(run(["dcg", "--help"]), 0);
    }

    #[test]
    fn missing_inputs_exit_one() {
        assert_eq!(run(["dcg", "ingest"]), 1);
        assert_eq!(
            run(["dcg", "ingest", "--catalog", "/nonexistent/catalog.json", "--data", "x"]),
            1
        );
    }

    #[test]
    fn config_supplies_flags() {
        let dir = tempfile::tempdir().unwrap();
        let cat = dir.path().join("catalog.json");
        std::fs::write(&cat, r#"{"databases":[]}"#).unwrap();
        let data = dir.path().join("data.jsonl");
        std::fs::write(&data, "").unwrap();
        let conf = dir.path().join("dcg.conf");
        std::fs::write(
            &conf,
            format!("catalog = {}\ndata = {}\n", cat.display(), data.display()),
        )
        .unwrap();
        assert_eq!(run(["dcg", "ingest", "--config", conf.to_str().unwrap()]), 0);
    }
}
