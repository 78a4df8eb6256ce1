//! Command-line pipeline. Each subcommand reads and writes artifacts under
//! one root directory tracked by a manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::Serialize;
use serde_json::{json, Value};

use crate::analytics::{
    cooccurrence_counts, distance_curve, project_2d, scatter_svg, spearman, win_rate_matrix,
};
use crate::config::PipelineConfig;
use crate::corpus::{self, Corpus, Instance};
use crate::error::{Error, Result};
use crate::eval::{evaluate, make_splits, Split};
use crate::inference::{
    controversiality, predict, solar_predict, InferenceContext, InputVariant, PredictionRecord, Query, RetrievalKind,
    StrategyChoice,
};
use crate::manifest::ArtifactRoot;
use crate::providers::{
    AuditLog, AuditedChat, AuditedEmbedder, CachedEmbedder, ChatModel, Embedder, EmbeddingCache, FixtureChat,
    HttpChat, HttpEmbedder, MockEmbedder, Transport, UreqTransport,
};
use crate::retrieval::{build_history, situation_space_text, UserHistory};
use crate::store::{read_jsonl, write_jsonl, AnnotationFailure, AnnotationStore, EmbeddingStore};
use crate::templates::TemplateSet;
use crate::util::{parallel_map, sha256_hex};
use crate::values::{
    annotate_conflicts, annotate_schwartz, annotate_tradeoffs, cluster_values, conflict_text, name_clusters,
    ClusterTable,
};

pub const CORPUS: &str = "corpus.jsonl";
pub const INGEST_ISSUES: &str = "ingest_issues.jsonl";
pub const STATS: &str = "stats.json";
pub const EMBEDDINGS: &str = "embeddings.json";
pub const CLUSTERS: &str = "clusters.json";
pub const SPLITS: &str = "splits.json";
pub const AUDIT_LOG: &str = "logs/audit.jsonl";
const MOCK_EMBED_MODEL: &str = "mock-embed";
const MOCK_CHAT_MODEL: &str = "mock-chat";

#[derive(Debug, Parser)]
#[command(name = "solar", version, about = "Personalized moral judgment prediction from value-annotated histories")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Artifact root directory.
    #[arg(long, global = true, default_value = "artifacts")]
    pub root: PathBuf,
    /// Pipeline config file (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Use offline mock providers.
    #[arg(long, global = true)]
    pub mock: bool,
    /// Fixture rules for the mock chat model.
    #[arg(long, global = true)]
    pub fixtures: Option<PathBuf>,
    /// Directory of template overrides (`<kind>.txt`).
    #[arg(long, global = true)]
    pub templates: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub k: Option<usize>,
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    #[arg(long, global = true)]
    pub sample_count: Option<usize>,
    #[arg(long, global = true)]
    pub folds: Option<usize>,
    #[arg(long, global = true)]
    pub activity_threshold: Option<usize>,
    #[arg(long, global = true)]
    pub redditor_cap: Option<usize>,
    #[arg(long, global = true)]
    pub min_cluster_size: Option<usize>,
    #[arg(long, global = true)]
    pub assign_threshold: Option<f64>,
    #[arg(long, global = true)]
    pub cluster_embed_dim: Option<usize>,
    #[arg(long, global = true)]
    pub embedding_dim: Option<usize>,
    #[arg(long, global = true)]
    pub min_support: Option<usize>,
    #[arg(long, global = true)]
    pub max_parallel: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Read a newline-delimited JSON corpus into the artifact root.
    Ingest { input: PathBuf },
    /// Keep situations with an active anchor redditor and the top redditors.
    Truncate,
    /// Corpus statistics.
    Stats,
    /// Annotate values with the chat model.
    Annotate { kind: AnnotateKind },
    /// Cluster value phrases and name the clusters.
    Cluster,
    /// Embed situation, value and Schwartz texts.
    Embed,
    /// Build per-redditor splits and histories.
    Index,
    /// Predict judgments for test instances.
    Predict {
        /// `solar`, or `<retrieval>:<input>` such as `situation:comment-only`.
        #[arg(long, default_value = "solar")]
        strategy: String,
    },
    /// Score predictions.
    Evaluate {
        #[arg(long, default_value = "solar")]
        strategy: String,
    },
    /// Analytics over annotations, clusters and histories.
    Analyze { kind: AnalyzeKind },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AnnotateKind {
    Schwartz,
    Conflicts,
    Tradeoffs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AnalyzeKind {
    WinRates,
    Distance,
    Cooccurrence,
    Project,
}

/// Either `solar` or a fixed strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyArg {
    Solar,
    Fixed(StrategyChoice),
}

impl StrategyArg {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim().to_lowercase().replace('_', "-");
        if s == "solar" {
            return Ok(StrategyArg::Solar);
        }
        let (r, i) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidInput(format!("strategy `{s}` is not `solar` or `<retrieval>:<input>`")))?;
        let retrieval = match r {
            "situation" => RetrievalKind::Situation,
            "schwartz" | "schwartz-value" => RetrievalKind::SchwartzValue,
            "value" | "tradeoff" | "value-tradeoff" => RetrievalKind::ValueTradeoff,
            other => return Err(Error::InvalidInput(format!("unknown retrieval `{other}`"))),
        };
        let input = match i {
            "comment-only" | "comment" => InputVariant::CommentOnly,
            "comment-plus-tradeoff" | "tradeoff" => InputVariant::CommentPlusTradeoff,
            "comment-plus-schwartz" | "schwartz" => InputVariant::CommentPlusSchwartz,
            other => return Err(Error::InvalidInput(format!("unknown input variant `{other}`"))),
        };
        Ok(StrategyArg::Fixed(StrategyChoice::new(retrieval, input)))
    }

    /// File stem for this strategy's artifacts.
    pub fn name(&self) -> String {
        match self {
            StrategyArg::Solar => "solar".into(),
            StrategyArg::Fixed(s) => {
                let r = match s.retrieval {
                    RetrievalKind::Situation => "situation",
                    RetrievalKind::SchwartzValue => "schwartz",
                    RetrievalKind::ValueTradeoff => "value",
                };
                let i = match s.input {
                    InputVariant::CommentOnly => "comment-only",
                    InputVariant::CommentPlusTradeoff => "comment-plus-tradeoff",
                    InputVariant::CommentPlusSchwartz => "comment-plus-schwartz",
                };
                format!("{r}--{i}")
            }
        }
    }
}

pub fn predictions_path(strategy: &StrategyArg) -> String {
    format!("predictions/{}.jsonl", strategy.name())
}

pub fn report_path(strategy: &StrategyArg) -> String {
    format!("reports/{}.json", strategy.name())
}

fn annotation_path(kind: AnnotateKind) -> &'static str {
    match kind {
        AnnotateKind::Schwartz => "annotations/schwartz.jsonl",
        AnnotateKind::Conflicts => "annotations/conflicts.jsonl",
        AnnotateKind::Tradeoffs => "annotations/tradeoffs.jsonl",
    }
}

fn annotation_producer(kind: AnnotateKind) -> &'static str {
    match kind {
        AnnotateKind::Schwartz => "annotate schwartz",
        AnnotateKind::Conflicts => "annotate conflicts",
        AnnotateKind::Tradeoffs => "annotate tradeoffs",
    }
}

fn kind_name(kind: AnnotateKind) -> &'static str {
    match kind {
        AnnotateKind::Schwartz => "schwartz",
        AnnotateKind::Conflicts => "conflicts",
        AnnotateKind::Tradeoffs => "tradeoffs",
    }
}

/// File name for a redditor id; ids that are not filename-safe get a digest suffix.
fn redditor_file(id: &str) -> String {
    let safe: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    if safe == id && !id.is_empty() {
        safe
    } else {
        format!("{safe}-{}", &sha256_hex(id)[..8])
    }
}

pub fn history_path(fold: usize, redditor: &str) -> String {
    format!("index/fold{fold}/{}.json", redditor_file(redditor))
}

/// Builds the effective config from the file (if any) and flag overrides.
pub fn resolve_config(global: &GlobalArgs) -> Result<PipelineConfig> {
    let mut c = match &global.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if global.mock {
        c.mock = true;
    }
    if let Some(v) = &global.fixtures {
        c.fixtures = Some(v.clone());
    }
    if let Some(v) = &global.templates {
        c.templates_dir = Some(v.clone());
    }
    if let Some(v) = global.seed {
        c.seed = v;
        c.clustering.seed = v;
    }
    macro_rules! set {
        ($flag:ident => $($field:ident).+) => {
            if let Some(v) = global.$flag {
                c.$($field).+ = v;
            }
        };
    }
    set!(k => k);
    set!(threshold => threshold);
    set!(sample_count => sample_count);
    set!(folds => folds);
    set!(activity_threshold => activity_threshold);
    set!(redditor_cap => redditor_cap);
    set!(min_cluster_size => clustering.min_cluster_size);
    set!(assign_threshold => clustering.assign_threshold);
    set!(cluster_embed_dim => clustering.embed_dim);
    set!(embedding_dim => embedding.embedding_dim);
    set!(min_support => min_support);
    if let Some(v) = global.max_parallel {
        c.chat.max_parallel = v;
        c.embedding.max_parallel = v;
        c.clustering.max_parallel = v;
    }
    c.validate()?;
    Ok(c)
}

struct Pipeline {
    config: PipelineConfig,
    templates: TemplateSet,
    root: ArtifactRoot,
    audit: Option<Arc<AuditLog>>,
}

impl Pipeline {
    fn open(config: PipelineConfig, root: &Path, create: bool) -> Result<Self> {
        let templates = match &config.templates_dir {
            Some(dir) => TemplateSet::load_dir(dir)?,
            None => TemplateSet::default(),
        };
        let root = ArtifactRoot::open(
            root,
            &config.pipeline_hash(),
            &templates.set_hash(),
            &embedding_model_name(&config),
            create,
        )?;
        Ok(Pipeline {
            config,
            templates,
            root,
            audit: None,
        })
    }

    fn audit(&mut self) -> Result<Arc<AuditLog>> {
        if self.audit.is_none() {
            self.audit = Some(Arc::new(AuditLog::open(&self.root.path(AUDIT_LOG))?));
        }
        Ok(self.audit.clone().expect("set above"))
    }

    fn transport(&self, timeout_secs: u64) -> Arc<dyn Transport> {
        Arc::new(UreqTransport::new(Duration::from_secs(timeout_secs)))
    }

    fn chat(&mut self) -> Result<Arc<dyn ChatModel>> {
        let audit = self.audit()?;
        let inner: Arc<dyn ChatModel> = if self.config.mock {
            let path = self
                .config
                .fixtures
                .as_ref()
                .ok_or_else(|| Error::InvalidInput("mock mode needs --fixtures".into()))?;
            Arc::new(FixtureChat::load(MOCK_CHAT_MODEL, path)?)
        } else {
            let t = self.transport(self.config.chat.timeout_secs);
            Arc::new(HttpChat::new(self.config.chat.clone(), t)?)
        };
        Ok(Arc::new(AuditedChat::new(inner, audit)))
    }

    fn embedder_with_dim(&mut self, dim: usize) -> Result<Arc<dyn Embedder>> {
        let audit = self.audit()?;
        let inner: Arc<dyn Embedder> = if self.config.mock {
            Arc::new(MockEmbedder::new(MOCK_EMBED_MODEL, dim)?)
        } else {
            let cfg = crate::providers::ProviderConfig {
                embedding_dim: dim,
                ..self.config.embedding.clone()
            };
            let t = self.transport(cfg.timeout_secs);
            let http = HttpEmbedder::new(cfg, t)?;
            Arc::new(CachedEmbedder::new(http, EmbeddingCache::new(self.root.path("cache/embeddings"))))
        };
        Ok(Arc::new(AuditedEmbedder::new(inner, audit)))
    }

    fn embedder(&mut self) -> Result<Arc<dyn Embedder>> {
        self.embedder_with_dim(self.config.embedding.embedding_dim)
    }

    fn corpus(&self) -> Result<Corpus> {
        let path = self.root.require(CORPUS, "ingest")?;
        let outcome = corpus::ingest(&path)?;
        if let Some(issue) = outcome.issues.first() {
            return Err(Error::InvalidInput(format!("{CORPUS} line {}: {}", issue.line, issue.reason)));
        }
        Ok(outcome.corpus)
    }

    /// Loads the annotation kinds in `need`, plus any others already present.
    fn annotations(&self, need: &[AnnotateKind]) -> Result<AnnotationStore> {
        let mut store = AnnotationStore::default();
        for kind in [AnnotateKind::Schwartz, AnnotateKind::Conflicts, AnnotateKind::Tradeoffs] {
            let rel = annotation_path(kind);
            if !need.contains(&kind) && !self.root.has(rel) {
                continue;
            }
            let path = self.root.require(rel, annotation_producer(kind))?;
            match kind {
                AnnotateKind::Schwartz => {
                    for r in read_jsonl::<crate::store::SchwartzRecord>(&path)? {
                        store.schwartz.insert(r.instance_id, r.annotation);
                    }
                }
                AnnotateKind::Conflicts => {
                    for r in read_jsonl::<crate::store::ConflictRecord>(&path)? {
                        store.conflicts.insert(r.situation_id, r.conflicts);
                    }
                }
                AnnotateKind::Tradeoffs => {
                    for r in read_jsonl::<crate::store::TradeoffRecord>(&path)? {
                        store.tradeoffs.insert(r.instance_id, r.tradeoffs);
                    }
                }
            }
        }
        Ok(store)
    }

    fn embeddings(&self) -> Result<EmbeddingStore> {
        EmbeddingStore::load(&self.root.require(EMBEDDINGS, "embed")?)
    }

    fn clusters(&self) -> Result<ClusterTable> {
        let path = self.root.require(CLUSTERS, "cluster")?;
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    fn splits(&self) -> Result<Vec<Split>> {
        let path = self.root.require(SPLITS, "index")?;
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    fn write_json<T: Serialize>(&mut self, rel: &str, producer: &str, value: &T) -> Result<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.root.write(rel, producer, &bytes)
    }

    fn write_jsonl<T: Serialize>(&mut self, rel: &str, producer: &str, rows: impl IntoIterator<Item = T>) -> Result<()> {
        write_jsonl(&self.root.path(rel), rows)?;
        self.root.record(rel, producer)
    }
}

fn embedding_model_name(config: &PipelineConfig) -> String {
    if config.mock {
        MOCK_EMBED_MODEL.to_string()
    } else {
        config.embedding.model_name.clone()
    }
}

/// Runs one subcommand and returns its JSON summary.
pub fn run(cli: &Cli) -> Result<Value> {
    let config = resolve_config(&cli.global)?;
    let create = matches!(cli.command, Command::Ingest { .. });
    let mut p = Pipeline::open(config, &cli.global.root, create)?;
    let summary = match &cli.command {
        Command::Ingest { input } => run_ingest(&mut p, input)?,
        Command::Truncate => run_truncate(&mut p)?,
        Command::Stats => run_stats(&mut p)?,
        Command::Annotate { kind } => run_annotate(&mut p, *kind)?,
        Command::Cluster => run_cluster(&mut p)?,
        Command::Embed => run_embed(&mut p)?,
        Command::Index => run_index(&mut p)?,
        Command::Predict { strategy } => run_predict(&mut p, &StrategyArg::parse(strategy)?)?,
        Command::Evaluate { strategy } => run_evaluate(&mut p, &StrategyArg::parse(strategy)?)?,
        Command::Analyze { kind } => run_analyze(&mut p, *kind)?,
    };
    p.root.save()?;
    Ok(summary)
}

/// Structured error report written to stderr on failure.
pub fn error_report(err: &Error) -> Value {
    let mut body = json!({ "kind": err.kind(), "message": err.to_string() });
    if let Error::MissingUpstream { artifact, producer } = err {
        body["artifact"] = json!(artifact);
        body["producer"] = json!(producer);
    }
    json!({ "error": body })
}

fn run_ingest(p: &mut Pipeline, input: &Path) -> Result<Value> {
    let outcome = corpus::ingest(input)?;
    let c = &outcome.corpus;
    p.write_jsonl(CORPUS, "ingest", c.to_records())?;
    p.write_jsonl(INGEST_ISSUES, "ingest", outcome.issues.iter())?;
    if !outcome.issues.is_empty() {
        warn!("{} malformed records quarantined in {INGEST_ISSUES}", outcome.issues.len());
    }
    Ok(json!({
        "instances": c.instances.len(),
        "situations": c.situations.len(),
        "redditors": c.redditors.len(),
        "issues": outcome.issues.len(),
    }))
}

fn run_truncate(p: &mut Pipeline) -> Result<Value> {
    let before = p.corpus()?;
    let after = corpus::truncate(&before, p.config.activity_threshold, p.config.redditor_cap)?;
    p.write_jsonl(CORPUS, "truncate", after.to_records())?;
    Ok(json!({
        "instances": [before.instances.len(), after.instances.len()],
        "situations": [before.situations.len(), after.situations.len()],
        "redditors": [before.redditors.len(), after.redditors.len()],
    }))
}

fn run_stats(p: &mut Pipeline) -> Result<Value> {
    let c = p.corpus()?;
    let s = corpus::stats(&c, p.config.skewed_k)?;
    p.write_json(STATS, "stats", &s)?;
    Ok(serde_json::to_value(s)?)
}

fn judged_instances(c: &Corpus) -> Vec<&Instance> {
    c.judged().collect()
}

fn run_annotate(p: &mut Pipeline, kind: AnnotateKind) -> Result<Value> {
    let corpus = p.corpus()?;
    let need: &[AnnotateKind] = match kind {
        AnnotateKind::Tradeoffs => &[AnnotateKind::Conflicts],
        _ => &[],
    };
    let mut store = p.annotations(need)?;
    let chat = p.chat()?;
    let parallel = p.config.chat.max_parallel;
    let chars = p.config.prompt_chars;
    let mut failures: Vec<AnnotationFailure> = Vec::new();
    let fail = |key: &str, e: &Error| AnnotationFailure {
        kind: kind_name(kind).into(),
        key: key.to_string(),
        error: e.to_string(),
    };
    let mut added = 0;
    match kind {
        AnnotateKind::Schwartz => {
            let todo: Vec<&Instance> = judged_instances(&corpus)
                .into_iter()
                .filter(|i| !store.schwartz.contains_key(&i.instance_id))
                .collect();
            let template = p.templates.schwartz.clone();
            let results = parallel_map(&todo, parallel, |i| {
                let s = corpus.situation(&i.situation_id).expect("referential integrity");
                annotate_schwartz(s, &i.comment, chat.as_ref(), &template, chars)
            });
            for (i, r) in todo.iter().zip(results) {
                match r {
                    Ok(a) => {
                        store.schwartz.insert(i.instance_id.clone(), a);
                        added += 1;
                    }
                    Err(e) => failures.push(fail(&i.instance_id, &e)),
                }
            }
            store.save_schwartz(&p.root.path("annotations"))?;
        }
        AnnotateKind::Conflicts => {
            let wanted: BTreeSet<&str> = corpus.judged().map(|i| i.situation_id.as_str()).collect();
            let todo: Vec<&str> = wanted
                .into_iter()
                .filter(|s| !store.conflicts.contains_key(*s))
                .collect();
            let template = p.templates.conflicts.clone();
            let results = parallel_map(&todo, parallel, |sid| {
                annotate_conflicts(corpus.situation(sid).expect("known situation"), chat.as_ref(), &template, chars)
            });
            for (sid, r) in todo.iter().zip(results) {
                match r {
                    Ok(c) => {
                        store.conflicts.insert(sid.to_string(), c);
                        added += 1;
                    }
                    Err(e) => failures.push(fail(sid, &e)),
                }
            }
            store.save_conflicts(&p.root.path("annotations"))?;
        }
        AnnotateKind::Tradeoffs => {
            let matcher = p.embedder()?;
            let todo: Vec<&Instance> = judged_instances(&corpus)
                .into_iter()
                .filter(|i| !store.tradeoffs.contains_key(&i.instance_id))
                .collect();
            let template = p.templates.tradeoffs.clone();
            let results = parallel_map(&todo, parallel, |i| {
                let conflicts = store.conflicts.get(&i.situation_id).ok_or_else(|| Error::MissingData {
                    what: "conflict annotation",
                    instance_id: i.instance_id.clone(),
                })?;
                let s = corpus.situation(&i.situation_id).expect("referential integrity");
                annotate_tradeoffs(
                    s,
                    conflicts,
                    &i.comment,
                    &i.instance_id,
                    chat.as_ref(),
                    &template,
                    chars,
                    Some(matcher.as_ref()),
                )
            });
            let mut fresh = Vec::new();
            for (i, r) in todo.iter().zip(results) {
                match r {
                    Ok(t) => fresh.push((i.instance_id.clone(), t)),
                    Err(e) => failures.push(fail(&i.instance_id, &e)),
                }
            }
            added = fresh.len();
            store.tradeoffs.extend(fresh);
            store.save_tradeoffs(&p.root.path("annotations"))?;
        }
    }
    let producer = annotation_producer(kind);
    p.root.record(annotation_path(kind), producer)?;
    let failures_rel = format!("annotations/failures_{}.jsonl", kind_name(kind));
    p.write_jsonl(&failures_rel, producer, failures.iter())?;
    if !failures.is_empty() {
        warn!("{} {} annotations failed; see {failures_rel}", failures.len(), kind_name(kind));
    }
    let total = match kind {
        AnnotateKind::Schwartz => store.schwartz.len(),
        AnnotateKind::Conflicts => store.conflicts.len(),
        AnnotateKind::Tradeoffs => store.tradeoffs.len(),
    };
    Ok(json!({ "kind": kind_name(kind), "added": added, "total": total, "failed": failures.len() }))
}

/// Every value phrase, with repetition, in a fixed order.
fn value_phrases(store: &AnnotationStore) -> Vec<String> {
    let mut out = Vec::new();
    for conflicts in store.conflicts.values() {
        for c in conflicts {
            out.push(c.value_a.clone());
            out.push(c.value_b.clone());
        }
    }
    for tradeoffs in store.tradeoffs.values() {
        for t in tradeoffs {
            out.push(t.preferred.clone());
            out.push(t.rejected.clone());
        }
    }
    out
}

fn run_cluster(p: &mut Pipeline) -> Result<Value> {
    let store = p.annotations(&[AnnotateKind::Conflicts, AnnotateKind::Tradeoffs])?;
    let phrases = value_phrases(&store);
    let embedder = p.embedder_with_dim(p.config.clustering.embed_dim)?;
    let chat = p.chat()?;
    let mut params = p.config.clustering.clone();
    params.max_parallel = params.max_parallel.max(1);
    let mut clusters = cluster_values(&phrases, embedder.as_ref(), &params)?;
    name_clusters(&mut clusters, chat.as_ref(), &p.templates.cluster_naming)?;
    let table = ClusterTable::new(clusters);
    p.write_json(CLUSTERS, "cluster", &table)?;
    let sizes: Vec<usize> = table.clusters.iter().map(|c| c.members.len()).collect();
    info!("{} clusters over {} phrases", sizes.len(), phrases.len());
    Ok(json!({
        "phrases": phrases.len(),
        "clusters": table.clusters.iter().map(|c| json!({
            "cluster_id": c.cluster_id, "name": c.name, "size": c.members.len(), "origin": c.origin,
        })).collect::<Vec<_>>(),
    }))
}

fn run_embed(p: &mut Pipeline) -> Result<Value> {
    let corpus = p.corpus()?;
    let store = p.annotations(&[AnnotateKind::Schwartz, AnnotateKind::Conflicts, AnnotateKind::Tradeoffs])?;
    let embedder = p.embedder()?;
    let mut emb = if p.root.has(EMBEDDINGS) {
        p.embeddings()?
    } else {
        EmbeddingStore::new(embedder.model_name(), embedder.dim())
    };
    let mut texts = Vec::new();
    let situations: BTreeSet<&str> = corpus.judged().map(|i| i.situation_id.as_str()).collect();
    for sid in &situations {
        texts.push(situation_space_text(corpus.situation(sid).expect("known situation")));
        if let Some(c) = store.conflicts.get(*sid) {
            texts.push(conflict_text(c));
        }
    }
    for inst in corpus.judged() {
        if let Some(a) = store.schwartz.get(&inst.instance_id) {
            texts.push(a.situation_text());
        }
    }
    let added = emb.embed_missing(&texts, embedder.as_ref())?;
    emb.save(&p.root.path(EMBEDDINGS))?;
    p.root.record(EMBEDDINGS, "embed")?;
    Ok(json!({ "texts": texts.len(), "embedded": added, "stored": emb.len(), "model": emb.model, "dim": emb.dim }))
}

fn run_index(p: &mut Pipeline) -> Result<Value> {
    let corpus = p.corpus()?;
    let store = p.annotations(&[AnnotateKind::Schwartz, AnnotateKind::Conflicts, AnnotateKind::Tradeoffs])?;
    let emb = p.embeddings()?;
    let mut splits = Vec::new();
    let mut skipped = Vec::new();
    for redditor in &corpus.redditors {
        match make_splits(&corpus, redditor, p.config.seed, p.config.folds) {
            Ok(s) => splits.extend(s),
            Err(Error::InvalidInput(reason)) => {
                warn!("skipping {redditor}: {reason}");
                skipped.push(redditor.clone());
            }
            Err(e) => return Err(e),
        }
    }
    if splits.is_empty() {
        return Err(Error::Empty("no redditor has enough judged instances to split".into()));
    }
    let mut histories = 0;
    for split in &splits {
        let h = build_history(&corpus, &store, &emb, &split.redditor_id, Some(&split.train))?;
        let rel = history_path(split.fold, &split.redditor_id);
        h.save(&p.root.path(&rel))?;
        p.root.record(&rel, "index")?;
        histories += 1;
    }
    p.write_json(SPLITS, "index", &splits)?;
    Ok(json!({ "splits": splits.len(), "histories": histories, "skipped_redditors": skipped }))
}

fn run_predict(p: &mut Pipeline, strategy: &StrategyArg) -> Result<Value> {
    let corpus = p.corpus()?;
    let store = p.annotations(&[AnnotateKind::Schwartz, AnnotateKind::Conflicts, AnnotateKind::Tradeoffs])?;
    let emb = p.embeddings()?;
    let splits = p.splits()?;
    let mut histories = Vec::with_capacity(splits.len());
    for s in &splits {
        let path = p.root.require(&history_path(s.fold, &s.redditor_id), "index")?;
        histories.push(UserHistory::load(&path, &emb.model)?);
    }
    let chat = p.chat()?;
    let params = p.config.inference_params();
    let template = p.templates.judgment.clone();
    let ctx = InferenceContext {
        chat: chat.as_ref(),
        template: &template,
        params,
    };
    let mut tasks: Vec<(usize, &Instance)> = Vec::new();
    for (si, s) in splits.iter().enumerate() {
        for id in &s.test {
            let inst = corpus
                .instance(id)
                .ok_or_else(|| Error::InvalidInput(format!("split refers to unknown instance {id}")))?;
            tasks.push((si, inst));
        }
    }
    let records: Vec<PredictionRecord> = parallel_map(&tasks, p.config.chat.max_parallel, |&(si, inst)| {
        let fold = splits[si].fold;
        let history = &histories[si];
        let mut record = match Query::build(&corpus, &store, &emb, inst) {
            Ok(query) => match strategy {
                StrategyArg::Solar => solar_predict(inst, &corpus, history, &query, &ctx),
                StrategyArg::Fixed(s) => predict(inst, *s, history, &query, &ctx).with_controversy(controversiality(
                    &inst.situation_id,
                    &corpus,
                    &inst.redditor_id,
                    params.threshold,
                )),
            },
            Err(e) => {
                let mut r = predict(inst, crate::inference::SOLAR_DEFAULT, history, &dummy_query(inst), &ctx);
                r.failed = true;
                r.error = Some(e.to_string());
                r
            }
        };
        record.fold = fold;
        record
    });
    let failed = records.iter().filter(|r| r.failed).count();
    let rel = predictions_path(strategy);
    p.write_jsonl(&rel, "predict", records.iter())?;
    Ok(json!({ "strategy": strategy.name(), "predictions": records.len(), "failed": failed, "output": rel }))
}

/// Placeholder query for instances whose inputs are missing; the prediction
/// it produces is marked failed by the caller.
fn dummy_query(inst: &Instance) -> Query {
    Query {
        situation: crate::corpus::Situation {
            situation_id: inst.situation_id.clone(),
            title: String::new(),
            body: String::new(),
        },
        situation_vec: crate::providers::EmbeddingVector::new(vec![0.0]).expect("finite"),
        value_vec: None,
        schwartz_vec: None,
    }
}

fn run_evaluate(p: &mut Pipeline, strategy: &StrategyArg) -> Result<Value> {
    let corpus = p.corpus()?;
    let path = p.root.require(&predictions_path(strategy), "predict")?;
    let records: Vec<PredictionRecord> = read_jsonl(&path)?;
    let report = evaluate(&records, &corpus)?;
    p.write_json(&report_path(strategy), "evaluate", &report)?;
    Ok(serde_json::to_value(&report)?)
}

fn run_analyze(p: &mut Pipeline, kind: AnalyzeKind) -> Result<Value> {
    match kind {
        AnalyzeKind::WinRates => {
            let corpus = p.corpus()?;
            let store = p.annotations(&[AnnotateKind::Tradeoffs])?;
            let table = p.clusters()?;
            let mut by_redditor: BTreeMap<String, Vec<_>> = BTreeMap::new();
            for (id, list) in &store.tradeoffs {
                if let Some(inst) = corpus.instance(id) {
                    by_redditor.entry(inst.redditor_id.clone()).or_default().extend(list.iter().cloned());
                }
            }
            let m = win_rate_matrix(&by_redditor, &table, p.config.min_support)?;
            p.write_json("analysis/win_rates.json", "analyze win-rates", &m)?;
            p.root.write("analysis/win_rates.csv", "analyze win-rates", m.to_csv().as_bytes())?;
            p.root.write("analysis/win_rates.svg", "analyze win-rates", m.to_svg().as_bytes())?;
            Ok(json!({ "pairs": m.rows.len(), "redditors": m.cols.len(), "unmapped": m.unmapped }))
        }
        AnalyzeKind::Cooccurrence => {
            let corpus = p.corpus()?;
            let store = p.annotations(&[AnnotateKind::Schwartz, AnnotateKind::Conflicts])?;
            let table = p.clusters()?;
            let m = cooccurrence_counts(&corpus, &store, &table);
            p.write_json("analysis/cooccurrence.json", "analyze cooccurrence", &m)?;
            p.root.write("analysis/cooccurrence.csv", "analyze cooccurrence", m.to_csv().as_bytes())?;
            p.root.write("analysis/cooccurrence.svg", "analyze cooccurrence", m.to_svg().as_bytes())?;
            Ok(json!({ "clusters": m.rows.len() }))
        }
        AnalyzeKind::Project => {
            let corpus = p.corpus()?;
            let emb = p.embeddings()?;
            let mut ids = Vec::new();
            let mut vecs = Vec::new();
            for (id, s) in &corpus.situations {
                if let Some(v) = emb.get(&situation_space_text(s)) {
                    ids.push(id.clone());
                    vecs.push(v.clone());
                }
            }
            let pts = project_2d(&vecs)?;
            let rows: Vec<Value> = ids
                .iter()
                .zip(&pts)
                .map(|(id, pt)| json!({ "situation_id": id, "x": pt[0], "y": pt[1] }))
                .collect();
            let mut csv = String::from("situation_id,x,y\n");
            for (id, pt) in ids.iter().zip(&pts) {
                csv.push_str(&format!("{id},{},{}\n", pt[0], pt[1]));
            }
            let xy: Vec<(f64, f64)> = pts.iter().map(|p| (p[0], p[1])).collect();
            p.write_json("analysis/projection.json", "analyze project", &rows)?;
            p.root.write("analysis/projection.csv", "analyze project", csv.as_bytes())?;
            p.root.write(
                "analysis/projection.svg",
                "analyze project",
                scatter_svg("Situation embeddings (PCA)", "PC1", "PC2", &xy).as_bytes(),
            )?;
            Ok(json!({ "points": pts.len() }))
        }
        AnalyzeKind::Distance => {
            let corpus = p.corpus()?;
            let store = p.annotations(&[AnnotateKind::Schwartz, AnnotateKind::Conflicts])?;
            let emb = p.embeddings()?;
            let splits = p.splits()?;
            let mut curves = BTreeMap::new();
            let mut by_size: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
            let mut csv = String::from("redditor_id,history_size,mean_distance\n");
            for s in splits.iter().filter(|s| s.fold == 0) {
                let path = p.root.require(&history_path(0, &s.redditor_id), "index")?;
                let history = UserHistory::load(&path, &emb.model)?;
                let queries = s
                    .test
                    .iter()
                    .filter_map(|id| corpus.instance(id))
                    .map(|inst| Query::build(&corpus, &store, &emb, inst).map(|q| q.situation_vec))
                    .collect::<Result<Vec<_>>>()?;
                if queries.is_empty() {
                    continue;
                }
                let curve = distance_curve(&history, &queries, &p.config.distance_sizes, p.config.k, p.config.seed)?;
                for &(size, d) in &curve {
                    by_size.entry(size).or_default().push(d);
                    csv.push_str(&format!("{},{size},{d}\n", s.redditor_id));
                }
                curves.insert(s.redditor_id.clone(), curve);
            }
            let pooled: Vec<(f64, f64)> = by_size
                .iter()
                .map(|(size, ds)| (*size as f64, ds.iter().sum::<f64>() / ds.len() as f64))
                .collect();
            let (xs, ys): (Vec<f64>, Vec<f64>) = pooled.iter().copied().unzip();
            let rho = spearman(&xs, &ys);
            let out = json!({ "per_redditor": curves, "mean_by_size": pooled, "spearman": rho });
            p.write_json("analysis/distance.json", "analyze distance", &out)?;
            p.root.write("analysis/distance.csv", "analyze distance", csv.as_bytes())?;
            p.root.write(
                "analysis/distance.svg",
                "analyze distance",
                scatter_svg("Mean retrieval distance by history size", "history size", "mean top-k distance", &pooled)
                    .as_bytes(),
            )?;
            Ok(json!({ "redditors": curves.len(), "sizes": xs.len(), "spearman": rho }))
        }
    }
}
