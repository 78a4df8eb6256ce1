//! Few-shot judgment prediction from a redditor's history.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Instance, Judgment, Situation, DEFAULT_PROMPT_CHARS};
use crate::error::{Error, Result};
use crate::providers::{ChatModel, ChatRequest, EmbeddingVector};
use crate::retrieval::{retrieve, situation_space_text, RetrievalResult, UserHistory, VectorSpace, DEFAULT_K};
use crate::store::{AnnotationStore, EmbeddingStore};
use crate::templates::Template;
use crate::values::conflict_text;

pub const CONTROVERSY_THRESHOLD: f64 = 0.70;
pub const DEFAULT_SAMPLE_COUNT: usize = 2;
/// Sampling temperature used when more than one sample is drawn.
pub const SAMPLING_TEMPERATURE: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputVariant {
    CommentOnly,
    CommentPlusTradeoff,
    CommentPlusSchwartz,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrievalKind {
    Situation,
    SchwartzValue,
    ValueTradeoff,
}

impl RetrievalKind {
    pub fn space(self) -> VectorSpace {
        match self {
            RetrievalKind::Situation => VectorSpace::Situation,
            RetrievalKind::SchwartzValue => VectorSpace::Schwartz,
            RetrievalKind::ValueTradeoff => VectorSpace::Value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StrategyChoice {
    pub retrieval: RetrievalKind,
    pub input: InputVariant,
}

impl StrategyChoice {
    pub const fn new(retrieval: RetrievalKind, input: InputVariant) -> Self {
        StrategyChoice { retrieval, input }
    }
}

/// Strategy for controversial situations.
pub const SOLAR_CONTROVERSIAL: StrategyChoice =
    StrategyChoice::new(RetrievalKind::ValueTradeoff, InputVariant::CommentPlusTradeoff);
/// Strategy for everything else.
pub const SOLAR_DEFAULT: StrategyChoice = StrategyChoice::new(RetrievalKind::Situation, InputVariant::CommentPlusTradeoff);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Controversiality {
    /// `None` when no other redditor judged the situation.
    pub agreement: Option<f64>,
    pub controversial: bool,
    pub judgments: usize,
}

pub fn is_controversial(agreement: f64, threshold: f64) -> bool {
    agreement < threshold
}

/// Agreement is the share of the majority label among `judgments`.
pub fn controversiality_of(judgments: &[Judgment], threshold: f64) -> Controversiality {
    if judgments.is_empty() {
        return Controversiality {
            agreement: None,
            controversial: false,
            judgments: 0,
        };
    }
    let acceptable = judgments.iter().filter(|j| **j == Judgment::Acceptable).count();
    let n = judgments.len();
    let agreement = acceptable.max(n - acceptable) as f64 / n as f64;
    Controversiality {
        agreement: Some(agreement),
        controversial: is_controversial(agreement, threshold),
        judgments: n,
    }
}

/// Controversiality of a situation judged by everyone except `exclude_redditor`.
pub fn controversiality(situation_id: &str, corpus: &Corpus, exclude_redditor: &str, threshold: f64) -> Controversiality {
    let others: Vec<Judgment> = corpus
        .instances
        .iter()
        .filter(|i| i.situation_id == situation_id && i.redditor_id != exclude_redditor)
        .filter_map(|i| i.judgment)
        .collect();
    controversiality_of(&others, threshold)
}

/// Renders the few-shot judgment prompt.
pub fn build_prompt(
    test_situation: &Situation,
    exemplars: &RetrievalResult<'_>,
    variant: InputVariant,
    template: &Template,
    prompt_chars: usize,
) -> Result<String> {
    if exemplars.is_empty() {
        return Err(Error::Empty("no exemplars to build a prompt from".into()));
    }
    let mut blocks = Vec::with_capacity(exemplars.len());
    for hit in &exemplars.hits {
        let e = hit.entry;
        let mut b = String::new();
        let _ = writeln!(b, "[Situation] {}", e.situation.prompt_text(prompt_chars));
        let _ = writeln!(b, "[Comment] {}", e.comment.trim());
        match variant {
            InputVariant::CommentOnly => {}
            InputVariant::CommentPlusSchwartz => {
                let _ = writeln!(b, "[Values] {}", e.schwartz.comment_text());
            }
            InputVariant::CommentPlusTradeoff => {
                if e.tradeoffs.is_empty() {
                    return Err(Error::MissingData {
                        what: "trade-offs",
                        instance_id: e.instance_id.clone(),
                    });
                }
                let _ = writeln!(b, "[Value Trade-offs]");
                for t in &e.tradeoffs {
                    let _ = writeln!(b, "{}", t.render());
                }
            }
        }
        let _ = write!(b, "[Judgment] {}", e.judgment);
        blocks.push(b);
    }
    Ok(template.render(&[
        ("examples", &blocks.join("\n\n")),
        ("situation", &test_situation.prompt_text(prompt_chars)),
    ]))
}

/// Reads a judgment out of a completion. Negated forms are checked before
/// the bare word since "acceptable" is a substring of both; a standalone
/// `1` or `0` is accepted as Unacceptable or Acceptable.
pub fn parse_judgment(completion: &str) -> Result<Judgment> {
    let text = completion.trim().to_lowercase();
    if text.is_empty() {
        return Err(Error::InvalidInput("empty completion".into()));
    }
    if text.contains("not acceptable") || text.contains("unacceptable") {
        return Ok(Judgment::Unacceptable);
    }
    if text.contains("acceptable") {
        return Ok(Judgment::Acceptable);
    }
    let tokens: Vec<&str> = text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).collect();
    if tokens.contains(&"1") {
        return Ok(Judgment::Unacceptable);
    }
    if tokens.contains(&"0") {
        return Ok(Judgment::Acceptable);
    }
    Err(Error::parse("no judgment label in completion", completion))
}

/// Majority label; a tie goes to Unacceptable.
pub fn majority(judgments: &[Judgment]) -> Option<Judgment> {
    if judgments.is_empty() {
        return None;
    }
    let acceptable = judgments.iter().filter(|j| **j == Judgment::Acceptable).count();
    Some(if acceptable * 2 > judgments.len() {
        Judgment::Acceptable
    } else {
        Judgment::Unacceptable
    })
}

/// Test-time inputs for one instance: its situation and the query vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub situation: Situation,
    pub situation_vec: EmbeddingVector,
    pub value_vec: Option<EmbeddingVector>,
    pub schwartz_vec: Option<EmbeddingVector>,
}

impl Query {
    pub fn build(
        corpus: &Corpus,
        annotations: &AnnotationStore,
        embeddings: &EmbeddingStore,
        instance: &Instance,
    ) -> Result<Self> {
        let missing = |what: &'static str| Error::MissingData {
            what,
            instance_id: instance.instance_id.clone(),
        };
        let situation = corpus
            .situation(&instance.situation_id)
            .ok_or_else(|| missing("situation"))?
            .clone();
        let situation_vec = embeddings
            .get(&situation_space_text(&situation))
            .ok_or_else(|| missing("situation embedding"))?
            .clone();
        let value_vec = annotations
            .conflicts
            .get(&instance.situation_id)
            .and_then(|c| embeddings.get(&conflict_text(c)))
            .cloned();
        let schwartz_vec = annotations
            .schwartz
            .get(&instance.instance_id)
            .and_then(|a| embeddings.get(&a.situation_text()))
            .cloned();
        Ok(Query {
            situation,
            situation_vec,
            value_vec,
            schwartz_vec,
        })
    }

    fn vector(&self, kind: RetrievalKind, instance_id: &str) -> Result<&EmbeddingVector> {
        let missing = |what: &'static str| Error::MissingData {
            what,
            instance_id: instance_id.to_string(),
        };
        match kind {
            RetrievalKind::Situation => Ok(&self.situation_vec),
            RetrievalKind::ValueTradeoff => self.value_vec.as_ref().ok_or_else(|| missing("value embedding")),
            RetrievalKind::SchwartzValue => self.schwartz_vec.as_ref().ok_or_else(|| missing("schwartz embedding")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InferenceParams {
    pub k: usize,
    pub sample_count: usize,
    pub threshold: f64,
    pub prompt_chars: usize,
}

impl Default for InferenceParams {
    fn default() -> Self {
        InferenceParams {
            k: DEFAULT_K,
            sample_count: DEFAULT_SAMPLE_COUNT,
            threshold: CONTROVERSY_THRESHOLD,
            prompt_chars: DEFAULT_PROMPT_CHARS,
        }
    }
}

impl InferenceParams {
    pub fn temperature(&self) -> f64 {
        if self.sample_count > 1 {
            SAMPLING_TEMPERATURE
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub instance_id: String,
    pub redditor_id: String,
    pub situation_id: String,
    /// Cross-validation fold the history was built for.
    #[serde(default)]
    pub fold: usize,
    pub strategy: StrategyChoice,
    pub retrieved_ids: Vec<String>,
    pub distances: Vec<f64>,
    pub prompt_text: String,
    pub raw_replies: Vec<String>,
    pub parsed: Vec<Judgment>,
    #[serde(rename = "final")]
    pub final_judgment: Option<Judgment>,
    pub gold: Option<Judgment>,
    pub controversial: bool,
    pub agreement: Option<f64>,
    pub failed: bool,
    pub error: Option<String>,
}

impl PredictionRecord {
    fn empty(instance: &Instance, strategy: StrategyChoice) -> Self {
        PredictionRecord {
            instance_id: instance.instance_id.clone(),
            redditor_id: instance.redditor_id.clone(),
            situation_id: instance.situation_id.clone(),
            fold: 0,
            strategy,
            retrieved_ids: Vec::new(),
            distances: Vec::new(),
            prompt_text: String::new(),
            raw_replies: Vec::new(),
            parsed: Vec::new(),
            final_judgment: None,
            gold: instance.judgment,
            controversial: false,
            agreement: None,
            failed: false,
            error: None,
        }
    }

    /// Sets the controversiality fields.
    pub fn with_controversy(mut self, c: Controversiality) -> Self {
        self.controversial = c.controversial;
        self.agreement = c.agreement;
        self
    }
}

/// Providers and settings shared by all predictions of a run.
pub struct InferenceContext<'a> {
    pub chat: &'a dyn ChatModel,
    pub template: &'a Template,
    pub params: InferenceParams,
}

fn run_predict(
    record: &mut PredictionRecord,
    instance: &Instance,
    strategy: StrategyChoice,
    history: &UserHistory,
    query: &Query,
    ctx: &InferenceContext<'_>,
) -> Result<()> {
    if ctx.params.sample_count == 0 {
        return Err(Error::InvalidInput("sample_count must be at least 1".into()));
    }
    if history.redditor_id() != instance.redditor_id {
        return Err(Error::InvalidInput(format!(
            "history of {} used for an instance of {}",
            history.redditor_id(),
            instance.redditor_id
        )));
    }
    let vector = query.vector(strategy.retrieval, &instance.instance_id)?;
    let exemplars = retrieve(
        history,
        strategy.retrieval.space(),
        vector,
        ctx.params.k,
        Some(&instance.situation_id),
    )?;
    record.retrieved_ids = exemplars.ids();
    record.distances = exemplars.hits.iter().map(|h| h.distance).collect();
    record.prompt_text = build_prompt(
        &query.situation,
        &exemplars,
        strategy.input,
        ctx.template,
        ctx.params.prompt_chars,
    )?;
    for sample in 0..ctx.params.sample_count {
        let mut req = ChatRequest::new("", record.prompt_text.clone(), ctx.chat.model_name());
        req.temperature = ctx.params.temperature();
        req.seed = Some(sample as u64);
        let reply = ctx.chat.chat(&req)?;
        record.raw_replies.push(reply);
    }
    for reply in &record.raw_replies {
        record.parsed.push(parse_judgment(reply)?);
    }
    record.final_judgment = majority(&record.parsed);
    Ok(())
}

/// Retrieves exemplars per `strategy`, prompts `sample_count` times and takes
/// the majority. Failures are recorded in the returned record.
pub fn predict(
    instance: &Instance,
    strategy: StrategyChoice,
    history: &UserHistory,
    query: &Query,
    ctx: &InferenceContext<'_>,
) -> PredictionRecord {
    let mut record = PredictionRecord::empty(instance, strategy);
    if let Err(e) = run_predict(&mut record, instance, strategy, history, query, ctx) {
        record.failed = true;
        record.final_judgment = None;
        record.error = Some(e.to_string());
    }
    record
}

pub fn solar_strategy(c: &Controversiality) -> StrategyChoice {
    if c.controversial {
        SOLAR_CONTROVERSIAL
    } else {
        SOLAR_DEFAULT
    }
}

/// Value-aware retrieval for controversial situations, situation retrieval
/// otherwise; trade-off enriched exemplars in both cases.
pub fn solar_predict(
    instance: &Instance,
    corpus: &Corpus,
    history: &UserHistory,
    query: &Query,
    ctx: &InferenceContext<'_>,
) -> PredictionRecord {
    let c = controversiality(&instance.situation_id, corpus, &instance.redditor_id, ctx.params.threshold);
    predict(instance, solar_strategy(&c), history, query, ctx).with_controversy(c)
}
