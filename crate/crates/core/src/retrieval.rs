//! Per-redditor history stores and exact top-k retrieval over them.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Judgment, Situation};
use crate::error::{Error, Result};
use crate::providers::{euclidean, EmbeddingVector};
use crate::store::{AnnotationStore, EmbeddingStore};
use crate::util::atomic_write;
use crate::values::{conflict_text, SchwartzAnnotation, TradeOff};

pub const DEFAULT_K: usize = 5;
const HISTORY_FORMAT: u32 = 1;

/// Which stored vector a query is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorSpace {
    /// Situation title and body.
    Situation,
    /// Canonical conflict text of the situation.
    Value,
    /// Comma-joined situation Schwartz values.
    Schwartz,
}

/// Text embedded for a situation in the situation space.
pub fn situation_space_text(situation: &Situation) -> String {
    situation.full_text()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub instance_id: String,
    pub situation: Situation,
    pub comment: String,
    pub judgment: Judgment,
    pub tradeoffs: Vec<TradeOff>,
    pub schwartz: SchwartzAnnotation,
    pub situation_vec: EmbeddingVector,
    pub value_vec: EmbeddingVector,
    pub schwartz_vec: EmbeddingVector,
}

impl HistoryEntry {
    pub fn vector(&self, space: VectorSpace) -> &EmbeddingVector {
        match space {
            VectorSpace::Situation => &self.situation_vec,
            VectorSpace::Value => &self.value_vec,
            VectorSpace::Schwartz => &self.schwartz_vec,
        }
    }

    pub fn situation_id(&self) -> &str {
        &self.situation.situation_id
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserHistory {
    redditor_id: String,
    model: String,
    dim: usize,
    entries: Vec<HistoryEntry>,
}

#[derive(Serialize, Deserialize)]
struct HistoryFile {
    format: u32,
    #[serde(flatten)]
    history: UserHistory,
}

impl UserHistory {
    /// Validates dimensions and orders entries by instance id.
    pub fn new(redditor_id: &str, model: &str, mut entries: Vec<HistoryEntry>) -> Result<Self> {
        let first = entries
            .first()
            .ok_or_else(|| Error::Empty(format!("history of {redditor_id} has no judged instances")))?;
        let dim = first.situation_vec.dim();
        for e in &entries {
            for space in [VectorSpace::Situation, VectorSpace::Value, VectorSpace::Schwartz] {
                let d = e.vector(space).dim();
                if d != dim {
                    return Err(Error::DimensionMismatch { expected: dim, actual: d });
                }
            }
        }
        entries.sort_by(|a, b| a.instance_id.cmp(&b.instance_id));
        if let Some(w) = entries.windows(2).find(|w| w[0].instance_id == w[1].instance_id) {
            return Err(Error::InvalidInput(format!("duplicate history entry {}", w[0].instance_id)));
        }
        Ok(UserHistory {
            redditor_id: redditor_id.to_string(),
            model: model.to_string(),
            dim,
            entries,
        })
    }

    pub fn redditor_id(&self) -> &str {
        &self.redditor_id
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[HistoryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = HistoryFile {
            format: HISTORY_FORMAT,
            history: self.clone(),
        };
        atomic_write(path, &serde_json::to_vec(&file)?)
    }

    /// Loads a sidecar, refusing other embedding models and bad dimensions.
    pub fn load(path: &Path, expected_model: &str) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let file: HistoryFile = serde_json::from_slice(&bytes)?;
        if file.format != HISTORY_FORMAT {
            return Err(Error::ManifestMismatch(format!(
                "{} has history format {}, expected {HISTORY_FORMAT}",
                path.display(),
                file.format
            )));
        }
        let h = file.history;
        if h.model != expected_model {
            return Err(Error::ManifestMismatch(format!(
                "{} was built with embedding model {}, expected {expected_model}",
                path.display(),
                h.model
            )));
        }
        let rebuilt = UserHistory::new(&h.redditor_id, &h.model, h.entries)?;
        if rebuilt.dim != h.dim {
            return Err(Error::DimensionMismatch {
                expected: h.dim,
                actual: rebuilt.dim,
            });
        }
        Ok(rebuilt)
    }
}

/// Builds the history of one redditor from stored annotations and
/// embeddings. With `only`, instances outside that id set are skipped
/// (used to restrict a history to a training split).
pub fn build_history(
    corpus: &Corpus,
    annotations: &AnnotationStore,
    embeddings: &EmbeddingStore,
    redditor: &str,
    only: Option<&BTreeSet<String>>,
) -> Result<UserHistory> {
    if !corpus.redditors.contains(redditor) {
        return Err(Error::UnknownRedditor(redditor.to_string()));
    }
    let mut entries = Vec::new();
    for inst in corpus.instances_of(redditor) {
        let Some(judgment) = inst.judgment else { continue };
        if only.is_some_and(|ids| !ids.contains(&inst.instance_id)) {
            continue;
        }
        let missing = |what: &'static str| Error::MissingData {
            what,
            instance_id: inst.instance_id.clone(),
        };
        let situation = corpus
            .situation(&inst.situation_id)
            .ok_or_else(|| missing("situation"))?;
        let schwartz = *annotations.schwartz.get(&inst.instance_id).ok_or_else(|| missing("schwartz annotation"))?;
        let conflicts = annotations
            .conflicts
            .get(&inst.situation_id)
            .ok_or_else(|| missing("conflict annotation"))?;
        let tradeoffs = annotations
            .tradeoffs
            .get(&inst.instance_id)
            .ok_or_else(|| missing("trade-off annotation"))?;
        let situation_vec = embeddings
            .get(&situation_space_text(situation))
            .ok_or_else(|| missing("situation embedding"))?;
        let value_vec = embeddings
            .get(&conflict_text(conflicts))
            .ok_or_else(|| missing("value embedding"))?;
        let schwartz_vec = embeddings
            .get(&schwartz.situation_text())
            .ok_or_else(|| missing("schwartz embedding"))?;
        entries.push(HistoryEntry {
            instance_id: inst.instance_id.clone(),
            situation: situation.clone(),
            comment: inst.comment.clone(),
            judgment,
            tradeoffs: tradeoffs.clone(),
            schwartz,
            situation_vec: situation_vec.clone(),
            value_vec: value_vec.clone(),
            schwartz_vec: schwartz_vec.clone(),
        });
    }
    UserHistory::new(redditor, &embeddings.model, entries)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalHit<'a> {
    pub entry: &'a HistoryEntry,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RetrievalResult<'a> {
    pub hits: Vec<RetrievalHit<'a>>,
}

impl RetrievalResult<'_> {
    pub fn ids(&self) -> Vec<String> {
        self.hits.iter().map(|h| h.entry.instance_id.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.hits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }

    pub fn mean_distance(&self) -> Option<f64> {
        (!self.hits.is_empty()).then(|| self.hits.iter().map(|h| h.distance).sum::<f64>() / self.hits.len() as f64)
    }
}

/// Exact k nearest entries in `space`, ascending by Euclidean distance with
/// ties broken by instance id. Entries of the `exclude` situation are skipped.
pub fn retrieve<'a>(
    history: &'a UserHistory,
    space: VectorSpace,
    query: &EmbeddingVector,
    k: usize,
    exclude: Option<&str>,
) -> Result<RetrievalResult<'a>> {
    if query.dim() != history.dim {
        return Err(Error::DimensionMismatch {
            expected: history.dim,
            actual: query.dim(),
        });
    }
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    let mut scored: Vec<RetrievalHit<'a>> = history
        .entries
        .iter()
        .filter(|e| exclude != Some(e.situation_id()))
        .map(|e| RetrievalHit {
            entry: e,
            distance: euclidean(query.as_slice(), e.vector(space).as_slice()),
        })
        .collect();
    let order = |a: &RetrievalHit, b: &RetrievalHit| -> Ordering {
        a.distance
            .total_cmp(&b.distance)
            .then_with(|| a.entry.instance_id.cmp(&b.entry.instance_id))
    };
    if scored.len() > k {
        scored.select_nth_unstable_by(k - 1, order);
        scored.truncate(k);
    }
    scored.sort_by(order);
    Ok(RetrievalResult { hits: scored })
}

pub fn retrieve_by_situation<'a>(
    history: &'a UserHistory,
    query: &EmbeddingVector,
    k: usize,
    exclude: Option<&str>,
) -> Result<RetrievalResult<'a>> {
    retrieve(history, VectorSpace::Situation, query, k, exclude)
}

pub fn retrieve_by_value<'a>(
    history: &'a UserHistory,
    query: &EmbeddingVector,
    k: usize,
    exclude: Option<&str>,
) -> Result<RetrievalResult<'a>> {
    retrieve(history, VectorSpace::Value, query, k, exclude)
}

pub fn retrieve_by_schwartz<'a>(
    history: &'a UserHistory,
    query: &EmbeddingVector,
    k: usize,
    exclude: Option<&str>,
) -> Result<RetrievalResult<'a>> {
    retrieve(history, VectorSpace::Schwartz, query, k, exclude)
}

/// Mean over queries of the mean situation-space distance of each top-k result.
pub fn mean_retrieval_distance(history: &UserHistory, queries: &[EmbeddingVector], k: usize) -> Result<f64> {
    if queries.is_empty() {
        return Err(Error::Empty("no queries".into()));
    }
    if history.is_empty() {
        return Err(Error::Empty(format!("history of {} is empty", history.redditor_id)));
    }
    let mut total = 0.0;
    for q in queries {
        let r = retrieve_by_situation(history, q, k, None)?;
        total += r.mean_distance().unwrap_or(0.0);
    }
    Ok(total / queries.len() as f64)
}
