//! On-disk stores for annotations and text embeddings.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::providers::{EmbeddingVector, Embedder};
use crate::util::{atomic_write, sha256_hex};
use crate::values::{SchwartzAnnotation, TradeOff, ValueConflict};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchwartzRecord {
    pub instance_id: String,
    pub annotation: SchwartzAnnotation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictRecord {
    pub situation_id: String,
    pub conflicts: Vec<ValueConflict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRecord {
    pub instance_id: String,
    pub tradeoffs: Vec<TradeOff>,
}

/// An annotation that could not be produced, kept for the failure report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationFailure {
    pub kind: String,
    pub key: String,
    pub error: String,
}

pub(crate) fn write_jsonl<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut out = Vec::new();
    for row in rows {
        serde_json::to_writer(&mut out, &row)?;
        out.push(b'\n');
    }
    atomic_write(path, &out)
}

pub(crate) fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(serde_json::from_str(&line).map_err(|e| {
            Error::InvalidInput(format!("{}:{}: {e}", path.display(), n + 1))
        })?);
    }
    Ok(rows)
}

/// Value annotations keyed by instance (Schwartz, trade-offs) or situation
/// (conflicts).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnnotationStore {
    pub schwartz: BTreeMap<String, SchwartzAnnotation>,
    pub conflicts: BTreeMap<String, Vec<ValueConflict>>,
    pub tradeoffs: BTreeMap<String, Vec<TradeOff>>,
}

impl AnnotationStore {
    pub const SCHWARTZ_FILE: &'static str = "schwartz.jsonl";
    pub const CONFLICTS_FILE: &'static str = "conflicts.jsonl";
    pub const TRADEOFFS_FILE: &'static str = "tradeoffs.jsonl";

    /// Loads whichever of the three files exist in `dir`.
    pub fn load(dir: &Path) -> Result<Self> {
        let mut store = AnnotationStore::default();
        let path = dir.join(Self::SCHWARTZ_FILE);
        if path.exists() {
            for r in read_jsonl::<SchwartzRecord>(&path)? {
                store.schwartz.insert(r.instance_id, r.annotation);
            }
        }
        let path = dir.join(Self::CONFLICTS_FILE);
        if path.exists() {
            for r in read_jsonl::<ConflictRecord>(&path)? {
                store.conflicts.insert(r.situation_id, r.conflicts);
            }
        }
        let path = dir.join(Self::TRADEOFFS_FILE);
        if path.exists() {
            for r in read_jsonl::<TradeoffRecord>(&path)? {
                store.tradeoffs.insert(r.instance_id, r.tradeoffs);
            }
        }
        Ok(store)
    }

    pub fn save_schwartz(&self, dir: &Path) -> Result<()> {
        write_jsonl(
            &dir.join(Self::SCHWARTZ_FILE),
            self.schwartz.iter().map(|(id, a)| SchwartzRecord {
                instance_id: id.clone(),
                annotation: *a,
            }),
        )
    }

    pub fn save_conflicts(&self, dir: &Path) -> Result<()> {
        write_jsonl(
            &dir.join(Self::CONFLICTS_FILE),
            self.conflicts.iter().map(|(id, c)| ConflictRecord {
                situation_id: id.clone(),
                conflicts: c.clone(),
            }),
        )
    }

    pub fn save_tradeoffs(&self, dir: &Path) -> Result<()> {
        write_jsonl(
            &dir.join(Self::TRADEOFFS_FILE),
            self.tradeoffs.iter().map(|(id, t)| TradeoffRecord {
                instance_id: id.clone(),
                tradeoffs: t.clone(),
            }),
        )
    }
}

/// Text embeddings keyed by the SHA-256 of the embedded text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingStore {
    pub model: String,
    pub dim: usize,
    vectors: BTreeMap<String, EmbeddingVector>,
}

impl EmbeddingStore {
    pub fn new(model: impl Into<String>, dim: usize) -> Self {
        EmbeddingStore {
            model: model.into(),
            dim,
            vectors: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, text: &str) -> Option<&EmbeddingVector> {
        self.vectors.get(&sha256_hex(text))
    }

    pub fn insert(&mut self, text: &str, vector: EmbeddingVector) -> Result<()> {
        if vector.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: vector.dim(),
            });
        }
        self.vectors.insert(sha256_hex(text), vector);
        Ok(())
    }

    /// Embeds every text not already stored; duplicates are embedded once.
    pub fn embed_missing(&mut self, texts: &[String], embedder: &dyn Embedder) -> Result<usize> {
        if embedder.model_name() != self.model || embedder.dim() != self.dim {
            return Err(Error::ManifestMismatch(format!(
                "store holds {} ({}d), embedder is {} ({}d)",
                self.model,
                self.dim,
                embedder.model_name(),
                embedder.dim()
            )));
        }
        let mut todo: Vec<String> = texts.iter().filter(|t| self.get(t).is_none()).cloned().collect();
        todo.sort();
        todo.dedup();
        if todo.is_empty() {
            return Ok(0);
        }
        let vectors = embedder.embed_batch(&todo)?;
        for (t, v) in todo.iter().zip(vectors) {
            self.insert(t, v)?;
        }
        Ok(todo.len())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        atomic_write(path, &serde_json::to_vec(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let store: EmbeddingStore = serde_json::from_slice(&bytes)?;
        if let Some(v) = store.vectors.values().find(|v| v.dim() != store.dim) {
            return Err(Error::DimensionMismatch {
                expected: store.dim,
                actual: v.dim(),
            });
        }
        Ok(store)
    }
}
