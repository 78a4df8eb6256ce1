use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{ChatModel, ChatRequest, Embedder, EmbeddingVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub timestamp: String,
    pub kind: String,
    pub model: String,
    pub request_hash: String,
    pub request: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

enum Sink {
    File {
        path: PathBuf,
        writer: Mutex<BufWriter<File>>,
    },
    Memory(Mutex<Vec<AuditEntry>>),
}

/// Append-only newline-delimited JSON log of every provider call.
pub struct AuditLog {
    sink: Sink,
}

impl AuditLog {
    pub fn open(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(AuditLog {
            sink: Sink::File {
                path: path.to_path_buf(),
                writer: Mutex::new(BufWriter::new(file)),
            },
        })
    }

    pub fn in_memory() -> Self {
        AuditLog {
            sink: Sink::Memory(Mutex::new(Vec::new())),
        }
    }

    pub fn append(&self, entry: AuditEntry) -> Result<()> {
        match &self.sink {
            Sink::File { path, writer } => {
                let mut w = writer.lock().expect("audit lock poisoned");
                serde_json::to_writer(&mut *w, &entry)?;
                w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
                w.flush().map_err(|e| Error::io(path, e))
            }
            Sink::Memory(v) => {
                v.lock().expect("audit lock poisoned").push(entry);
                Ok(())
            }
        }
    }

    /// Entries recorded by an in-memory log; empty for file-backed logs.
    pub fn entries(&self) -> Vec<AuditEntry> {
        match &self.sink {
            Sink::Memory(v) => v.lock().expect("audit lock poisoned").clone(),
            Sink::File { .. } => Vec::new(),
        }
    }

    pub fn read(path: &Path) -> Result<Vec<AuditEntry>> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut out = Vec::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if !line.trim().is_empty() {
                out.push(serde_json::from_str(&line)?);
            }
        }
        Ok(out)
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

pub struct AuditedChat<C> {
    inner: C,
    log: Arc<AuditLog>,
}

impl<C: ChatModel> AuditedChat<C> {
    pub fn new(inner: C, log: Arc<AuditLog>) -> Self {
        AuditedChat { inner, log }
    }
}

impl<C: ChatModel> ChatModel for AuditedChat<C> {
    fn model_name(&self) -> &str {
        self.inner.model_name()
    }

    fn chat(&self, request: &ChatRequest) -> Result<String> {
        let result = self.inner.chat(request);
        let (response, error) = match &result {
            Ok(text) => (Some(Value::String(text.clone())), None),
            Err(e) => (None, Some(e.to_string())),
        };
        self.log.append(AuditEntry {
            timestamp: now(),
            kind: "chat".into(),
            model: request.model_name.clone(),
            request_hash: request.request_hash(),
            request: serde_json::to_value(request)?,
            response,
            error,
        })?;
        result
    }
}

pub struct AuditedEmbedder<E> {
    inner: E,
    log: Arc<AuditLog>,
}

impl<E: Embedder> AuditedEmbedder<E> {
    pub fn new(inner: E, log: Arc<AuditLog>) -> Self {
        AuditedEmbedder { inner, log }
    }
}

impl<E: Embedder> Embedder for AuditedEmbedder<E> {
    fn model_name(&self) -> &str {
        self.inner.model_name()
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        let result = self.inner.embed_batch(texts);
        let request = serde_json::json!({ "model": self.inner.model_name(), "input": texts });
        let (response, error) = match &result {
            Ok(vs) => (Some(serde_json::to_value(vs)?), None),
            Err(e) => (None, Some(e.to_string())),
        };
        self.log.append(AuditEntry {
            timestamp: now(),
            kind: "embed".into(),
            model: self.inner.model_name().to_string(),
            request_hash: crate::util::sha256_hex(serde_json::to_vec(&request)?),
            request,
            response,
            error,
        })?;
        result
    }
}

/// Chat provider that answers from a previously recorded audit log.
pub struct ReplayChat {
    model_name: String,
    replies: HashMap<String, String>,
}

impl ReplayChat {
    pub fn from_entries(model_name: &str, entries: &[AuditEntry]) -> Self {
        let replies = entries
            .iter()
            .filter(|e| e.kind == "chat")
            .filter_map(|e| {
                let text = e.response.as_ref()?.as_str()?.to_string();
                Some((e.request_hash.clone(), text))
            })
            .collect();
        ReplayChat {
            model_name: model_name.to_string(),
            replies,
        }
    }

    pub fn from_path(model_name: &str, path: &Path) -> Result<Self> {
        Ok(Self::from_entries(model_name, &AuditLog::read(path)?))
    }
}

impl ChatModel for ReplayChat {
    fn model_name(&self) -> &str {
        &self.model_name
    }

    fn chat(&self, request: &ChatRequest) -> Result<String> {
        let hash = request.request_hash();
        self.replies
            .get(&hash)
            .cloned()
            .ok_or(Error::NoFixture(hash))
    }
}
