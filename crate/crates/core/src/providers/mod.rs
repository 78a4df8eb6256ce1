//! Embedding and chat-completion providers.
//!
//! Remote providers speak the common hosted-inference JSON shape over an
//! injectable [`Transport`]; the mock providers in [`mock`] are fully
//! deterministic and never touch a transport.

mod audit;
mod cache;
mod http;
pub mod mock;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use audit::{AuditEntry, AuditLog, AuditedChat, AuditedEmbedder, ReplayChat};
pub use cache::{CachedEmbedder, EmbeddingCache};
pub use http::{HttpChat, HttpEmbedder, Transport, UreqTransport};
pub use mock::{mock_embed, FixtureChat, FixtureRule, MockEmbedder};

/// Dense embedding; serialized as a bare array of floats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("embedding has zero dimensions".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("embedding contains non-finite values".into()));
        }
        Ok(EmbeddingVector(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn distance(&self, other: &EmbeddingVector) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Ok(euclidean(&self.0, &other.0))
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system_text: String,
    pub user_text: String,
    pub temperature: f64,
    pub model_name: String,
    /// Sampling seed forwarded to the provider; also distinguishes repeated samples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ChatRequest {
    pub fn new(system_text: impl Into<String>, user_text: impl Into<String>, model_name: &str) -> Self {
        ChatRequest {
            system_text: system_text.into(),
            user_text: user_text.into(),
            temperature: 0.0,
            model_name: model_name.to_string(),
            seed: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.user_text.trim().is_empty() {
            return Err(Error::InvalidInput("chat request has empty user text".into()));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(Error::InvalidInput("temperature must be non-negative".into()));
        }
        Ok(())
    }

    /// Hash of the prompt text alone (system and user), used to key fixtures.
    pub fn prompt_hash(&self) -> String {
        let mut buf = Vec::with_capacity(self.system_text.len() + self.user_text.len() + 1);
        buf.extend_from_slice(self.system_text.as_bytes());
        buf.push(0x1f);
        buf.extend_from_slice(self.user_text.as_bytes());
        crate::util::sha256_hex(buf)
    }

    /// Hash of the full request, used to key audit-log replay.
    pub fn request_hash(&self) -> String {
        crate::util::sha256_hex(serde_json::to_vec(self).expect("request serializes"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    pub endpoint: String,
    pub api_key_env: String,
    pub model_name: String,
    pub embedding_dim: usize,
    pub max_parallel: usize,
    pub retry_limit: usize,
    /// Base delay for exponential backoff between retries.
    pub backoff_ms: u64,
    pub timeout_secs: u64,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            endpoint: "https://api.openai.com/v1".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            model_name: "gpt-4.1".into(),
            embedding_dim: 3072,
            max_parallel: 8,
            retry_limit: 3,
            backoff_ms: 500,
            timeout_secs: 120,
        }
    }
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embedding_dim == 0 {
            return Err(Error::InvalidInput("embedding_dim must be positive".into()));
        }
        if self.max_parallel == 0 {
            return Err(Error::InvalidInput("max_parallel must be at least 1".into()));
        }
        Ok(())
    }

    pub fn api_key(&self) -> Option<String> {
        if self.api_key_env.is_empty() {
            return None;
        }
        std::env::var(&self.api_key_env).ok()
    }
}

pub trait Embedder: Send + Sync {
    fn model_name(&self) -> &str;
    fn dim(&self) -> usize;
    /// One vector per text, in input order.
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>>;
}

pub trait ChatModel: Send + Sync {
    fn model_name(&self) -> &str;
    fn chat(&self, request: &ChatRequest) -> Result<String>;
}

impl<T: Embedder + ?Sized> Embedder for Arc<T> {
    fn model_name(&self) -> &str {
        (**self).model_name()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        (**self).embed_batch(texts)
    }
}

impl<T: ChatModel + ?Sized> ChatModel for Arc<T> {
    fn model_name(&self) -> &str {
        (**self).model_name()
    }
    fn chat(&self, request: &ChatRequest) -> Result<String> {
        (**self).chat(request)
    }
}

pub(crate) fn check_batch(texts: &[String]) -> Result<()> {
    if texts.is_empty() {
        return Err(Error::Empty("embedding batch".into()));
    }
    if let Some(i) = texts.iter().position(|t| t.trim().is_empty()) {
        return Err(Error::InvalidInput(format!("text {i} in embedding batch is empty")));
    }
    Ok(())
}
