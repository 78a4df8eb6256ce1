use std::sync::Arc;
use std::thread;
use std::time::Duration;

use rand::Rng;
use serde_json::{json, Value};

use super::{check_batch, ChatModel, ChatRequest, Embedder, EmbeddingVector, ProviderConfig};
use crate::error::{Error, Result};

/// Inputs per embedding request.
const EMBED_CHUNK: usize = 256;

/// Posts a JSON body and returns the decoded JSON response.
pub trait Transport: Send + Sync {
    fn post_json(&self, url: &str, bearer: Option<&str>, body: &Value) -> Result<Value>;
}

pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new(timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        UreqTransport { agent }
    }
}

impl Transport for UreqTransport {
    fn post_json(&self, url: &str, bearer: Option<&str>, body: &Value) -> Result<Value> {
        let mut req = self.agent.post(url).header("Content-Type", "application/json");
        if let Some(key) = bearer {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(body)
            .map_err(|e| Error::Transport(format!("POST {url}: {e}")))?;
        resp.body_mut()
            .read_json::<Value>()
            .map_err(|e| Error::Transport(format!("decoding response from {url}: {e}")))
    }
}

/// Runs `op` up to `1 + retry_limit` times, sleeping with exponential backoff
/// plus jitter between transport failures. Other errors return immediately.
pub(crate) fn with_retries<T>(config: &ProviderConfig, mut op: impl FnMut() -> Result<T>) -> Result<T> {
    let mut attempt = 0;
    loop {
        match op() {
            Err(Error::Transport(msg)) if attempt < config.retry_limit => {
                let base = config.backoff_ms.saturating_mul(1 << attempt.min(16));
                let jitter = if config.backoff_ms > 0 {
                    rand::thread_rng().gen_range(0..=config.backoff_ms)
                } else {
                    0
                };
                log::warn!("transport failure (attempt {}): {msg}; retrying", attempt + 1);
                thread::sleep(Duration::from_millis(base + jitter));
                attempt += 1;
            }
            Err(Error::Transport(msg)) => {
                return Err(Error::Transport(format!(
                    "{msg} (gave up after {} attempts)",
                    attempt + 1
                )))
            }
            other => return other,
        }
    }
}

fn endpoint(config: &ProviderConfig, path: &str) -> String {
    format!("{}/{}", config.endpoint.trim_end_matches('/'), path)
}

pub struct HttpEmbedder {
    config: ProviderConfig,
    transport: Arc<dyn Transport>,
    api_key: Option<String>,
}

impl HttpEmbedder {
    pub fn new(config: ProviderConfig, transport: Arc<dyn Transport>) -> Result<Self> {
        config.validate()?;
        let api_key = config.api_key();
        Ok(HttpEmbedder {
            config,
            transport,
            api_key,
        })
    }

    fn embed_chunk(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        let body = json!({
            "model": self.config.model_name,
            "input": texts,
            "dimensions": self.config.embedding_dim,
        });
        let url = endpoint(&self.config, "embeddings");
        let resp = with_retries(&self.config, || {
            self.transport.post_json(&url, self.api_key.as_deref(), &body)
        })?;
        let data = resp
            .get("data")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Provider("embedding response has no `data` array".into()))?;
        if data.len() != texts.len() {
            return Err(Error::Provider(format!(
                "embedding response has {} items for {} inputs",
                data.len(),
                texts.len()
            )));
        }
        data.iter()
            .map(|item| {
                let values: Vec<f64> = item
                    .get("embedding")
                    .and_then(Value::as_array)
                    .ok_or_else(|| Error::Provider("embedding item has no `embedding`".into()))?
                    .iter()
                    .map(|v| {
                        v.as_f64()
                            .ok_or_else(|| Error::Provider("non-numeric embedding value".into()))
                    })
                    .collect::<Result<_>>()?;
                if values.len() != self.config.embedding_dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.config.embedding_dim,
                        actual: values.len(),
                    });
                }
                EmbeddingVector::new(values)
            })
            .collect()
    }
}

impl Embedder for HttpEmbedder {
    fn model_name(&self) -> &str {
        &self.config.model_name
    }

    fn dim(&self) -> usize {
        self.config.embedding_dim
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        check_batch(texts)?;
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(EMBED_CHUNK) {
            out.extend(self.embed_chunk(chunk)?);
        }
        Ok(out)
    }
}

pub struct HttpChat {
    config: ProviderConfig,
    transport: Arc<dyn Transport>,
    api_key: Option<String>,
}

impl HttpChat {
    pub fn new(config: ProviderConfig, transport: Arc<dyn Transport>) -> Result<Self> {
        config.validate()?;
        let api_key = config.api_key();
        Ok(HttpChat {
            config,
            transport,
            api_key,
        })
    }
}

pub(crate) fn chat_body(request: &ChatRequest) -> Value {
    let mut messages = Vec::new();
    if !request.system_text.is_empty() {
        messages.push(json!({"role": "system", "content": request.system_text}));
    }
    messages.push(json!({"role": "user", "content": request.user_text}));
    let mut body = json!({
        "model": request.model_name,
        "messages": messages,
        "temperature": request.temperature,
    });
    if let Some(seed) = request.seed {
        body["seed"] = json!(seed);
    }
    body
}

impl ChatModel for HttpChat {
    fn model_name(&self) -> &str {
        &self.config.model_name
    }

    fn chat(&self, request: &ChatRequest) -> Result<String> {
        request.validate()?;
        let body = chat_body(request);
        let url = endpoint(&self.config, "chat/completions");
        let resp = with_retries(&self.config, || {
            self.transport.post_json(&url, self.api_key.as_deref(), &body)
        })?;
        let content = resp
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Provider("chat response has no choices[0].message.content".into()))?;
        if content.trim().is_empty() {
            return Err(Error::Provider("empty completion".into()));
        }
        Ok(content.to_string())
    }
}
