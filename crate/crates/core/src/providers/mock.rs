//! Offline providers: a hashing bag-of-words embedder and a rule-based
//! fixture chat model.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{check_batch, ChatModel, ChatRequest, Embedder, EmbeddingVector};
use crate::error::{Error, Result};

pub const MIN_MOCK_DIM: usize = 8;

fn bucket(token: &str, dim: usize) -> usize {
    let digest = Sha256::digest(token.as_bytes());
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    (u64::from_le_bytes(head) % dim as u64) as usize
}

/// Deterministic text embedding: lowercased alphanumeric tokens are hashed
/// into `dim` buckets as counts, then the vector is scaled to unit length.
///
/// # Panics
/// If `dim` is below [`MIN_MOCK_DIM`].
pub fn mock_embed(text: &str, dim: usize) -> EmbeddingVector {
    assert!(dim >= MIN_MOCK_DIM, "mock embedding dim must be at least {MIN_MOCK_DIM}");
    let mut v = vec![0.0f64; dim];
    let mut any = false;
    for token in text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
    {
        v[bucket(&token.to_lowercase(), dim)] += 1.0;
        any = true;
    }
    if !any {
        v[bucket(text, dim)] = 1.0;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in &mut v {
        *x /= norm;
    }
    EmbeddingVector::new(v).expect("finite by construction")
}

#[derive(Debug, Clone)]
pub struct MockEmbedder {
    model_name: String,
    dim: usize,
}

impl MockEmbedder {
    pub fn new(model_name: &str, dim: usize) -> Result<Self> {
        if dim < MIN_MOCK_DIM {
            return Err(Error::InvalidInput(format!(
                "mock embedding dim must be at least {MIN_MOCK_DIM}"
            )));
        }
        Ok(MockEmbedder {
            model_name: model_name.to_string(),
            dim,
        })
    }
}

impl Embedder for MockEmbedder {
    fn model_name(&self) -> &str {
        &self.model_name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        check_batch(texts)?;
        Ok(texts.iter().map(|t| mock_embed(t, self.dim)).collect())
    }
}

/// One scripted reply. Every condition that is set must hold; a rule with no
/// conditions matches any request.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixtureRule {
    /// Exact match on [`ChatRequest::prompt_hash`].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prompt_sha256: Option<String>,
    /// Substrings that must all occur in the user text.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub contains: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ends_with: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub reply: String,
}

impl FixtureRule {
    pub fn hashed(prompt_sha256: impl Into<String>, reply: impl Into<String>) -> Self {
        FixtureRule {
            prompt_sha256: Some(prompt_sha256.into()),
            reply: reply.into(),
            ..Default::default()
        }
    }

    pub fn contains(needles: &[&str], reply: impl Into<String>) -> Self {
        FixtureRule {
            contains: needles.iter().map(|s| s.to_string()).collect(),
            reply: reply.into(),
            ..Default::default()
        }
    }

    fn matches(&self, req: &ChatRequest) -> bool {
        if let Some(h) = &self.prompt_sha256 {
            if *h != req.prompt_hash() {
                return false;
            }
        }
        if let Some(suffix) = &self.ends_with {
            if !req.user_text.trim_end().ends_with(suffix.trim_end()) {
                return false;
            }
        }
        if let Some(seed) = self.seed {
            if req.seed != Some(seed) {
                return false;
            }
        }
        self.contains.iter().all(|n| req.user_text.contains(n.as_str()))
    }
}

/// Chat model replaying scripted replies; the first matching rule wins.
#[derive(Debug, Clone)]
pub struct FixtureChat {
    model_name: String,
    rules: Vec<FixtureRule>,
}

impl FixtureChat {
    pub fn new(model_name: &str, rules: Vec<FixtureRule>) -> Self {
        FixtureChat {
            model_name: model_name.to_string(),
            rules,
        }
    }

    /// Loads rules from a JSON array or newline-delimited JSON file.
    pub fn load(model_name: &str, path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let rules = if text.trim_start().starts_with('[') {
            serde_json::from_str(&text)?
        } else {
            text.lines()
                .filter(|l| !l.trim().is_empty())
                .map(serde_json::from_str)
                .collect::<std::result::Result<Vec<FixtureRule>, _>>()?
        };
        Ok(FixtureChat::new(model_name, rules))
    }

    pub fn rules(&self) -> &[FixtureRule] {
        &self.rules
    }
}

impl ChatModel for FixtureChat {
    fn model_name(&self) -> &str {
        &self.model_name
    }

    fn chat(&self, request: &ChatRequest) -> Result<String> {
        request.validate()?;
        self.rules
            .iter()
            .find(|r| r.matches(request))
            .map(|r| r.reply.clone())
            .ok_or_else(|| Error::NoFixture(request.prompt_hash()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mock_embed_is_deterministic_and_unit() {
        let a = mock_embed("x", 64);
        assert_eq!(a, mock_embed("x", 64));
        for t in ["x", "wedding gift money", "!!!", "a a a b"] {
            let n: f64 = mock_embed(t, 64).as_slice().iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn shared_tokens_are_closer() {
        let base = mock_embed("wedding gift money", 64);
        let near = mock_embed("wedding gift card", 64);
        let far = mock_embed("poker night apartment", 64);
        let d_near = base.distance(&near).unwrap();
        let d_far = base.distance(&far).unwrap();
        // Buckets at dim 64: wedding=47 gift=33 money=13 card=3 poker=59
        // night=23 apartment=47. Near shares two tokens (cos 2/3); far only
        // collides on bucket 47 (cos 1/3).
        assert!((d_near - (2.0f64 / 3.0).sqrt()).abs() < 1e-9, "{d_near}");
        assert!((d_far - (4.0f64 / 3.0).sqrt()).abs() < 1e-9, "{d_far}");
        assert!(d_near < d_far);
    }

    #[test]
    fn embedder_shape_contract() {
        let e = MockEmbedder::new("m", 32).unwrap();
        let out = e.embed_batch(&["a".into(), "b".into(), "a".into()]).unwrap();
        assert_eq!(out.len(), 3);
        assert!(out.iter().all(|v| v.dim() == 32));
        assert_eq!(out[0], out[2]);
        assert!(e.embed_batch(&[]).is_err());
        assert!(e.embed_batch(&["".into()]).is_err());
        assert!(MockEmbedder::new("m", 4).is_err());
    }

    #[test]
    fn fixture_by_hash_and_unscripted() {
        let req = ChatRequest::new("sys", "prompt text", "m");
        let chat = FixtureChat::new("m", vec![FixtureRule::hashed(req.prompt_hash(), "R")]);
        assert_eq!(chat.chat(&req).unwrap(), "R");
        let other = ChatRequest::new("sys", "other", "m");
        assert!(matches!(chat.chat(&other), Err(Error::NoFixture(_))));
    }

    #[test]
    fn fixture_rule_conditions() {
        let rules = vec![
            FixtureRule {
                ends_with: Some("[Situation] road trip".into()),
                seed: Some(1),
                reply: "Unacceptable".into(),
                ..Default::default()
            },
            FixtureRule {
                ends_with: Some("[Situation] road trip".into()),
                reply: "Acceptable".into(),
                ..Default::default()
            },
        ];
        let chat = FixtureChat::new("m", rules);
        let mut req = ChatRequest::new("", "examples...\n[Situation] road trip\n", "m");
        req.seed = Some(0);
        assert_eq!(chat.chat(&req).unwrap(), "Acceptable");
        req.seed = Some(1);
        assert_eq!(chat.chat(&req).unwrap(), "Unacceptable");
    }

    #[test]
    fn fixture_loads_jsonl_and_array() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.json");
        fs::write(&a, r#"[{"contains": ["x"], "reply": "1"}]"#).unwrap();
        let b = dir.path().join("b.jsonl");
        fs::write(&b, "{\"contains\": [\"x\"], \"reply\": \"1\"}\n{\"reply\": \"fallback\"}\n").unwrap();
        assert_eq!(FixtureChat::load("m", &a).unwrap().rules().len(), 1);
        let chat = FixtureChat::load("m", &b).unwrap();
        assert_eq!(chat.chat(&ChatRequest::new("", "y", "m")).unwrap(), "fallback");
    }
}
