use std::fs;
use std::path::{Path, PathBuf};

use super::{Embedder, EmbeddingVector};
use crate::error::{Error, Result};
use crate::util::{atomic_write, sha256_hex};

/// On-disk embedding cache keyed by (model key, content hash). `CachedEmbedder`
/// uses `<model>-<dim>d` as the model key.
///
/// Entries hold the serialized vector exactly as first received.
#[derive(Debug, Clone)]
pub struct EmbeddingCache {
    root: PathBuf,
}

impl EmbeddingCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        EmbeddingCache { root: root.into() }
    }

    fn entry_path(&self, model: &str, text: &str) -> PathBuf {
        let model_dir: String = model
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
            .collect();
        let hash = sha256_hex(text);
        self.root.join(model_dir).join(&hash[..2]).join(format!("{hash}.json"))
    }

    pub fn get_raw(&self, model: &str, text: &str) -> Result<Option<Vec<u8>>> {
        let p = self.entry_path(model, text);
        match fs::read(&p) {
            Ok(bytes) => Ok(Some(bytes)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::io(p, e)),
        }
    }

    pub fn get(&self, model: &str, text: &str) -> Result<Option<EmbeddingVector>> {
        self.get_raw(model, text)?
            .map(|bytes| serde_json::from_slice(&bytes).map_err(Error::from))
            .transpose()
    }

    pub fn put(&self, model: &str, text: &str, vector: &EmbeddingVector) -> Result<()> {
        atomic_write(&self.entry_path(model, text), &serde_json::to_vec(vector)?)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }
}

/// Embedder wrapper that serves hits from an [`EmbeddingCache`] and only
/// forwards misses to the inner provider.
pub struct CachedEmbedder<E> {
    inner: E,
    cache: EmbeddingCache,
}

impl<E: Embedder> CachedEmbedder<E> {
    pub fn new(inner: E, cache: EmbeddingCache) -> Self {
        CachedEmbedder { inner, cache }
    }
}

impl<E: Embedder> Embedder for CachedEmbedder<E> {
    fn model_name(&self) -> &str {
        self.inner.model_name()
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        super::check_batch(texts)?;
        // The same model can serve several requested dimensions.
        let key = format!("{}-{}d", self.inner.model_name(), self.inner.dim());
        let model = key.as_str();
        let mut out: Vec<Option<EmbeddingVector>> = Vec::with_capacity(texts.len());
        let mut misses = Vec::new();
        for (i, t) in texts.iter().enumerate() {
            let hit = self.cache.get(model, t)?;
            if hit.is_none() {
                misses.push(i);
            }
            out.push(hit);
        }
        if !misses.is_empty() {
            let miss_texts: Vec<String> = misses.iter().map(|&i| texts[i].clone()).collect();
            let fresh = self.inner.embed_batch(&miss_texts)?;
            for (&i, v) in misses.iter().zip(fresh) {
                if v.dim() != self.inner.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: self.inner.dim(),
                        actual: v.dim(),
                    });
                }
                self.cache.put(model, &texts[i], &v)?;
                out[i] = Some(v);
            }
        }
        Ok(out.into_iter().map(|v| v.expect("filled above")).collect())
    }
}
