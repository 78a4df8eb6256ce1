use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analytics::DEFAULT_MIN_SUPPORT;
use crate::corpus::DEFAULT_PROMPT_CHARS;
use crate::error::{Error, Result};
use crate::eval::DEFAULT_FOLDS;
use crate::inference::{InferenceParams, CONTROVERSY_THRESHOLD, DEFAULT_SAMPLE_COUNT};
use crate::providers::ProviderConfig;
use crate::retrieval::DEFAULT_K;
use crate::util::sha256_hex;
use crate::values::ClusterParams;

pub const DEFAULT_ACTIVITY_THRESHOLD: usize = 2_000;
pub const DEFAULT_REDDITOR_CAP: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub chat: ProviderConfig,
    pub embedding: ProviderConfig,
    /// Use the offline mock embedder and a fixture-scripted chat model.
    pub mock: bool,
    /// Fixture rules for the mock chat model.
    pub fixtures: Option<PathBuf>,
    /// Directory with template overrides.
    pub templates_dir: Option<PathBuf>,
    pub k: usize,
    pub threshold: f64,
    pub sample_count: usize,
    pub prompt_chars: usize,
    pub folds: usize,
    pub seed: u64,
    pub activity_threshold: usize,
    pub redditor_cap: usize,
    pub clustering: ClusterParams,
    pub min_support: usize,
    pub skewed_k: usize,
    /// History sizes sampled for the retrieval-distance curve.
    pub distance_sizes: Vec<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            chat: ProviderConfig::default(),
            embedding: ProviderConfig {
                model_name: "text-embedding-3-large".into(),
                ..ProviderConfig::default()
            },
            mock: false,
            fixtures: None,
            templates_dir: None,
            k: DEFAULT_K,
            threshold: CONTROVERSY_THRESHOLD,
            sample_count: DEFAULT_SAMPLE_COUNT,
            prompt_chars: DEFAULT_PROMPT_CHARS,
            folds: DEFAULT_FOLDS,
            seed: 0,
            activity_threshold: DEFAULT_ACTIVITY_THRESHOLD,
            redditor_cap: DEFAULT_REDDITOR_CAP,
            clustering: ClusterParams::default(),
            min_support: DEFAULT_MIN_SUPPORT,
            skewed_k: 3,
            distance_sizes: vec![10, 20, 50, 100, 200, 500, 1000, 2000],
        }
    }
}

/// The fields that shape stored annotations, embeddings, clusters and indices.
#[derive(Serialize)]
struct HashedFields<'a> {
    mock: bool,
    chat_model: &'a str,
    embedding_model: &'a str,
    embedding_dim: usize,
    prompt_chars: usize,
    folds: usize,
    seed: u64,
    activity_threshold: usize,
    redditor_cap: usize,
    min_cluster_size: usize,
    assign_threshold: f64,
    cluster_embed_dim: usize,
    reduce_dim: usize,
    cluster_seed: u64,
    kmeans_max_iter: usize,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        self.chat.validate()?;
        self.embedding.validate()?;
        let positive = [
            ("k", self.k),
            ("sample_count", self.sample_count),
            ("prompt_chars", self.prompt_chars),
            ("folds", self.folds),
            ("activity_threshold", self.activity_threshold),
            ("redditor_cap", self.redditor_cap),
            ("clustering.min_cluster_size", self.clustering.min_cluster_size),
            ("clustering.embed_dim", self.clustering.embed_dim),
            ("clustering.reduce_dim", self.clustering.reduce_dim),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidInput(format!("{name} must be positive")));
            }
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::InvalidInput("threshold must lie in [0, 1]".into()));
        }
        if self.mock && self.fixtures.is_none() {
            return Err(Error::InvalidInput("mock mode needs a fixtures file".into()));
        }
        Ok(())
    }

    pub fn inference_params(&self) -> InferenceParams {
        InferenceParams {
            k: self.k,
            sample_count: self.sample_count,
            threshold: self.threshold,
            prompt_chars: self.prompt_chars,
        }
    }

    /// Hash over the settings that determine stored artifacts. Run-time knobs
    /// (k, threshold, sample count, minimum support, parallelism, endpoints)
    /// are left out so they can change without rebuilding annotations.
    pub fn pipeline_hash(&self) -> String {
        let fields = HashedFields {
            mock: self.mock,
            chat_model: &self.chat.model_name,
            embedding_model: &self.embedding.model_name,
            embedding_dim: self.embedding.embedding_dim,
            prompt_chars: self.prompt_chars,
            folds: self.folds,
            seed: self.seed,
            activity_threshold: self.activity_threshold,
            redditor_cap: self.redditor_cap,
            min_cluster_size: self.clustering.min_cluster_size,
            assign_threshold: self.clustering.assign_threshold,
            cluster_embed_dim: self.clustering.embed_dim,
            reduce_dim: self.clustering.reduce_dim,
            cluster_seed: self.clustering.seed,
            kmeans_max_iter: self.clustering.kmeans_max_iter,
        };
        sha256_hex(serde_json::to_vec(&fields).expect("config serializes"))
    }
}
