//! Artifact-root manifest: which settings produced the artifacts in a
//! directory, and a digest of each artifact.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::{atomic_write, sha256_hex};

pub const MANIFEST_FILE: &str = "manifest.json";
const FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub producer: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: u32,
    pub config_hash: String,
    pub template_hash: String,
    pub embedding_model: String,
    /// Keyed by path relative to the artifact root, `/`-separated.
    pub artifacts: BTreeMap<String, ArtifactEntry>,
}

/// An artifact root together with its manifest.
#[derive(Debug)]
pub struct ArtifactRoot {
    root: PathBuf,
    manifest: Manifest,
}

impl ArtifactRoot {
    /// Opens `root`, creating a manifest if `create` is set and none exists.
    /// An existing manifest must agree with the given settings.
    pub fn open(root: &Path, config_hash: &str, template_hash: &str, embedding_model: &str, create: bool) -> Result<Self> {
        let path = root.join(MANIFEST_FILE);
        let manifest = if path.exists() {
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            let m: Manifest = serde_json::from_slice(&bytes)?;
            let checks = [
                ("format", m.format.to_string(), FORMAT.to_string()),
                ("config hash", m.config_hash.clone(), config_hash.to_string()),
                ("template hash", m.template_hash.clone(), template_hash.to_string()),
                ("embedding model", m.embedding_model.clone(), embedding_model.to_string()),
            ];
            for (what, stored, current) in checks {
                if stored != current {
                    return Err(Error::ManifestMismatch(format!(
                        "{what} of {} is {stored}, current settings give {current}",
                        root.display()
                    )));
                }
            }
            m
        } else if create {
            Manifest {
                format: FORMAT,
                config_hash: config_hash.to_string(),
                template_hash: template_hash.to_string(),
                embedding_model: embedding_model.to_string(),
                artifacts: BTreeMap::new(),
            }
        } else {
            return Err(Error::MissingUpstream {
                artifact: MANIFEST_FILE.into(),
                producer: "ingest",
            });
        };
        Ok(ArtifactRoot {
            root: root.to_path_buf(),
            manifest,
        })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn has(&self, rel: &str) -> bool {
        self.manifest.artifacts.contains_key(rel) && self.path(rel).exists()
    }

    /// Path of a recorded artifact whose bytes still match the manifest.
    pub fn require(&self, rel: &str, producer: &'static str) -> Result<PathBuf> {
        let path = self.path(rel);
        let entry = match self.manifest.artifacts.get(rel) {
            Some(e) if path.exists() => e,
            _ => {
                return Err(Error::MissingUpstream {
                    artifact: rel.to_string(),
                    producer,
                })
            }
        };
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        if sha256_hex(&bytes) != entry.sha256 {
            return Err(Error::ManifestMismatch(format!(
                "{rel} changed since `{}` wrote it",
                entry.producer
            )));
        }
        Ok(path)
    }

    /// Writes an artifact and records it.
    pub fn write(&mut self, rel: &str, producer: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.path(rel);
        atomic_write(&path, bytes)?;
        self.record(rel, producer)?;
        Ok(path)
    }

    /// Records an artifact already written at `rel`.
    pub fn record(&mut self, rel: &str, producer: &str) -> Result<()> {
        let path = self.path(rel);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        self.manifest.artifacts.insert(
            rel.to_string(),
            ArtifactEntry {
                producer: producer.to_string(),
                sha256: sha256_hex(&bytes),
            },
        );
        Ok(())
    }

    pub fn save(&self) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(&self.manifest)?;
        bytes.push(b'\n');
        atomic_write(&self.root.join(MANIFEST_FILE), &bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lifecycle() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            ArtifactRoot::open(dir.path(), "c", "t", "m", false),
            Err(Error::MissingUpstream { producer: "ingest", .. })
        ));
        let mut root = ArtifactRoot::open(dir.path(), "c", "t", "m", true).unwrap();
        root.write("a/x.json", "stage", b"{}").unwrap();
        root.save().unwrap();
        let root = ArtifactRoot::open(dir.path(), "c", "t", "m", false).unwrap();
        assert!(root.require("a/x.json", "stage").is_ok());
        assert!(matches!(root.require("y.json", "other"), Err(Error::MissingUpstream { producer: "other", .. })));
        fs::write(dir.path().join("a/x.json"), b"[]").unwrap();
        assert!(matches!(root.require("a/x.json", "stage"), Err(Error::ManifestMismatch(_))));
        assert!(matches!(
            ArtifactRoot::open(dir.path(), "other", "t", "m", false),
            Err(Error::ManifestMismatch(_))
        ));
        assert!(ArtifactRoot::open(dir.path(), "c", "t", "m2", true).is_err());
    }
}
