//! Versioned prompt templates. Each template is identified by the SHA-256 of
//! its text so stored annotations can be traced to the exact wording used.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::sha256_hex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    Schwartz,
    Conflicts,
    Tradeoffs,
    ClusterNaming,
    Judgment,
}

impl TemplateKind {
    pub const ALL: [TemplateKind; 5] = [
        TemplateKind::Schwartz,
        TemplateKind::Conflicts,
        TemplateKind::Tradeoffs,
        TemplateKind::ClusterNaming,
        TemplateKind::Judgment,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            TemplateKind::Schwartz => "schwartz.txt",
            TemplateKind::Conflicts => "conflicts.txt",
            TemplateKind::Tradeoffs => "tradeoffs.txt",
            TemplateKind::ClusterNaming => "cluster_naming.txt",
            TemplateKind::Judgment => "judgment.txt",
        }
    }

    fn builtin_text(self) -> &'static str {
        match self {
            TemplateKind::Schwartz => include_str!("../templates/schwartz.txt"),
            TemplateKind::Conflicts => include_str!("../templates/conflicts.txt"),
            TemplateKind::Tradeoffs => include_str!("../templates/tradeoffs.txt"),
            TemplateKind::ClusterNaming => include_str!("../templates/cluster_naming.txt"),
            TemplateKind::Judgment => include_str!("../templates/judgment.txt"),
        }
    }

    fn placeholders(self) -> &'static [&'static str] {
        match self {
            TemplateKind::Schwartz => &["situation", "comment"],
            TemplateKind::Conflicts => &["situation"],
            TemplateKind::Tradeoffs => &["situation", "conflicts", "comment"],
            TemplateKind::ClusterNaming => &["examples"],
            TemplateKind::Judgment => &["examples", "situation"],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    kind: TemplateKind,
    text: String,
}

impl Template {
    pub fn builtin(kind: TemplateKind) -> Self {
        Template {
            kind,
            text: kind.builtin_text().to_string(),
        }
    }

    pub fn from_text(kind: TemplateKind, text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        for p in kind.placeholders() {
            if !text.contains(&format!("{{{p}}}")) {
                return Err(Error::InvalidInput(format!(
                    "template {} lacks placeholder {{{p}}}",
                    kind.file_name()
                )));
            }
        }
        Ok(Template { kind, text })
    }

    pub fn kind(&self) -> TemplateKind {
        self.kind
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn hash(&self) -> String {
        sha256_hex(&self.text)
    }

    /// Substitutes `{name}` placeholders. Unknown names are left untouched.
    pub fn render(&self, values: &[(&str, &str)]) -> String {
        let mut out = self.text.clone();
        for (name, value) in values {
            out = out.replace(&format!("{{{name}}}"), value);
        }
        out.trim_end().to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    pub schwartz: Template,
    pub conflicts: Template,
    pub tradeoffs: Template,
    pub cluster_naming: Template,
    pub judgment: Template,
}

impl Default for TemplateSet {
    fn default() -> Self {
        TemplateSet {
            schwartz: Template::builtin(TemplateKind::Schwartz),
            conflicts: Template::builtin(TemplateKind::Conflicts),
            tradeoffs: Template::builtin(TemplateKind::Tradeoffs),
            cluster_naming: Template::builtin(TemplateKind::ClusterNaming),
            judgment: Template::builtin(TemplateKind::Judgment),
        }
    }
}

impl TemplateSet {
    pub fn get(&self, kind: TemplateKind) -> &Template {
        match kind {
            TemplateKind::Schwartz => &self.schwartz,
            TemplateKind::Conflicts => &self.conflicts,
            TemplateKind::Tradeoffs => &self.tradeoffs,
            TemplateKind::ClusterNaming => &self.cluster_naming,
            TemplateKind::Judgment => &self.judgment,
        }
    }

    fn slot(&mut self, kind: TemplateKind) -> &mut Template {
        match kind {
            TemplateKind::Schwartz => &mut self.schwartz,
            TemplateKind::Conflicts => &mut self.conflicts,
            TemplateKind::Tradeoffs => &mut self.tradeoffs,
            TemplateKind::ClusterNaming => &mut self.cluster_naming,
            TemplateKind::Judgment => &mut self.judgment,
        }
    }

    /// Built-in templates, overridden by any `<kind>.txt` files in `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let mut set = TemplateSet::default();
        for kind in TemplateKind::ALL {
            let path = dir.join(kind.file_name());
            if path.exists() {
                let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                *set.slot(kind) = Template::from_text(kind, text)?;
            }
        }
        Ok(set)
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for kind in TemplateKind::ALL {
            let path = dir.join(kind.file_name());
            fs::write(&path, self.get(kind).text()).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    /// Hash over all member template hashes, in a fixed order.
    pub fn set_hash(&self) -> String {
        let joined: Vec<String> = TemplateKind::ALL.iter().map(|k| self.get(*k).hash()).collect();
        sha256_hex(joined.join(":"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_have_placeholders() {
        for kind in TemplateKind::ALL {
            let t = Template::builtin(kind);
            assert!(Template::from_text(kind, t.text()).is_ok(), "{kind:?}");
        }
    }

    #[test]
    fn render_leaves_json_braces() {
        let t = Template::builtin(TemplateKind::ClusterNaming);
        let out = t.render(&[("examples", "- [1] x")]);
        assert!(out.contains("- [1] x"));
        assert!(out.contains("{\"patterns\""));
    }

    #[test]
    fn load_dir_overrides_and_changes_hash() {
        let dir = tempfile::tempdir().unwrap();
        let base = TemplateSet::default();
        base.write_dir(dir.path()).unwrap();
        assert_eq!(TemplateSet::load_dir(dir.path()).unwrap(), base);
        fs::write(dir.path().join("conflicts.txt"), "Conflicts? {situation}").unwrap();
        let changed = TemplateSet::load_dir(dir.path()).unwrap();
        assert_ne!(changed.set_hash(), base.set_hash());
        fs::write(dir.path().join("conflicts.txt"), "no placeholder").unwrap();
        assert!(TemplateSet::load_dir(dir.path()).is_err());
    }
}
