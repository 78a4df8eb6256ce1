//! Corpus data model: situations, redditors and their verdict-coded comments.
//!
//! Records arrive as newline-delimited JSON, one comment per line. Malformed
//! lines are collected in an [`IngestIssue`] report instead of aborting the
//! whole file.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of characters of situation text shown in prompts.
pub const DEFAULT_PROMPT_CHARS: usize = 2_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VerdictCode {
    #[serde(rename = "YTA")]
    Yta,
    #[serde(rename = "YWBTA")]
    Ywbta,
    #[serde(rename = "NTA")]
    Nta,
    #[serde(rename = "YWNBTA")]
    Ywnbta,
    #[serde(rename = "ESH")]
    Esh,
    #[serde(rename = "NAH")]
    Nah,
    #[serde(rename = "INFO")]
    Info,
}

impl VerdictCode {
    pub const ALL: [VerdictCode; 7] = [
        VerdictCode::Yta,
        VerdictCode::Ywbta,
        VerdictCode::Nta,
        VerdictCode::Ywnbta,
        VerdictCode::Esh,
        VerdictCode::Nah,
        VerdictCode::Info,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VerdictCode::Yta => "YTA",
            VerdictCode::Ywbta => "YWBTA",
            VerdictCode::Nta => "NTA",
            VerdictCode::Ywnbta => "YWNBTA",
            VerdictCode::Esh => "ESH",
            VerdictCode::Nah => "NAH",
            VerdictCode::Info => "INFO",
        }
    }
}

impl FromStr for VerdictCode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        VerdictCode::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::UnknownVerdict(s.to_string()))
    }
}

impl fmt::Display for VerdictCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Binary acceptability judgment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Judgment {
    Acceptable,
    Unacceptable,
}

impl Judgment {
    pub fn as_str(self) -> &'static str {
        match self {
            Judgment::Acceptable => "Acceptable",
            Judgment::Unacceptable => "Unacceptable",
        }
    }
}

impl fmt::Display for Judgment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Groups the community's verdict codes into a binary judgment. `INFO` carries
/// no judgment and maps to `None`.
pub fn map_verdict(code: VerdictCode) -> Option<Judgment> {
    match code {
        VerdictCode::Nta | VerdictCode::Nah | VerdictCode::Ywnbta => Some(Judgment::Acceptable),
        VerdictCode::Yta | VerdictCode::Esh | VerdictCode::Ywbta => Some(Judgment::Unacceptable),
        VerdictCode::Info => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Situation {
    pub situation_id: String,
    pub title: String,
    pub body: String,
}

impl Situation {
    /// Title and body joined; the text that gets embedded.
    pub fn full_text(&self) -> String {
        if self.body.trim().is_empty() {
            self.title.clone()
        } else {
            format!("{}\n\n{}", self.title, self.body)
        }
    }

    /// Full text cut to at most `max_chars` characters, for prompt rendering.
    pub fn prompt_text(&self, max_chars: usize) -> String {
        let text = self.full_text();
        match text.char_indices().nth(max_chars) {
            Some((cut, _)) => text[..cut].trim_end().to_string(),
            None => text,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub instance_id: String,
    pub situation_id: String,
    pub redditor_id: String,
    pub comment: String,
    pub verdict: VerdictCode,
    pub judgment: Option<Judgment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<String>,
}

/// Wire shape of one input line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub instance_id: String,
    pub situation_id: String,
    pub situation_title: String,
    #[serde(default)]
    pub situation_body: String,
    pub redditor_id: String,
    pub comment: String,
    pub verdict: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<String>,
    /// Present only on output files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judgment: Option<Judgment>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestIssue {
    pub line: usize,
    pub instance_id: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct IngestOutcome {
    pub corpus: Corpus,
    pub issues: Vec<IngestIssue>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub situations: BTreeMap<String, Situation>,
    pub instances: Vec<Instance>,
    pub redditors: BTreeSet<String>,
}

impl Corpus {
    /// Builds a corpus, checking referential integrity and instance id uniqueness.
    pub fn new(situations: Vec<Situation>, instances: Vec<Instance>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for s in situations {
            if s.title.trim().is_empty() {
                return Err(Error::InvalidInput(format!(
                    "situation `{}` has an empty title",
                    s.situation_id
                )));
            }
            if map.insert(s.situation_id.clone(), s).is_some() {
                return Err(Error::InvalidInput("duplicate situation id".into()));
            }
        }
        let mut seen = HashSet::new();
        let mut redditors = BTreeSet::new();
        for inst in &instances {
            if !seen.insert(inst.instance_id.as_str()) {
                return Err(Error::InvalidInput(format!(
                    "duplicate instance_id `{}`",
                    inst.instance_id
                )));
            }
            if !map.contains_key(&inst.situation_id) {
                return Err(Error::InvalidInput(format!(
                    "instance `{}` references unknown situation `{}`",
                    inst.instance_id, inst.situation_id
                )));
            }
            if inst.judgment != map_verdict(inst.verdict) {
                return Err(Error::InvalidInput(format!(
                    "instance `{}` judgment does not match verdict {}",
                    inst.instance_id, inst.verdict
                )));
            }
            redditors.insert(inst.redditor_id.clone());
        }
        Ok(Corpus {
            situations: map,
            instances,
            redditors,
        })
    }

    pub fn situation(&self, id: &str) -> Option<&Situation> {
        self.situations.get(id)
    }

    pub fn instance(&self, id: &str) -> Option<&Instance> {
        self.instances.iter().find(|i| i.instance_id == id)
    }

    pub fn instances_of<'a>(&'a self, redditor: &'a str) -> impl Iterator<Item = &'a Instance> + 'a {
        self.instances.iter().filter(move |i| i.redditor_id == redditor)
    }

    /// Instances that carry a binary judgment.
    pub fn judged(&self) -> impl Iterator<Item = &Instance> + '_ {
        self.instances.iter().filter(|i| i.judgment.is_some())
    }

    pub fn instance_counts(&self) -> BTreeMap<&str, usize> {
        let mut counts = BTreeMap::new();
        for inst in &self.instances {
            *counts.entry(inst.redditor_id.as_str()).or_insert(0) += 1;
        }
        counts
    }

    /// Index from situation id to the judgments left on it, with their authors.
    pub fn judgments_by_situation(&self) -> HashMap<&str, Vec<(&str, Judgment)>> {
        let mut out: HashMap<&str, Vec<(&str, Judgment)>> = HashMap::new();
        for inst in &self.instances {
            if let Some(j) = inst.judgment {
                out.entry(inst.situation_id.as_str())
                    .or_default()
                    .push((inst.redditor_id.as_str(), j));
            }
        }
        out
    }

    pub fn to_records(&self) -> Vec<CorpusRecord> {
        self.instances
            .iter()
            .map(|inst| {
                let s = &self.situations[&inst.situation_id];
                CorpusRecord {
                    instance_id: inst.instance_id.clone(),
                    situation_id: inst.situation_id.clone(),
                    situation_title: s.title.clone(),
                    situation_body: s.body.clone(),
                    redditor_id: inst.redditor_id.clone(),
                    comment: inst.comment.clone(),
                    verdict: inst.verdict.to_string(),
                    created_at: inst.created_at.clone(),
                    judgment: inst.judgment,
                }
            })
            .collect()
    }

    /// Writes the corpus as newline-delimited JSON, with the `judgment` field filled.
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for rec in self.to_records() {
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    fn from_parts(situations: BTreeMap<String, Situation>, instances: Vec<Instance>) -> Self {
        let redditors = instances.iter().map(|i| i.redditor_id.clone()).collect();
        Corpus {
            situations,
            instances,
            redditors,
        }
    }
}

/// Reads a newline-delimited JSON corpus file.
pub fn ingest(path: &Path) -> Result<IngestOutcome> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn ingest_reader<R: BufRead>(reader: R) -> Result<IngestOutcome> {
    let mut situations: BTreeMap<String, Situation> = BTreeMap::new();
    let mut instances = Vec::new();
    let mut seen_ids = HashSet::new();
    let mut issues = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io("<reader>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CorpusRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                issues.push(IngestIssue {
                    line: line_no,
                    instance_id: None,
                    reason: format!("malformed record: {e}"),
                });
                continue;
            }
        };
        let issue = |reason: String| IngestIssue {
            line: line_no,
            instance_id: Some(rec.instance_id.clone()),
            reason,
        };
        let verdict = match rec.verdict.trim().parse::<VerdictCode>() {
            Ok(v) => v,
            Err(e) => {
                issues.push(issue(e.to_string()));
                continue;
            }
        };
        if rec.instance_id.is_empty() || rec.situation_id.is_empty() || rec.redditor_id.is_empty() {
            issues.push(issue("empty identifier field".into()));
            continue;
        }
        if rec.situation_title.trim().is_empty() {
            issues.push(issue("empty situation title".into()));
            continue;
        }
        if seen_ids.contains(&rec.instance_id) {
            issues.push(issue(format!("duplicate instance_id `{}`", rec.instance_id)));
            continue;
        }
        if let Some(existing) = situations.get(&rec.situation_id) {
            if existing.title != rec.situation_title || existing.body != rec.situation_body {
                issues.push(issue(format!(
                    "situation `{}` text differs from its first occurrence",
                    rec.situation_id
                )));
                continue;
            }
        } else {
            situations.insert(
                rec.situation_id.clone(),
                Situation {
                    situation_id: rec.situation_id.clone(),
                    title: rec.situation_title.clone(),
                    body: rec.situation_body.clone(),
                },
            );
        }
        seen_ids.insert(rec.instance_id.clone());
        instances.push(Instance {
            instance_id: rec.instance_id,
            situation_id: rec.situation_id,
            redditor_id: rec.redditor_id,
            comment: rec.comment,
            verdict,
            judgment: map_verdict(verdict),
            created_at: rec.created_at,
        });
    }

    Ok(IngestOutcome {
        corpus: Corpus::from_parts(situations, instances),
        issues,
    })
}

/// Reduces a corpus to the situations touched by its most active redditors.
///
/// Anchors are redditors with more than `activity_threshold` instances. Only
/// situations with at least one anchor comment survive, and of the redditors
/// commenting on them the `redditor_cap` most active are kept (anchors first).
pub fn truncate(corpus: &Corpus, activity_threshold: usize, redditor_cap: usize) -> Result<Corpus> {
    if activity_threshold < 1 || redditor_cap < 1 {
        return Err(Error::InvalidInput(
            "activity_threshold and redditor_cap must be at least 1".into(),
        ));
    }
    let counts = corpus.instance_counts();
    let max_observed = counts.values().copied().max().unwrap_or(0);

    let mut anchors: Vec<(&str, usize)> = counts
        .iter()
        .filter(|(_, &c)| c > activity_threshold)
        .map(|(&r, &c)| (r, c))
        .collect();
    if anchors.is_empty() {
        return Err(Error::ThresholdTooHigh {
            threshold: activity_threshold,
            max_observed,
        });
    }
    anchors.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    anchors.truncate(redditor_cap);
    let anchor_set: HashSet<&str> = anchors.iter().map(|(r, _)| *r).collect();

    let kept_situations: HashSet<&str> = corpus
        .instances
        .iter()
        .filter(|i| anchor_set.contains(i.redditor_id.as_str()))
        .map(|i| i.situation_id.as_str())
        .collect();

    let mut surviving: BTreeMap<&str, usize> = BTreeMap::new();
    for inst in &corpus.instances {
        if kept_situations.contains(inst.situation_id.as_str()) {
            *surviving.entry(inst.redditor_id.as_str()).or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<(&str, usize)> = surviving.into_iter().collect();
    ranked.sort_by(|a, b| {
        let a_anchor = anchor_set.contains(a.0);
        let b_anchor = anchor_set.contains(b.0);
        b_anchor
            .cmp(&a_anchor)
            .then(b.1.cmp(&a.1))
            .then(a.0.cmp(b.0))
    });
    let kept_redditors: HashSet<&str> = ranked.iter().take(redditor_cap).map(|(r, _)| *r).collect();

    let instances: Vec<Instance> = corpus
        .instances
        .iter()
        .filter(|i| {
            kept_situations.contains(i.situation_id.as_str())
                && kept_redditors.contains(i.redditor_id.as_str())
        })
        .cloned()
        .collect();
    let situations = corpus
        .situations
        .iter()
        .filter(|(id, _)| kept_situations.contains(id.as_str()))
        .map(|(id, s)| (id.clone(), s.clone()))
        .collect();
    Ok(Corpus::from_parts(situations, instances))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub acceptable: usize,
    pub unacceptable: usize,
}

impl LabelCounts {
    fn add(&mut self, j: Judgment) {
        match j {
            Judgment::Acceptable => self.acceptable += 1,
            Judgment::Unacceptable => self.unacceptable += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.acceptable + self.unacceptable
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedditorSkew {
    pub redditor_id: String,
    pub labels: LabelCounts,
    pub skewness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub instances: usize,
    pub situations: usize,
    pub redditors: usize,
    pub min_instances_per_redditor: usize,
    pub max_instances_per_redditor: usize,
    pub info_instances: usize,
    pub labels: LabelCounts,
    pub most_skewed: Vec<RedditorSkew>,
    pub most_skewed_labels: LabelCounts,
}

/// Summary counts; `skewed_k` selects how many of the most label-skewed
/// redditors are reported separately.
pub fn stats(corpus: &Corpus, skewed_k: usize) -> Result<CorpusStats> {
    if corpus.instances.is_empty() {
        return Err(Error::Empty("corpus has no instances".into()));
    }
    let counts = corpus.instance_counts();
    let mut labels = LabelCounts::default();
    let mut per_redditor: BTreeMap<&str, LabelCounts> = BTreeMap::new();
    let mut info = 0;
    for inst in &corpus.instances {
        match inst.judgment {
            Some(j) => {
                labels.add(j);
                per_redditor.entry(inst.redditor_id.as_str()).or_default().add(j);
            }
            None => info += 1,
        }
    }
    let mut skews: Vec<RedditorSkew> = per_redditor
        .into_iter()
        .map(|(r, l)| RedditorSkew {
            redditor_id: r.to_string(),
            labels: l,
            skewness: (l.acceptable as f64 / l.total() as f64 - 0.5).abs(),
        })
        .collect();
    skews.sort_by(|a, b| {
        b.skewness
            .total_cmp(&a.skewness)
            .then_with(|| a.redditor_id.cmp(&b.redditor_id))
    });
    skews.truncate(skewed_k);
    let mut skewed_labels = LabelCounts::default();
    for s in &skews {
        skewed_labels.acceptable += s.labels.acceptable;
        skewed_labels.unacceptable += s.labels.unacceptable;
    }
    Ok(CorpusStats {
        instances: corpus.instances.len(),
        situations: corpus.situations.len(),
        redditors: corpus.redditors.len(),
        min_instances_per_redditor: counts.values().copied().min().unwrap_or(0),
        max_instances_per_redditor: counts.values().copied().max().unwrap_or(0),
        info_instances: info,
        labels,
        most_skewed: skews,
        most_skewed_labels: skewed_labels,
    })
}
