#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::{json, Value};
use solar::corpus::Judgment;
use solar::providers::FixtureRule;

pub const SITUATIONS: usize = 12;
pub const MAIN_REDDITORS: [&str; 3] = ["r1", "r2", "r3"];
/// Situation whose two judgment samples disagree.
pub const TIE_SITUATION: usize = 3;

const PAIRS: [(&str, &str); 6] = [
    ("honesty with close family", "keeping the family peace"),
    ("personal financial independence", "supporting struggling relatives"),
    ("respecting personal boundaries", "being a welcoming host"),
    ("fairness among all siblings", "loyalty to a partner"),
    ("protecting a child's wellbeing", "respecting parental authority"),
    ("keeping a promise made", "caring for one's health"),
];

const TOPICS: [&str; 13] = [
    "skipping my sister's wedding",
    "refusing to lend my brother money",
    "asking my roommate to move out",
    "not inviting my stepdad to dinner",
    "telling my friend her partner cheated",
    "keeping my inheritance to myself",
    "leaving a family vacation early",
    "reporting my coworker to HR",
    "refusing to babysit my nephew",
    "selling my late father's car",
    "cancelling plans to rest at home",
    "banning my cousin from my house",
    "eating my roommate's leftovers",
];

const SCHWARTZ: [&str; 4] = [
    "Security, Benevolence",
    "Achievement, Power",
    "Tradition, Conformity",
    "Self-Direction, Universalism",
];

pub fn sid(i: usize) -> String {
    format!("s{i:02}")
}

pub fn title(i: usize) -> String {
    format!("AITA for {}?", TOPICS[i - 1])
}

pub fn body(i: usize) -> String {
    format!(
        "This happened last month and people around me are split about it. I want an outside view on what I did (case {i:02})"
    )
}

pub fn full_text(i: usize) -> String {
    format!("{}\n\n{}", title(i), body(i))
}

pub fn comment(r: &str, i: usize) -> String {
    format!("Speaking as {r} about case {i:02}, here is how I see the choice that was made.")
}

fn conflicts(i: usize) -> [(&'static str, &'static str); 2] {
    [PAIRS[i % 6], PAIRS[(i + 1) % 6]]
}

/// What the scripted chat model predicts for a situation after majority voting.
pub fn model_label(i: usize) -> Judgment {
    if i == TIE_SITUATION || i.is_multiple_of(2) {
        Judgment::Unacceptable
    } else {
        Judgment::Acceptable
    }
}

/// Gold label of a main redditor on a situation. r1 always agrees with the
/// model, r2 always disagrees, r3 splits on situation number.
pub fn gold(r: &str, i: usize) -> Judgment {
    let m = model_label(i);
    let flip = |j: Judgment| match j {
        Judgment::Acceptable => Judgment::Unacceptable,
        Judgment::Unacceptable => Judgment::Acceptable,
    };
    match r {
        "r1" => m,
        "r2" => flip(m),
        _ if i <= 6 => Judgment::Acceptable,
        _ => Judgment::Unacceptable,
    }
}

fn verdict(j: Judgment, i: usize) -> &'static str {
    match (j, i % 3) {
        (Judgment::Acceptable, 0) => "NTA",
        (Judgment::Acceptable, 1) => "NAH",
        (Judgment::Acceptable, _) => "YWNBTA",
        (Judgment::Unacceptable, 0) => "YTA",
        (Judgment::Unacceptable, 1) => "ESH",
        (Judgment::Unacceptable, _) => "YWBTA",
    }
}

fn record(inst: &str, i: usize, r: &str, verdict: &str) -> Value {
    json!({
        "instance_id": inst,
        "situation_id": sid(i),
        "situation_title": title(i),
        "situation_body": body(i),
        "redditor_id": r,
        "comment": comment(r, i),
        "verdict": verdict,
    })
}

/// Corpus lines. A fourth low-activity redditor `r4` comments on two
/// situations (one with INFO) and an extra situation `s13` only has r4, so
/// truncation with cap 3 drops both.
pub fn corpus_lines() -> Vec<String> {
    let mut out = Vec::new();
    for r in MAIN_REDDITORS {
        for i in 1..=SITUATIONS {
            out.push(record(&format!("{r}-{}", sid(i)), i, r, verdict(gold(r, i), i)).to_string());
        }
    }
    out.push(record("r4-s01", 1, "r4", "INFO").to_string());
    out.push(record("r4-s13", 13, "r4", "NTA").to_string());
    out
}

fn tradeoff_reply(r: &str, i: usize) -> String {
    let [(a, b), (c, d)] = conflicts(i);
    let item = match r {
        "r1" => format!("{a} > {b}"),
        "r2" => format!("{b} > {a}"),
        _ => format!("{c} > {d}"),
    };
    json!([item]).to_string()
}

pub fn fixture_rules() -> Vec<FixtureRule> {
    let mut rules = Vec::new();
    for i in 1..=SITUATIONS {
        let s = SCHWARTZ[i % SCHWARTZ.len()];
        rules.push(FixtureRule::contains(
            &["most salient Schwartz", &title(i)],
            format!("[Situation] {s}\n[Comment] Benevolence, Universalism"),
        ));
        let items: Vec<String> = conflicts(i).iter().map(|(a, b)| format!("{a} vs. {b}")).collect();
        rules.push(FixtureRule::contains(
            &["moral values are conflicting", &title(i)],
            json!(items).to_string(),
        ));
    }
    for r in MAIN_REDDITORS {
        for i in 1..=SITUATIONS {
            rules.push(FixtureRule::contains(
                &["[Conflicting Values]", &comment(r, i)],
                tradeoff_reply(r, i),
            ));
        }
    }
    for (n, (a, b)) in PAIRS.iter().enumerate() {
        for (m, phrase) in [a, b].iter().enumerate() {
            let name = format!("Value theme {} side {}", n + 1, m + 1);
            let needle = format!("] {phrase}");
            for (gate, ids) in [(Some("- [3]"), vec!["1", "2", "3"]), (Some("- [2]"), vec!["1", "2"]), (None, vec!["1"])] {
                let mut needles = vec!["unifying patterns", needle.as_str()];
                needles.extend(gate);
                rules.push(FixtureRule::contains(
                    &needles,
                    json!({"patterns": [{"name": name, "prompt": format!("Does the text weigh {phrase}?"), "example_ids": ids}]})
                        .to_string(),
                ));
            }
        }
    }
    for i in 1..=SITUATIONS {
        let ends = full_text(i);
        if i == TIE_SITUATION {
            rules.push(FixtureRule {
                ends_with: Some(ends.clone()),
                seed: Some(1),
                reply: "Unacceptable".into(),
                ..Default::default()
            });
        }
        let reply = match (i == TIE_SITUATION, model_label(i)) {
            (true, _) | (false, Judgment::Acceptable) => "Acceptable",
            (false, Judgment::Unacceptable) => "Unacceptable",
        };
        rules.push(FixtureRule {
            ends_with: Some(ends),
            reply: reply.into(),
            ..Default::default()
        });
    }
    rules
}

pub struct Fixture {
    pub dir: PathBuf,
    pub corpus: PathBuf,
    pub config: PathBuf,
}

/// Writes corpus, fixture rules and config into `dir`.
pub fn write_fixture(dir: &Path) -> Fixture {
    fs::create_dir_all(dir).unwrap();
    let corpus = dir.join("corpus.jsonl");
    fs::write(&corpus, corpus_lines().join("\n") + "\n").unwrap();
    let fixtures = dir.join("fixtures.json");
    fs::write(&fixtures, serde_json::to_string_pretty(&fixture_rules()).unwrap()).unwrap();
    let config = dir.join("config.json");
    let cfg = json!({
        "mock": true,
        "fixtures": fixtures,
        "embedding": { "embedding_dim": 64, "max_parallel": 2 },
        "chat": { "max_parallel": 3 },
        "folds": 5,
        "seed": 7,
        "activity_threshold": 5,
        "redditor_cap": 3,
        "min_support": 2,
        "distance_sizes": [2, 4, 6],
        "clustering": { "min_cluster_size": 4, "embed_dim": 32, "reduce_dim": 5, "seed": 7 },
    });
    fs::write(&config, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    Fixture {
        dir: dir.to_path_buf(),
        corpus,
        config,
    }
}

pub struct Outcome {
    pub ok: bool,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    pub fn json(&self) -> Value {
        serde_json::from_str(&self.stdout).unwrap_or(Value::Null)
    }
}

pub fn solar(root: &Path, config: &Path, args: &[&str]) -> Outcome {
    let out = Command::new(env!("CARGO_BIN_EXE_solar"))
        .arg("--root")
        .arg(root)
        .arg("--config")
        .arg(config)
        .args(args)
        .output()
        .expect("spawn solar");
    Outcome {
        ok: out.status.success(),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub const STAGES: &[&[&str]] = &[
    &["truncate"],
    &["stats"],
    &["annotate", "schwartz"],
    &["annotate", "conflicts"],
    &["annotate", "tradeoffs"],
    &["cluster"],
    &["embed"],
    &["index"],
    &["predict", "--strategy", "solar"],
    &["evaluate", "--strategy", "solar"],
    &["predict", "--strategy", "situation:comment-only"],
    &["evaluate", "--strategy", "situation:comment-only"],
    &["analyze", "win-rates"],
    &["analyze", "cooccurrence"],
    &["analyze", "project"],
    &["analyze", "distance"],
];

/// Runs the whole pipeline into `root`; returns the summary of every stage.
pub fn run_pipeline(fx: &Fixture, root: &Path) -> Result<Vec<Value>, String> {
    let mut out = Vec::new();
    let ingest = solar(root, &fx.config, &["ingest", fx.corpus.to_str().unwrap()]);
    if !ingest.ok {
        return Err(format!("ingest: {}", ingest.stderr));
    }
    out.push(ingest.json());
    for stage in STAGES {
        let o = solar(root, &fx.config, stage);
        if !o.ok {
            return Err(format!("{}: {}", stage.join(" "), o.stderr));
        }
        out.push(o.json());
    }
    Ok(out)
}

/// Relative path to bytes for every file under `root`, skipping `logs/`.
pub fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(base: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            let rel = p.strip_prefix(base).unwrap().to_string_lossy().replace('\\', "/");
            if rel == "logs" {
                continue;
            }
            if p.is_dir() {
                walk(base, &p, out);
            } else {
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

pub fn read_jsonl(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

/// Situation number from an id like `s07`.
pub fn situation_number(id: &str) -> usize {
    id[1..].parse().unwrap()
}
