use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::Situation;
use crate::error::{Error, Result};
use crate::providers::{cosine, ChatModel, ChatRequest, Embedder};
use crate::templates::Template;

/// Minimum cosine similarity for mapping a free-text trade-off side onto a
/// listed conflict phrase.
pub const MATCH_FLOOR: f64 = 0.8;

const MIN_PHRASE_WORDS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ValueConflict {
    pub value_a: String,
    pub value_b: String,
}

impl ValueConflict {
    pub fn new(value_a: &str, value_b: &str) -> Result<Self> {
        let (a, b) = (value_a.trim(), value_b.trim());
        for side in [a, b] {
            if side.split_whitespace().count() < MIN_PHRASE_WORDS {
                return Err(Error::InvalidInput(format!(
                    "value phrase `{side}` has fewer than {MIN_PHRASE_WORDS} words"
                )));
            }
        }
        if normalize(a) == normalize(b) {
            return Err(Error::InvalidInput(format!("conflict repeats `{a}` on both sides")));
        }
        Ok(ValueConflict {
            value_a: a.to_string(),
            value_b: b.to_string(),
        })
    }
}

impl fmt::Display for ValueConflict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} vs. {}", self.value_a, self.value_b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TradeOff {
    pub preferred: String,
    pub rejected: String,
    pub source_instance: String,
    /// True when the pair could not be matched to any listed conflict.
    #[serde(default)]
    pub model_generated: bool,
}

impl TradeOff {
    pub fn new(preferred: &str, rejected: &str, source_instance: &str) -> Result<Self> {
        let (p, r) = (preferred.trim(), rejected.trim());
        if p.is_empty() || r.is_empty() {
            return Err(Error::InvalidInput("trade-off side is empty".into()));
        }
        if normalize(p) == normalize(r) {
            return Err(Error::InvalidInput(format!("trade-off prefers `{p}` over itself")));
        }
        Ok(TradeOff {
            preferred: p.to_string(),
            rejected: r.to_string(),
            source_instance: source_instance.to_string(),
            model_generated: false,
        })
    }

    /// `"preferred > rejected"`.
    pub fn render(&self) -> String {
        format!("{} > {}", self.preferred, self.rejected)
    }
}

/// Lowercased, punctuation stripped, whitespace collapsed.
pub fn normalize(phrase: &str) -> String {
    phrase
        .chars()
        .map(|c| if c.is_alphanumeric() || c.is_whitespace() { c } else { ' ' })
        .flat_map(char::to_lowercase)
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Extracts the items of a bracketed list of quoted strings.
pub(crate) fn parse_bracketed_list(reply: &str) -> Result<Vec<String>> {
    let (start, end) = match (reply.find('['), reply.rfind(']')) {
        (Some(s), Some(e)) if s < e => (s, e),
        _ => return Err(Error::parse("no bracketed list", reply)),
    };
    let body = &reply[start..=end];
    let items: Vec<String> = match serde_json::from_str::<Vec<String>>(body) {
        Ok(items) => items,
        Err(_) => {
            // Tolerate trailing commas and single quotes: pull out quoted runs.
            let inner = &body[1..body.len() - 1];
            let mut out = Vec::new();
            let mut chars = inner.chars();
            while let Some(c) = chars.next() {
                if c == '"' || c == '\'' || c == '“' {
                    let close = if c == '“' { '”' } else { c };
                    let item: String = chars.by_ref().take_while(|&x| x != close).collect();
                    out.push(item);
                }
            }
            if out.is_empty() {
                return Err(Error::parse("list items are not quoted strings", reply));
            }
            out
        }
    };
    let items: Vec<String> = items
        .into_iter()
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    if items.is_empty() {
        return Err(Error::parse("empty list", reply));
    }
    Ok(items)
}

fn split_vs(item: &str) -> Option<(&str, &str)> {
    let lower = item.to_lowercase();
    // Byte offsets agree because the marker is ASCII and lowercasing ASCII is length-preserving;
    // non-ASCII input falls back to a case-sensitive search.
    for marker in [" vs. ", " vs ", " versus "] {
        let pos = if lower.len() == item.len() {
            lower.find(marker)
        } else {
            item.find(marker)
        };
        if let Some(p) = pos {
            return Some((&item[..p], &item[p + marker.len()..]));
        }
    }
    None
}

/// Parses a `["A vs. B", ...]` reply, preserving order.
pub fn parse_conflicts(reply: &str) -> Result<Vec<ValueConflict>> {
    parse_bracketed_list(reply)?
        .iter()
        .map(|item| {
            let (a, b) = split_vs(item)
                .ok_or_else(|| Error::parse(format!("item `{item}` lacks `vs.`"), reply))?;
            ValueConflict::new(a, b).map_err(|e| Error::parse(e.to_string(), reply))
        })
        .collect()
}

/// Parses a `["A > B", ...]` reply. Items without `>` are skipped; at least one must have it.
pub fn parse_tradeoffs(reply: &str, source_instance: &str) -> Result<Vec<TradeOff>> {
    let items = parse_bracketed_list(reply)?;
    let mut out = Vec::new();
    for item in &items {
        if let Some((p, r)) = item.split_once('>') {
            out.push(TradeOff::new(p, r, source_instance).map_err(|e| Error::parse(e.to_string(), reply))?);
        }
    }
    if out.is_empty() {
        return Err(Error::parse("no item contains `>`", reply));
    }
    Ok(out)
}

pub fn annotate_conflicts(
    situation: &Situation,
    chat: &dyn ChatModel,
    template: &Template,
    prompt_chars: usize,
) -> Result<Vec<ValueConflict>> {
    let prompt = template.render(&[("situation", &situation.prompt_text(prompt_chars))]);
    let reply = chat.chat(&ChatRequest::new("", prompt, chat.model_name()))?;
    parse_conflicts(&reply)
}

/// Asks which listed conflicts a comment takes sides on, and in which
/// direction. Sides are then matched back onto the listed conflict phrases.
#[allow(clippy::too_many_arguments)]
pub fn annotate_tradeoffs(
    situation: &Situation,
    conflicts: &[ValueConflict],
    comment: &str,
    source_instance: &str,
    chat: &dyn ChatModel,
    template: &Template,
    prompt_chars: usize,
    matcher: Option<&dyn Embedder>,
) -> Result<Vec<TradeOff>> {
    if conflicts.is_empty() {
        return Err(Error::Empty("conflict list".into()));
    }
    let listed: Vec<String> = conflicts.iter().map(|c| c.to_string()).collect();
    let listed = serde_json::to_string(&listed)?;
    let prompt = template.render(&[
        ("situation", &situation.prompt_text(prompt_chars)),
        ("conflicts", &listed),
        ("comment", comment.trim()),
    ]);
    let reply = chat.chat(&ChatRequest::new("", prompt, chat.model_name()))?;
    let mut tradeoffs = parse_tradeoffs(&reply, source_instance)?;
    match_tradeoffs(&mut tradeoffs, conflicts, matcher)?;
    Ok(tradeoffs)
}

/// Maps each trade-off onto a listed conflict: normalized exact match first,
/// then the best cosine match over phrase embeddings (both sides at least
/// [`MATCH_FLOOR`]). Matched trade-offs take the conflict's wording; the rest
/// are flagged as model-generated.
pub fn match_tradeoffs(
    tradeoffs: &mut [TradeOff],
    conflicts: &[ValueConflict],
    embedder: Option<&dyn Embedder>,
) -> Result<()> {
    let mut pending = Vec::new();
    for (i, t) in tradeoffs.iter_mut().enumerate() {
        let (p, r) = (normalize(&t.preferred), normalize(&t.rejected));
        let exact = conflicts.iter().find_map(|c| {
            let (a, b) = (normalize(&c.value_a), normalize(&c.value_b));
            if p == a && r == b {
                Some((c.value_a.clone(), c.value_b.clone()))
            } else if p == b && r == a {
                Some((c.value_b.clone(), c.value_a.clone()))
            } else {
                None
            }
        });
        match exact {
            Some((pref, rej)) => {
                t.preferred = pref;
                t.rejected = rej;
                t.model_generated = false;
            }
            None => pending.push(i),
        }
    }
    if pending.is_empty() {
        return Ok(());
    }
    let Some(embedder) = embedder else {
        for i in pending {
            tradeoffs[i].model_generated = true;
        }
        return Ok(());
    };

    let mut phrases: BTreeSet<String> = BTreeSet::new();
    for c in conflicts {
        phrases.insert(c.value_a.clone());
        phrases.insert(c.value_b.clone());
    }
    for &i in &pending {
        phrases.insert(tradeoffs[i].preferred.clone());
        phrases.insert(tradeoffs[i].rejected.clone());
    }
    let phrases: Vec<String> = phrases.into_iter().collect();
    let vectors = embedder.embed_batch(&phrases)?;
    let vec_of: HashMap<&str, &[f64]> = phrases
        .iter()
        .map(String::as_str)
        .zip(vectors.iter().map(|v| v.as_slice()))
        .collect();
    let sim = |x: &str, y: &str| cosine(vec_of[x], vec_of[y]);

    for i in pending {
        let t = &tradeoffs[i];
        let mut best: Option<(f64, String, String)> = None;
        for c in conflicts {
            let forward = sim(&t.preferred, &c.value_a).min(sim(&t.rejected, &c.value_b));
            let backward = sim(&t.preferred, &c.value_b).min(sim(&t.rejected, &c.value_a));
            let candidates = [
                (forward, &c.value_a, &c.value_b),
                (backward, &c.value_b, &c.value_a),
            ];
            for (score, pref, rej) in candidates {
                if best.as_ref().is_none_or(|b| score > b.0) {
                    best = Some((score, pref.clone(), rej.clone()));
                }
            }
        }
        let t = &mut tradeoffs[i];
        match best {
            Some((score, pref, rej)) if score >= MATCH_FLOOR => {
                t.preferred = pref;
                t.rejected = rej;
                t.model_generated = false;
            }
            _ => t.model_generated = true,
        }
    }
    Ok(())
}

/// Canonical value text: phrases deduplicated, sorted and joined with `"; "`.
pub fn value_text<I, S>(phrases: I) -> String
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let set: BTreeSet<String> = phrases
        .into_iter()
        .map(|p| p.as_ref().trim().to_string())
        .filter(|p| !p.is_empty())
        .collect();
    set.into_iter().collect::<Vec<_>>().join("; ")
}

pub fn conflict_text(conflicts: &[ValueConflict]) -> String {
    value_text(conflicts.iter().flat_map(|c| [&c.value_a, &c.value_b]))
}

pub fn tradeoff_text(tradeoffs: &[TradeOff]) -> String {
    value_text(tradeoffs.iter().flat_map(|t| [&t.preferred, &t.rejected]))
}
