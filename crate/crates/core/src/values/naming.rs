use std::collections::HashMap;

use serde::Deserialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::providers::{ChatModel, ChatRequest};
use crate::templates::Template;

use super::cluster::ValueCluster;

/// Unique member phrases shown to the model per cluster.
pub const MAX_SHOWN: usize = 30;
pub const MAX_NAME_WORDS: usize = 8;
const EXEMPLARS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterName {
    pub name: String,
    pub descriptor: String,
    /// 1-based ids into the shown list.
    pub local_ids: Vec<usize>,
}

#[derive(Deserialize)]
struct Pattern {
    name: String,
    #[serde(default)]
    prompt: String,
    #[serde(default)]
    example_ids: Vec<Value>,
}

fn json_object(reply: &str) -> Option<Value> {
    let start = reply.find('{')?;
    let end = reply.rfind('}')?;
    if end < start {
        return None;
    }
    serde_json::from_str(&reply[start..=end]).ok()
}

fn local_id(v: &Value) -> Option<usize> {
    match v {
        Value::Number(n) => n.as_u64().map(|n| n as usize),
        Value::String(s) => s.trim().trim_matches(['[', ']']).trim().parse().ok(),
        _ => None,
    }
}

/// Parses a naming reply against a list of `shown` members.
pub fn parse_cluster_name(reply: &str, shown: usize) -> Result<ClusterName> {
    let obj = json_object(reply).ok_or_else(|| Error::parse("no JSON object", reply))?;
    let pattern = match obj.get("patterns") {
        Some(Value::Array(items)) => items
            .first()
            .cloned()
            .ok_or_else(|| Error::parse("empty patterns list", reply))?,
        Some(_) => return Err(Error::parse("`patterns` is not a list", reply)),
        None => obj,
    };
    let pattern: Pattern =
        serde_json::from_value(pattern).map_err(|e| Error::parse(format!("bad pattern: {e}"), reply))?;

    let name = pattern.name.split_whitespace().collect::<Vec<_>>().join(" ");
    if name.is_empty() {
        return Err(Error::parse("empty pattern name", reply));
    }
    if name.split(' ').count() > MAX_NAME_WORDS {
        return Err(Error::parse(format!("name longer than {MAX_NAME_WORDS} words"), reply));
    }

    let mut local_ids = Vec::new();
    for raw in &pattern.example_ids {
        let id = local_id(raw).ok_or_else(|| Error::parse(format!("example id {raw} is not a number"), reply))?;
        if id == 0 || id > shown {
            return Err(Error::parse(format!("example id {id} outside 1..={shown}"), reply));
        }
        if !local_ids.contains(&id) {
            local_ids.push(id);
        }
    }
    let needed = EXEMPLARS.min(shown);
    if local_ids.len() < needed {
        return Err(Error::parse(
            format!("expected {needed} distinct example ids, got {}", local_ids.len()),
            reply,
        ));
    }
    local_ids.truncate(EXEMPLARS);
    Ok(ClusterName {
        name,
        descriptor: pattern.prompt.trim().to_string(),
        local_ids,
    })
}

/// Unique phrases in first-seen order with the input position of their first
/// occurrence, capped at [`MAX_SHOWN`].
fn shown_members(cluster: &ValueCluster) -> Vec<(&str, usize)> {
    let mut seen = HashMap::new();
    let mut out = Vec::new();
    for (phrase, &id) in cluster.members.iter().zip(&cluster.member_ids) {
        if out.len() == MAX_SHOWN {
            break;
        }
        if seen.insert(phrase.as_str(), ()).is_none() {
            out.push((phrase.as_str(), id));
        }
    }
    out
}

pub fn naming_prompt(cluster: &ValueCluster, template: &Template) -> String {
    let lines: Vec<String> = shown_members(cluster)
        .iter()
        .enumerate()
        .map(|(i, (p, _))| format!("- [{}] {}", i + 1, p))
        .collect();
    template.render(&[("examples", &lines.join("\n"))])
}

/// Names each cluster and picks its exemplars. Repeated names get the
/// cluster id appended so names stay unique.
pub fn name_clusters(
    clusters: &mut [ValueCluster],
    chat: &dyn ChatModel,
    template: &Template,
) -> Result<()> {
    let mut used: HashMap<String, usize> = HashMap::new();
    for cluster in clusters.iter_mut() {
        if cluster.members.is_empty() {
            return Err(Error::Empty(format!("cluster {} has no members", cluster.cluster_id)));
        }
        let shown: Vec<usize> = shown_members(cluster).iter().map(|(_, id)| *id).collect();
        let prompt = naming_prompt(cluster, template);
        let reply = chat.chat(&ChatRequest::new("", prompt.clone(), chat.model_name()))?;
        let parsed = match parse_cluster_name(&reply, shown.len()) {
            Ok(p) => p,
            Err(_) => {
                let retry = format!(
                    "{prompt}\n\nReturn only the JSON object. The name must have at most {MAX_NAME_WORDS} words and example_ids must be numbers from the list above."
                );
                let reply = chat.chat(&ChatRequest::new("", retry, chat.model_name()))?;
                parse_cluster_name(&reply, shown.len())?
            }
        };
        let key = parsed.name.to_lowercase();
        let name = if used.contains_key(&key) {
            format!("{} #{}", parsed.name, cluster.cluster_id)
        } else {
            parsed.name.clone()
        };
        used.insert(key, cluster.cluster_id);
        cluster.name = name;
        cluster.descriptor = parsed.descriptor;
        cluster.exemplar_ids = parsed.local_ids.iter().map(|&l| shown[l - 1]).collect();
    }
    Ok(())
}
