use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Situation;
use crate::error::{Error, Result};
use crate::providers::{ChatModel, ChatRequest};
use crate::templates::Template;

/// The ten basic human values of Schwartz's theory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SchwartzValue {
    #[serde(rename = "Self-Direction")]
    SelfDirection,
    Stimulation,
    Hedonism,
    Achievement,
    Power,
    Security,
    Conformity,
    Tradition,
    Benevolence,
    Universalism,
}

impl SchwartzValue {
    pub const ALL: [SchwartzValue; 10] = [
        SchwartzValue::SelfDirection,
        SchwartzValue::Stimulation,
        SchwartzValue::Hedonism,
        SchwartzValue::Achievement,
        SchwartzValue::Power,
        SchwartzValue::Security,
        SchwartzValue::Conformity,
        SchwartzValue::Tradition,
        SchwartzValue::Benevolence,
        SchwartzValue::Universalism,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchwartzValue::SelfDirection => "Self-Direction",
            SchwartzValue::Stimulation => "Stimulation",
            SchwartzValue::Hedonism => "Hedonism",
            SchwartzValue::Achievement => "Achievement",
            SchwartzValue::Power => "Power",
            SchwartzValue::Security => "Security",
            SchwartzValue::Conformity => "Conformity",
            SchwartzValue::Tradition => "Tradition",
            SchwartzValue::Benevolence => "Benevolence",
            SchwartzValue::Universalism => "Universalism",
        }
    }

    /// Short gloss of the motivational goal behind each value.
    pub fn description(self) -> &'static str {
        match self {
            SchwartzValue::SelfDirection => "autonomy of thought and action",
            SchwartzValue::Stimulation => "novelty, excitement and challenge",
            SchwartzValue::Hedonism => "pleasure and enjoyment for oneself",
            SchwartzValue::Achievement => "success through demonstrated competence",
            SchwartzValue::Power => "status, prestige and control over people or resources",
            SchwartzValue::Security => "safety and stability of society, relationships and self",
            SchwartzValue::Conformity => "restraint from actions that upset others or break norms",
            SchwartzValue::Tradition => "respect for cultural or religious customs",
            SchwartzValue::Benevolence => "welfare of people one is close to",
            SchwartzValue::Universalism => "welfare of all people and of nature",
        }
    }
}

fn squash(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

impl FromStr for SchwartzValue {
    type Err = Error;

    /// Case-insensitive; hyphens and spaces are ignored ("self direction" parses).
    fn from_str(s: &str) -> Result<Self> {
        let key = squash(s);
        SchwartzValue::ALL
            .into_iter()
            .find(|v| squash(v.name()) == key)
            .ok_or_else(|| Error::InvalidInput(format!("`{}` is not a Schwartz value", s.trim())))
    }
}

impl fmt::Display for SchwartzValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchwartzAnnotation {
    pub situation_values: [SchwartzValue; 2],
    pub comment_values: [SchwartzValue; 2],
}

impl SchwartzAnnotation {
    pub fn new(situation_values: [SchwartzValue; 2], comment_values: [SchwartzValue; 2]) -> Result<Self> {
        if situation_values[0] == situation_values[1] || comment_values[0] == comment_values[1] {
            return Err(Error::InvalidInput("annotated value pair repeats a value".into()));
        }
        Ok(SchwartzAnnotation {
            situation_values,
            comment_values,
        })
    }

    /// Comma-joined situation values in annotated order; the text embedded for
    /// Schwartz-based retrieval.
    pub fn situation_text(&self) -> String {
        format!("{}, {}", self.situation_values[0], self.situation_values[1])
    }

    pub fn comment_text(&self) -> String {
        format!("{}, {}", self.comment_values[0], self.comment_values[1])
    }
}

fn parse_pair(line: &str) -> Result<[SchwartzValue; 2]> {
    let parts: Vec<&str> = line.split(',').map(str::trim).filter(|p| !p.is_empty()).collect();
    if parts.len() != 2 {
        return Err(Error::InvalidInput(format!(
            "expected two values, found {}",
            parts.len()
        )));
    }
    Ok([parts[0].parse()?, parts[1].parse()?])
}

fn strip_tag<'a>(line: &'a str, tag: &str) -> Option<&'a str> {
    let l = line.trim().trim_start_matches(['*', '-', ' ']);
    let head = l.get(..tag.len())?;
    head.eq_ignore_ascii_case(tag).then(|| l[tag.len()..].trim_start_matches([':', '*', ' ']))
}

/// Parses the two-line `[Situation] A, B` / `[Comment] C, D` reply format.
pub fn parse_schwartz(reply: &str) -> Result<SchwartzAnnotation> {
    let mut situation = None;
    let mut comment = None;
    for line in reply.lines() {
        if let Some(rest) = strip_tag(line, "[Situation]") {
            situation.get_or_insert(rest);
        } else if let Some(rest) = strip_tag(line, "[Comment]") {
            comment.get_or_insert(rest);
        }
    }
    let wrap = |e: Error| Error::parse(e.to_string(), reply);
    let situation = situation.ok_or_else(|| Error::parse("no [Situation] line", reply))?;
    let comment = comment.ok_or_else(|| Error::parse("no [Comment] line", reply))?;
    SchwartzAnnotation::new(
        parse_pair(situation).map_err(wrap)?,
        parse_pair(comment).map_err(wrap)?,
    )
    .map_err(wrap)
}

fn format_reminder() -> String {
    let names: Vec<&str> = SchwartzValue::ALL.iter().map(|v| v.name()).collect();
    format!(
        "\n\nReply with exactly two lines in the output format above, naming two distinct values per line chosen only from: {}.",
        names.join(", ")
    )
}

/// Annotates the two most salient Schwartz values of a situation and a comment.
/// An unparseable reply is retried once with a format reminder appended.
pub fn annotate_schwartz(
    situation: &Situation,
    comment: &str,
    chat: &dyn ChatModel,
    template: &Template,
    prompt_chars: usize,
) -> Result<SchwartzAnnotation> {
    if comment.trim().is_empty() {
        return Err(Error::InvalidInput("comment is empty".into()));
    }
    let prompt = template.render(&[
        ("situation", &situation.prompt_text(prompt_chars)),
        ("comment", comment.trim()),
    ]);
    let reply = chat.chat(&ChatRequest::new("", prompt.clone(), chat.model_name()))?;
    match parse_schwartz(&reply) {
        Ok(a) => Ok(a),
        Err(_) => {
            let retry = ChatRequest::new("", prompt + &format_reminder(), chat.model_name());
            let reply = chat.chat(&retry)?;
            parse_schwartz(&reply)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::{FixtureChat, FixtureRule};
    use crate::templates::TemplateKind;

    #[test]
    fn exactly_ten_values() {
        assert_eq!(SchwartzValue::ALL.len(), 10);
        let names: std::collections::HashSet<_> = SchwartzValue::ALL.iter().map(|v| v.name()).collect();
        assert_eq!(names.len(), 10);
        for v in SchwartzValue::ALL {
            assert_eq!(v.name().parse::<SchwartzValue>().unwrap(), v);
            assert_eq!(v.name().to_uppercase().parse::<SchwartzValue>().unwrap(), v);
        }
        assert_eq!("self direction".parse::<SchwartzValue>().unwrap(), SchwartzValue::SelfDirection);
        assert!("Freedom".parse::<SchwartzValue>().is_err());
    }

    #[test]
    fn parses_two_line_reply() {
        let a = parse_schwartz("[Situation] Security, Benevolence\n[Comment] Self-Direction, Universalism").unwrap();
        assert_eq!(a.situation_values, [SchwartzValue::Security, SchwartzValue::Benevolence]);
        assert_eq!(a.comment_values, [SchwartzValue::SelfDirection, SchwartzValue::Universalism]);
        assert_eq!(a.situation_text(), "Security, Benevolence");
    }

    #[test]
    fn rejects_non_schwartz_and_bad_shapes() {
        let err = parse_schwartz("[Situation] Freedom, Benevolence\n[Comment] Power, Security").unwrap_err();
        match err {
            Error::Parse { raw, .. } => assert!(raw.contains("Freedom")),
            other => panic!("{other:?}"),
        }
        assert!(parse_schwartz("[Situation] Power\n[Comment] Power, Security").is_err());
        assert!(parse_schwartz("[Situation] Power, Power\n[Comment] Power, Security").is_err());
        assert!(parse_schwartz("[Situation] Power, Security").is_err());
    }

    fn niece() -> Situation {
        Situation {
            situation_id: "s1".into(),
            title: "Not babysitting my niece".into(),
            body: "My brother expects me to babysit every weekend.".into(),
        }
    }

    #[test]
    fn annotate_with_retry() {
        let chat = FixtureChat::new(
            "m",
            vec![
                FixtureRule::contains(&["Reply with exactly two lines"], "[Situation] Benevolence, Self-Direction\n[Comment] Self-Direction, Security"),
                FixtureRule::contains(&["niece"], "Benevolence and Self-Direction, I think."),
            ],
        );
        let t = Template::builtin(TemplateKind::Schwartz);
        let a = annotate_schwartz(&niece(), "You are not a free babysitter.", &chat, &t, 2000).unwrap();
        assert!(a.situation_values.contains(&SchwartzValue::Benevolence));
    }

    #[test]
    fn annotate_fails_after_one_retry() {
        let chat = FixtureChat::new("m", vec![FixtureRule::contains(&["niece"], "Freedom, Love")]);
        let t = Template::builtin(TemplateKind::Schwartz);
        let err = annotate_schwartz(&niece(), "comment", &chat, &t, 2000).unwrap_err();
        assert!(matches!(err, Error::Parse { ref raw, .. } if raw == "Freedom, Love"));
    }
}
