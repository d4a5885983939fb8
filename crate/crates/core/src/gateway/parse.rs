//! Structured-answer extraction and validation.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::SchemaTag;
use crate::schema::{DialogueAct, Motive};
use crate::taxonomy::TaxonomyRegistry;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WhowLabels {
    pub motives: Vec<Motive>,
    pub dialogue_act: DialogueAct,
    pub target_speaker: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EslmodLabels {
    pub strategy: String,
    pub target_speaker: String,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scores {
    pub overall: u8,
    pub topic_management: u8,
    pub tone_appropriateness: u8,
    pub conversation_opening: u8,
    pub conversation_closing: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualityScores {
    #[serde(flatten)]
    pub scores: Scores,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParsedResponse {
    Whow(WhowLabels),
    Eslmod(EslmodLabels),
    Quality(QualityScores),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    NoJson,
    MissingField(&'static str),
    WrongType(&'static str),
    UnknownLabel { field: &'static str, value: String },
    ScoreOutOfRange { field: &'static str, value: String },
}

/// Typed parse failure; keeps the raw text for auditing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub raw: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ParseErrorKind::NoJson => write!(f, "no JSON object found"),
            ParseErrorKind::MissingField(k) => write!(f, "missing field {k:?}"),
            ParseErrorKind::WrongType(k) => write!(f, "field {k:?} has the wrong type"),
            ParseErrorKind::UnknownLabel { field, value } => {
                write!(f, "unknown label {value:?} in {field:?}")
            }
            ParseErrorKind::ScoreOutOfRange { field, value } => {
                write!(f, "score {value} for {field:?} outside 1-5")
            }
        }
    }
}

impl std::error::Error for ParseError {}

impl WhowLabels {
    /// Renders the answer in the format requested from the annotator.
    pub fn to_response_json(&self) -> String {
        json!({
            "motives": self.motives.iter().map(|m| m.prompt_label()).collect::<Vec<_>>(),
            "dialogue act": self.dialogue_act.prompt_label(),
            "target speaker(s)": self.target_speaker,
            "reason": self.reason,
        })
        .to_string()
    }
}

impl EslmodLabels {
    pub fn to_response_json(&self, taxonomy: &TaxonomyRegistry) -> String {
        let label = taxonomy
            .position(&self.strategy)
            .map(|i| format!("{i} ({})", taxonomy.strategies[i].display_label()))
            .unwrap_or_else(|| self.strategy.clone());
        json!({
            "dialogue act": label,
            "target speaker(s)": self.target_speaker,
            "reason": self.reason,
        })
        .to_string()
    }
}

impl QualityScores {
    pub fn to_response_json(&self) -> String {
        serde_json::to_string(self).expect("scores serialize")
    }
}

impl Scores {
    pub fn get(&self, metric: crate::effects::Metric) -> u8 {
        use crate::effects::Metric::*;
        match metric {
            Overall => self.overall,
            TopicManagement => self.topic_management,
            Tone => self.tone_appropriateness,
            Opening => self.conversation_opening,
            Closing => self.conversation_closing,
        }
    }
}

/// Parses a backend answer; ESLMOD labels resolve against the default registry.
pub fn parse_annotation_response(raw: &str, tag: SchemaTag) -> Result<ParsedResponse, ParseError> {
    match tag {
        SchemaTag::Whow => parse_whow(raw).map(ParsedResponse::Whow),
        SchemaTag::Eslmod => {
            parse_eslmod_response(raw, &TaxonomyRegistry::default_registry()).map(ParsedResponse::Eslmod)
        }
        SchemaTag::Quality => parse_quality(raw).map(ParsedResponse::Quality),
    }
}

fn err(kind: ParseErrorKind, raw: &str) -> ParseError {
    ParseError {
        kind,
        raw: raw.to_string(),
    }
}

/// First JSON object embedded anywhere in `raw`.
pub fn extract_json_object(raw: &str) -> Option<Map<String, Value>> {
    for (i, _) in raw.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&raw[i..]).into_iter::<Value>();
        if let Some(Ok(Value::Object(map))) = stream.next() {
            return Some(map);
        }
    }
    None
}

fn norm_key(k: &str) -> String {
    k.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

fn field<'a>(obj: &'a Map<String, Value>, aliases: &[&str]) -> Option<&'a Value> {
    obj.iter()
        .find(|(k, _)| aliases.contains(&norm_key(k).as_str()))
        .map(|(_, v)| v)
}

/// `"3 (Joe Smith)"` → (`Some(3)`, `"Joe Smith"`); bare labels pass through.
fn split_numbered(s: &str) -> (Option<usize>, &str) {
    let t = s.trim();
    let digits = t.chars().take_while(char::is_ascii_digit).count();
    if digits > 0 {
        let rest = t[digits..].trim_start();
        if let Some(inner) = rest.strip_prefix('(').and_then(|r| r.strip_suffix(')')) {
            return (t[..digits].parse().ok(), inner.trim());
        }
        if rest.is_empty() {
            return (t[..digits].parse().ok(), "");
        }
    }
    (None, t)
}

fn target(obj: &Map<String, Value>, raw: &str) -> Result<String, ParseError> {
    const KEY: &str = "target speaker(s)";
    let v = field(obj, &["targetspeakers", "targetspeaker", "target"])
        .ok_or_else(|| err(ParseErrorKind::MissingField(KEY), raw))?;
    let pick = |s: &str| split_numbered(s).1.to_string();
    match v {
        Value::String(s) => Ok(pick(s)),
        Value::Array(items) => {
            let names: Option<Vec<String>> = items.iter().map(|i| i.as_str().map(pick)).collect();
            names
                .map(|n| n.join(", "))
                .ok_or_else(|| err(ParseErrorKind::WrongType(KEY), raw))
        }
        _ => Err(err(ParseErrorKind::WrongType(KEY), raw)),
    }
}

fn reason(obj: &Map<String, Value>, raw: &str, key: &'static str, aliases: &[&str]) -> Result<String, ParseError> {
    match field(obj, aliases) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(err(ParseErrorKind::WrongType(key), raw)),
        None => Err(err(ParseErrorKind::MissingField(key), raw)),
    }
}

fn parse_whow(raw: &str) -> Result<WhowLabels, ParseError> {
    let obj = extract_json_object(raw).ok_or_else(|| err(ParseErrorKind::NoJson, raw))?;
    let motives_v =
        field(&obj, &["motives", "motive"]).ok_or_else(|| err(ParseErrorKind::MissingField("motives"), raw))?;
    let motive_strs: Vec<&str> = match motives_v {
        Value::Array(items) => items
            .iter()
            .map(|i| i.as_str().ok_or_else(|| err(ParseErrorKind::WrongType("motives"), raw)))
            .collect::<Result<_, _>>()?,
        Value::String(s) => vec![s.as_str()],
        Value::Null => vec![],
        _ => return Err(err(ParseErrorKind::WrongType("motives"), raw)),
    };
    let mut motives = Vec::new();
    for m in motive_strs {
        if m.trim().is_empty() || m.trim().eq_ignore_ascii_case("none") {
            continue;
        }
        let parsed = Motive::parse(m).ok_or_else(|| {
            err(
                ParseErrorKind::UnknownLabel {
                    field: "motives",
                    value: m.to_string(),
                },
                raw,
            )
        })?;
        if !motives.contains(&parsed) {
            motives.push(parsed);
        }
    }
    let act_s = match field(&obj, &["dialogueact", "act"]) {
        Some(Value::String(s)) => s,
        Some(_) => return Err(err(ParseErrorKind::WrongType("dialogue act"), raw)),
        None => return Err(err(ParseErrorKind::MissingField("dialogue act"), raw)),
    };
    let (_, act_label) = split_numbered(act_s);
    let dialogue_act = DialogueAct::parse(act_label).ok_or_else(|| {
        err(
            ParseErrorKind::UnknownLabel {
                field: "dialogue act",
                value: act_s.clone(),
            },
            raw,
        )
    })?;
    Ok(WhowLabels {
        motives,
        dialogue_act,
        target_speaker: target(&obj, raw)?,
        reason: reason(&obj, raw, "reason", &["reason", "reasons"])?,
    })
}

/// Parses an ESLMOD answer, normalizing `"1 (Information Probing)"` to the
/// strategy id. The label text wins over the number when both are present.
pub fn parse_eslmod_response(raw: &str, taxonomy: &TaxonomyRegistry) -> Result<EslmodLabels, ParseError> {
    let obj = extract_json_object(raw).ok_or_else(|| err(ParseErrorKind::NoJson, raw))?;
    let act_s = match field(&obj, &["dialogueact", "strategy", "act"]) {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        Some(_) => return Err(err(ParseErrorKind::WrongType("dialogue act"), raw)),
        None => return Err(err(ParseErrorKind::MissingField("dialogue act"), raw)),
    };
    let (index, label) = split_numbered(&act_s);
    let strategy = if label.is_empty() {
        index.and_then(|i| taxonomy.strategies.get(i))
    } else {
        taxonomy.lookup(label)
    };
    let strategy = strategy.ok_or_else(|| {
        err(
            ParseErrorKind::UnknownLabel {
                field: "dialogue act",
                value: act_s.clone(),
            },
            raw,
        )
    })?;
    Ok(EslmodLabels {
        strategy: strategy.id.clone(),
        target_speaker: target(&obj, raw)?,
        reason: reason(&obj, raw, "reason", &["reason", "reasons"])?,
    })
}

fn score(obj: &Map<String, Value>, raw: &str, key: &'static str, aliases: &[&str]) -> Result<u8, ParseError> {
    let v = field(obj, aliases).ok_or_else(|| err(ParseErrorKind::MissingField(key), raw))?;
    let n = match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse::<f64>().ok(),
        _ => None,
    }
    .ok_or_else(|| err(ParseErrorKind::WrongType(key), raw))?;
    if n.fract() != 0.0 || !(1.0..=5.0).contains(&n) {
        return Err(err(
            ParseErrorKind::ScoreOutOfRange {
                field: key,
                value: v.to_string(),
            },
            raw,
        ));
    }
    Ok(n as u8)
}

fn parse_quality(raw: &str) -> Result<QualityScores, ParseError> {
    let obj = extract_json_object(raw).ok_or_else(|| err(ParseErrorKind::NoJson, raw))?;
    Ok(QualityScores {
        scores: Scores {
            overall: score(
                &obj,
                raw,
                "overall",
                &["overall", "overallquality", "score", "dialoguequality"],
            )?,
            topic_management: score(&obj, raw, "topic_management", &["topicmanagement"])?,
            tone_appropriateness: score(
                &obj,
                raw,
                "tone_appropriateness",
                &["toneappropriateness", "tonechoiceappropriateness", "tonechoice", "tone"],
            )?,
            conversation_opening: score(&obj, raw, "conversation_opening", &["conversationopening", "opening"])?,
            conversation_closing: score(&obj, raw, "conversation_closing", &["conversationclosing", "closing"])?,
        },
        rationale: reason(&obj, raw, "rationale", &["rationale", "reason"])?,
    })
}
