//! Per-speaker dialogue quality scores for sessions and segments.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Session};
use crate::gateway::parse::parse_annotation_response;
pub use crate::gateway::parse::Scores;
use crate::gateway::{Completion, Gateway, GatewayError, ParsedResponse, PromptRequest, QualityScores, SchemaTag};
use crate::prompts::{build_quality_prompt, PromptError};
use crate::sidecar::AnnotationFailure;

#[derive(Debug, Error)]
pub enum QualityError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("unparsable quality answer: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Session,
    Segment,
}

impl std::str::FromStr for Granularity {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "session" => Ok(Granularity::Session),
            "segment" => Ok(Granularity::Segment),
            other => Err(format!("unknown granularity {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeakerQualityScores {
    pub session_id: String,
    pub segment_id: Option<String>,
    pub speaker_id: String,
    #[serde(flatten)]
    pub scores: Scores,
    pub rationale: String,
    pub model_id: String,
    pub prompt_hash: String,
}

pub struct ScoreRequest<'a> {
    pub session: &'a Session,
    pub segment_id: Option<&'a str>,
    pub speaker_id: &'a str,
}

fn complete(
    gateway: &Gateway,
    req: &ScoreRequest<'_>,
    model_id: &str,
    budget: usize,
) -> Result<Completion<QualityScores>, QualityError> {
    let prompt = build_quality_prompt(req.session, req.segment_id, req.speaker_id, budget)?;
    let request = PromptRequest::new(prompt, model_id, SchemaTag::Quality);
    Ok(gateway.complete_parsed(&request, |raw| {
        match parse_annotation_response(raw, SchemaTag::Quality)? {
            ParsedResponse::Quality(q) => Ok(q),
            _ => unreachable!("quality tag yields scores"),
        }
    })?)
}

fn record(req: &ScoreRequest<'_>, q: QualityScores, model_id: &str, prompt_hash: String) -> SpeakerQualityScores {
    SpeakerQualityScores {
        session_id: req.session.session_id.clone(),
        segment_id: req.segment_id.map(str::to_string),
        speaker_id: req.speaker_id.to_string(),
        scores: q.scores,
        rationale: q.rationale,
        model_id: model_id.to_string(),
        prompt_hash,
    }
}

pub fn score_speaker(
    gateway: &Gateway,
    req: &ScoreRequest<'_>,
    model_id: &str,
    budget: usize,
) -> Result<SpeakerQualityScores, QualityError> {
    match complete(gateway, req, model_id, budget)? {
        Completion::Parsed { value, prompt_hash } => Ok(record(req, value, model_id, prompt_hash)),
        Completion::Unparsed { error, .. } => Err(QualityError::Parse(error.to_string())),
    }
}

#[derive(Debug, Clone, Default)]
pub struct QualityRun {
    pub scores: Vec<SpeakerQualityScores>,
    pub failures: Vec<AnnotationFailure>,
}

/// (scope, speaker) pairs for every non-moderator with at least one utterance in scope.
pub fn scoring_targets(corpus: &Corpus, granularity: Granularity) -> Vec<ScoreRequest<'_>> {
    let mut out = Vec::new();
    for session in &corpus.sessions {
        let scopes: Vec<Option<&str>> = match granularity {
            Granularity::Session => vec![None],
            Granularity::Segment => session.segments.iter().map(|s| Some(s.segment_id.as_str())).collect(),
        };
        for scope in scopes {
            for sp in session.participants() {
                let active = match scope {
                    None => session.utterances().any(|u| u.speaker_id == sp.id),
                    Some(id) => session
                        .segment(id)
                        .is_some_and(|g| g.utterances.iter().any(|u| u.speaker_id == sp.id)),
                };
                if active {
                    out.push(ScoreRequest {
                        session,
                        segment_id: scope,
                        speaker_id: &sp.id,
                    });
                }
            }
        }
    }
    out
}

/// One record per active non-moderator speaker and scope; unparsable answers
/// are reported and skipped.
pub fn score_all(
    corpus: &Corpus,
    granularity: Granularity,
    gateway: &Gateway,
    model_id: &str,
    budget: usize,
) -> Result<QualityRun, QualityError> {
    let targets = scoring_targets(corpus, granularity);
    let results = gateway.map_bounded(&targets, |req| complete(gateway, req, model_id, budget));
    let mut run = QualityRun::default();
    for (req, r) in targets.iter().zip(results) {
        match r? {
            Completion::Parsed { value, prompt_hash } => run.scores.push(record(req, value, model_id, prompt_hash)),
            Completion::Unparsed { error, prompt_hash } => {
                log::warn!(
                    "unparsed quality answer for {} in {}: {error}",
                    req.speaker_id,
                    req.session.session_id
                );
                run.failures.push(AnnotationFailure {
                    schema: SchemaTag::Quality,
                    session_id: req.session.session_id.clone(),
                    segment_id: req.segment_id.map(str::to_string),
                    utterance_idx: None,
                    sentence_idx: None,
                    speaker_id: Some(req.speaker_id.to_string()),
                    error: error.to_string(),
                    raw: error.raw.clone(),
                    prompt_hash,
                });
            }
        }
    }
    Ok(run)
}
