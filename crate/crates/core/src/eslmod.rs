//! Re-annotation of moderator sentences with the refined strategy taxonomy.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Location};
use crate::gateway::{parse_eslmod_response, Completion, Gateway, GatewayError, PromptRequest, SchemaTag};
use crate::prompts::{build_eslmod_prompt, ContextWindow, PromptError};
use crate::sidecar::AnnotationFailure;
use crate::taxonomy::TaxonomyRegistry;

#[derive(Debug, Error)]
pub enum EslmodError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EslmodAnnotation {
    #[serde(flatten)]
    pub location: Location,
    pub schema: SchemaTag,
    /// Strategy id from the registry.
    pub strategy: String,
    pub target_speaker: String,
    pub reason: String,
    pub model_id: String,
    pub prompt_hash: String,
}

#[derive(Debug, Clone, Default)]
pub struct EslmodRun {
    pub annotations: Vec<EslmodAnnotation>,
    pub failures: Vec<AnnotationFailure>,
}

pub fn annotate_eslmod(
    corpus: &Corpus,
    gateway: &Gateway,
    model_id: &str,
    window: ContextWindow,
    taxonomy: &TaxonomyRegistry,
) -> Result<EslmodRun, EslmodError> {
    let targets: Vec<_> = corpus
        .sessions
        .iter()
        .flat_map(|s| s.moderator_sentences().into_iter().map(move |p| (s, p)))
        .collect();
    let results = gateway.map_bounded(&targets, |&(session, pos)| -> Result<_, EslmodError> {
        let prompt = build_eslmod_prompt(session, pos, window, taxonomy)?;
        let req = PromptRequest::new(prompt, model_id, SchemaTag::Eslmod);
        let done = gateway.complete_parsed(&req, |raw| parse_eslmod_response(raw, taxonomy))?;
        Ok((session.location(pos), done))
    });
    let mut run = EslmodRun::default();
    for r in results {
        match r? {
            (location, Completion::Parsed { value, prompt_hash }) => run.annotations.push(EslmodAnnotation {
                location,
                schema: SchemaTag::Eslmod,
                strategy: value.strategy,
                target_speaker: value.target_speaker,
                reason: value.reason,
                model_id: model_id.to_string(),
                prompt_hash,
            }),
            (loc, Completion::Unparsed { error, prompt_hash }) => {
                log::warn!(
                    "unparsed eslmod answer at {}/{}: {error}",
                    loc.session_id,
                    loc.segment_id
                );
                run.failures.push(AnnotationFailure::at_sentence(
                    SchemaTag::Eslmod,
                    &loc,
                    &error,
                    prompt_hash,
                ));
            }
        }
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mock_labels_resolve_to_registry_ids() {
        let corpus = crate::fixtures::sample_corpus();
        let reg = TaxonomyRegistry::default_registry();
        let run = annotate_eslmod(&corpus, &Gateway::mock(1, None), "mock", ContextWindow::default(), &reg).unwrap();
        assert!(run.failures.is_empty());
        assert!(!run.annotations.is_empty());
        assert!(run.annotations.iter().all(|a| reg.get(&a.strategy).is_some()));
    }
}
