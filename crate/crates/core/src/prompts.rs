//! Annotation and scoring prompts.
//!
//! WHoW and ESLMOD prompts share one layout: role and topic, task, dimension
//! instructions with label definitions and examples, up to five utterances of
//! prior context, the target sentence, up to two utterances of posterior
//! context, and a JSON formatting instruction listing every option.

use std::fmt::Write as _;

use thiserror::Error;

use crate::corpus::{Role, SentencePos, Session, Utterance};
use crate::gateway::mock::{ACT_OPTIONS_MARKER, TARGET_OPTIONS_MARKER};
use crate::schema::{examples, DialogueAct, Motive};
use crate::taxonomy::TaxonomyRegistry;

pub const MAX_PRIOR: usize = 5;
pub const MAX_POST: usize = 2;
/// Whitespace tokens of transcript allowed in a quality prompt.
pub const DEFAULT_TRANSCRIPT_BUDGET: usize = 12_000;

#[derive(Debug, Error, PartialEq)]
pub enum PromptError {
    #[error("sentence {0:?} does not exist in the session")]
    NoSuchSentence(SentencePos),
    #[error("target sentence is not spoken by the moderator")]
    NotModerator,
    #[error("incomplete taxonomy: {0}")]
    IncompleteTaxonomy(String),
    #[error("speaker {0:?} has no utterance in scope")]
    SpeakerAbsent(String),
    #[error("segment {0:?} not found")]
    NoSuchSegment(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContextWindow {
    pub prior: usize,
    pub post: usize,
}

impl Default for ContextWindow {
    fn default() -> Self {
        ContextWindow {
            prior: MAX_PRIOR,
            post: MAX_POST,
        }
    }
}

fn role_label(role: Role) -> &'static str {
    match role {
        Role::Moderator => "moderator",
        Role::Participant => "participant",
    }
}

fn speaker_line(session: &Session, speaker_id: &str, text: &str) -> String {
    match session.speaker(speaker_id) {
        Some(sp) => format!("{} ({}): {}", sp.display_name, role_label(sp.role), text),
        None => format!("{speaker_id}: {text}"),
    }
}

fn render_utterance(session: &Session, u: &Utterance) -> String {
    speaker_line(session, &u.speaker_id, &u.text())
}

struct Context {
    prior: Vec<String>,
    target: String,
    post: Vec<String>,
}

/// Context is counted in utterances across segment boundaries. Sentences of the
/// target's own utterance before (after) it count as one prior (post) item.
fn context(session: &Session, pos: SentencePos, window: ContextWindow) -> Result<Context, PromptError> {
    let target = session.sentence(pos).ok_or(PromptError::NoSuchSentence(pos))?;
    let utt = session.utterance(pos).ok_or(PromptError::NoSuchSentence(pos))?;
    if !session.is_moderator(&utt.speaker_id) {
        return Err(PromptError::NotModerator);
    }
    let flat: Vec<(usize, usize)> = session
        .segments
        .iter()
        .enumerate()
        .flat_map(|(si, s)| (0..s.utterances.len()).map(move |ui| (si, ui)))
        .collect();
    let here = flat
        .iter()
        .position(|&(s, u)| s == pos.segment && u == pos.utterance)
        .expect("utterance located above");
    let get = |i: usize| &session.segments[flat[i].0].utterances[flat[i].1];

    let prior_n = window.prior.min(MAX_PRIOR);
    let post_n = window.post.min(MAX_POST);

    let mut prior = Vec::new();
    if pos.sentence > 0 && prior.len() < prior_n {
        prior.push(speaker_line(
            session,
            &utt.speaker_id,
            &utt.sentences[..pos.sentence].join(" "),
        ));
    }
    let mut i = here;
    while prior.len() < prior_n && i > 0 {
        i -= 1;
        prior.push(render_utterance(session, get(i)));
    }
    prior.reverse();

    let mut post = Vec::new();
    if pos.sentence + 1 < utt.sentences.len() && post.len() < post_n {
        post.push(speaker_line(
            session,
            &utt.speaker_id,
            &utt.sentences[pos.sentence + 1..].join(" "),
        ));
    }
    let mut j = here + 1;
    while post.len() < post_n && j < flat.len() {
        post.push(render_utterance(session, get(j)));
        j += 1;
    }

    Ok(Context {
        prior,
        target: speaker_line(session, &utt.speaker_id, target),
        post,
    })
}

fn preamble(out: &mut String, topic: &str) {
    let _ = writeln!(
        out,
        "Your role is an annotator, annotating the moderation behavior of a second language speakers' English conversation session. The topic is \"{topic}\"."
    );
    out.push('\n');
}

fn context_blocks(out: &mut String, ctx: &Context) {
    out.push_str("Dialogue context before the target sentence:\n(including dialogue up to 5 utterance prior)\n\n");
    for line in &ctx.prior {
        let _ = writeln!(out, "{line}\n");
    }
    let _ = writeln!(out, "Target sentence:\n\n{}\n", ctx.target);
    out.push_str("Dialogue context after the target sentence:\n\n");
    for line in &ctx.post {
        let _ = writeln!(out, "{line}\n");
    }
    out.push_str("(including dialogue up to 2 utterance after the target.)\n\n");
}

fn quoted_list(items: &[String]) -> String {
    items.iter().map(|i| format!("\"{i}\"")).collect::<Vec<_>>().join(", ")
}

fn roster(session: &Session, fixed: &[&str]) -> Vec<String> {
    fixed
        .iter()
        .map(|s| s.to_string())
        .chain(session.participants().map(|p| p.display_name.clone()))
        .enumerate()
        .map(|(i, name)| format!("{i} ({name})"))
        .collect()
}

const WHOW_TARGETS: [&str; 3] = ["Unknown", "Self", "Everyone"];
const ESLMOD_TARGETS: [&str; 2] = ["Unknown", "Everyone"];

/// Prompt for labelling one moderator sentence with motives, act and target.
pub fn build_whow_prompt(session: &Session, pos: SentencePos, window: ContextWindow) -> Result<String, PromptError> {
    let ctx = context(session, pos, window)?;
    let mut out = String::new();
    preamble(&mut out, &session.topic);
    out.push_str(
        "Task: given the definitions and the examples, the context of prior and posterior dialogue, please label which motives the target sentence carries, which dialogue act the target sentence belongs to, and who the moderator is talking to.\n\n",
    );

    out.push_str("Motives: Motives are the high level motivation that the moderator aims to achieve. The definitions and examples of the motives are below:\n\n");
    for m in Motive::ALL {
        let _ = writeln!(out, "{}: {}", m.prompt_label(), m.definition());
        let ex: Vec<String> = DialogueAct::ALL
            .iter()
            .map(|&a| {
                let (text, tag) = examples(a, m)[0];
                format!("\"{text}\" ({tag})")
            })
            .collect();
        let _ = writeln!(out, "Examples: {}\n", ex.join(" "));
    }

    out.push_str("Dialogue act: Dialogue acts refer to the function of a piece of a speech/sentence. The definitions and examples of the dialogue acts are below:\n\n");
    for a in DialogueAct::ALL {
        let _ = writeln!(out, "{}: {}", a.prompt_label(), a.definition());
        let ex: Vec<String> = Motive::ALL
            .iter()
            .map(|&m| {
                let (text, tag) = examples(a, m)[0];
                format!("\"{text}\" ({tag})")
            })
            .collect();
        let _ = writeln!(out, "Examples: {}\n", ex.join(" "));
    }

    context_blocks(&mut out, &ctx);

    let motives: Vec<String> = [Motive::Informational, Motive::Social, Motive::Coordinative]
        .iter()
        .map(|m| m.prompt_label())
        .collect();
    let acts: Vec<String> = [
        DialogueAct::Probing,
        DialogueAct::Confronting,
        DialogueAct::Supplement,
        DialogueAct::Interpretation,
        DialogueAct::Instruction,
        DialogueAct::Utility,
    ]
    .iter()
    .map(|a| a.prompt_label().to_string())
    .collect();
    let targets = roster(session, &WHOW_TARGETS);
    let _ = writeln!(
        out,
        "Please answer only for the target sentence with the JSON format:{{\"motives\": List(None or more from {}),{}{}),{}{}),\"reason\": String}}\n",
        quoted_list(&motives),
        ACT_OPTIONS_MARKER,
        quoted_list(&acts),
        TARGET_OPTIONS_MARKER,
        quoted_list(&targets),
    );
    out.push_str(
        "For example: answer: {\"motives\": [\"informational motive\"], \"dialogue act\": \"Probing\", \"target speaker(s)\": \"3 (Joe Smith)\", \"reason\": \"The moderator asks Joe Smith a question to elicit a viewpoint on the previous statement.\"}\n",
    );
    Ok(out)
}

fn check_taxonomy(taxonomy: &TaxonomyRegistry) -> Result<(), PromptError> {
    if taxonomy.is_empty() {
        return Err(PromptError::IncompleteTaxonomy("no strategies".into()));
    }
    for s in &taxonomy.strategies {
        if s.definition.trim().is_empty() {
            return Err(PromptError::IncompleteTaxonomy(format!("{} has no definition", s.name)));
        }
        if s.examples.is_empty() {
            return Err(PromptError::IncompleteTaxonomy(format!("{} has no examples", s.name)));
        }
    }
    Ok(())
}

/// Prompt for re-annotating one moderator sentence with a refined strategy.
pub fn build_eslmod_prompt(
    session: &Session,
    pos: SentencePos,
    window: ContextWindow,
    taxonomy: &TaxonomyRegistry,
) -> Result<String, PromptError> {
    check_taxonomy(taxonomy)?;
    let ctx = context(session, pos, window)?;
    let mut out = String::new();
    preamble(&mut out, &session.topic);
    out.push_str("Task: given the definitions and the examples, the context of prior and posterior dialogue, please label which dialogue act the target sentence belongs to, and who the moderator is talking to.\n\n");
    out.push_str("Dialogue act: Dialogue acts refer to the function of a piece of a speech/sentence. The definitions and examples of the dialogue acts are below:\n\n");
    for s in &taxonomy.strategies {
        let _ = writeln!(out, "{}: {}", s.display_label(), s.definition);
        let ex: Vec<String> = s.examples.iter().map(|e| format!("\"{e}\"")).collect();
        let _ = writeln!(out, "Examples: {}\n", ex.join(" "));
    }
    context_blocks(&mut out, &ctx);
    let acts: Vec<String> = taxonomy
        .strategies
        .iter()
        .enumerate()
        .map(|(i, s)| format!("{i} ({})", s.display_label()))
        .collect();
    let targets = roster(session, &ESLMOD_TARGETS);
    let _ = writeln!(
        out,
        "Please answer only for the target sentence with the JSON format:{{{}{}),{}{}),\"reason\": String}}\n",
        ACT_OPTIONS_MARKER,
        quoted_list(&acts),
        TARGET_OPTIONS_MARKER,
        quoted_list(&targets),
    );
    let example_label = &acts[0];
    let _ = writeln!(
        out,
        "For example: answer: {{\"dialogue act\": \"{example_label}\", \"target speaker(s)\": \"3 (Joe Smith)\", \"reason\": \"The moderator asks Joe Smith a question to elicit a viewpoint on the previous statement.\"}}"
    );
    Ok(out)
}

const OVERALL_RUBRIC: [(u8, &str); 5] = [
    (5, "Smooth and fluent daily communication, easy and pleasant through the whole chat"),
    (4, "Somewhat less fluent communication, but the communication purpose is achieved"),
    (3, "Slightly awkward communication in some places, such as not being able to understand the other person's question"),
    (2, "Overall communication is not fluent and mostly awkward, but some parts can be mutually understood"),
    (1, "Unable to accurately achieve the communication purpose, awkward conversation, and failed to talk throughout the conversation."),
];

const MACRO_RUBRIC: [(&str, &str, [&str; 5]); 4] = [
    (
        "Topic management",
        "The strategies and techniques used to control and navigate the flow of topics",
        [
            "topic extension with clear new context",
            "topic extension under the previous direction",
            "topic extension with the same content",
            "repeat and no topic extension",
            "no topic extension and stop the topic at this point",
        ],
    ),
    (
        "Tone appropriateness",
        "The suitability of the tone used in communication, ensuring it aligns with the context, audience, and purpose to convey the intended message",
        [
            "very informal",
            "quite informal, but some expressions are still formal",
            "relatively not formal, and most expressions are quite informal",
            "quite formal, and some expressions are not that formal",
            "very formal",
        ],
    ),
    (
        "Conversation opening",
        "The initial interaction or exchange that begins a dialogue, often setting the tone and context for the dialogue",
        [
            "nice greeting and showing a good understanding of the opening of conversation in social interactions.",
            "sounded greeting and showed a basic understanding of the social role.",
            "general greeting but not understanding the social role well.",
            "basic greeting.",
            "no opening, start the discussion immediately.",
        ],
    ),
    (
        "Conversation closing",
        "The process of ending a dialogue or interaction, which involves signaling the conclusion of the discussion, summarizing key points, and often expressing a farewell",
        [
            "detailed summarization and smooth transition to the closing of the conversation.",
            "transit to the closing naturally, but without summarising the discussion.",
            "transit to the discussion.",
            "demonstrate a translation to the end of the conversation.",
            "no closing, directly stop the conversation.",
        ],
    ),
];

/// Keeps the first two utterances plus the longest suffix that fits `budget`.
pub fn truncate_transcript<'a>(utterances: &[&'a Utterance], budget: usize) -> (Vec<&'a Utterance>, usize) {
    let total: usize = utterances.iter().map(|u| u.token_count).sum();
    if total <= budget || utterances.len() <= 2 {
        return (utterances.to_vec(), 0);
    }
    let head = &utterances[..2];
    let mut remaining = budget.saturating_sub(head.iter().map(|u| u.token_count).sum());
    let mut start = utterances.len();
    while start > 2 && utterances[start - 1].token_count <= remaining {
        remaining -= utterances[start - 1].token_count;
        start -= 1;
    }
    let mut kept = head.to_vec();
    kept.extend_from_slice(&utterances[start..]);
    (kept, start - 2)
}

/// Prompt asking for the focal speaker's five 1-5 scores within a session or
/// one of its segments.
pub fn build_quality_prompt(
    session: &Session,
    segment_id: Option<&str>,
    speaker_id: &str,
    budget: usize,
) -> Result<String, PromptError> {
    let utterances: Vec<&Utterance> = match segment_id {
        Some(id) => session
            .segment(id)
            .ok_or_else(|| PromptError::NoSuchSegment(id.to_string()))?
            .utterances
            .iter()
            .collect(),
        None => session.utterances().collect(),
    };
    let speaker = session
        .speaker(speaker_id)
        .filter(|_| utterances.iter().any(|u| u.speaker_id == speaker_id))
        .ok_or_else(|| PromptError::SpeakerAbsent(speaker_id.to_string()))?;

    let (kept, omitted) = truncate_transcript(&utterances, budget);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "You are evaluating the dialogue quality of one speaker in a multi-party English conversation among second language speakers. The topic is \"{}\".\n",
        session.topic
    );
    out.push_str("Conversation:\n\n");
    for (i, u) in kept.iter().enumerate() {
        if omitted > 0 && i == 2 {
            let _ = writeln!(out, "[... {omitted} utterances omitted ...]");
        }
        let _ = writeln!(out, "{}", render_utterance(session, u));
    }
    out.push('\n');
    let _ = writeln!(out, "Focal speaker: {} (id {})\n", speaker.display_name, speaker.id);
    out.push_str("Score only the focal speaker's contribution, judged from the focal speaker's utterances and how they interact with the others.\n\n");
    out.push_str("Overall: The score of the interactivity of the English second language dialogue for the focal speaker (1 to 5).\n");
    for (score, text) in OVERALL_RUBRIC {
        let _ = writeln!(out, "{score}: {text}");
    }
    out.push('\n');
    for (name, definition, levels) in MACRO_RUBRIC {
        let _ = writeln!(out, "{name}: {definition} (1 to 5).");
        for (i, text) in levels.iter().enumerate() {
            let _ = writeln!(out, "{}: {text}", 5 - i);
        }
        out.push('\n');
    }
    out.push_str("Rationale: The reason why and how the scores are made based on the focal speaker's utterances.\n\n");
    out.push_str("Please answer only with the JSON format:{\"overall\": Integer(1 to 5),\"topic_management\": Integer(1 to 5),\"tone_appropriateness\": Integer(1 to 5),\"conversation_opening\": Integer(1 to 5),\"conversation_closing\": Integer(1 to 5),\"rationale\": String}\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Segment, Source, Speaker};
    use crate::gateway::mock::options_after;

    fn sp(id: &str, name: &str, role: Role) -> Speaker {
        Speaker {
            id: id.into(),
            display_name: name.into(),
            role,
            native_language: None,
            global_id: None,
        }
    }

    /// Moderator speaks at utterance indices 0 and 9 of one segment.
    fn session() -> Session {
        let mut utts = vec![Utterance::new(
            "m",
            vec!["Welcome everyone.".into(), "Let's begin.".into()],
        )];
        for i in 1..9 {
            let who = if i % 2 == 0 { "a" } else { "b" };
            utts.push(Utterance::new(who, vec![format!("Point number {i}.")]));
        }
        utts.push(Utterance::new(
            "m",
            vec!["Good point.".into(), "What about you?".into()],
        ));
        utts.push(Utterance::new("a", vec!["Me?".into()]));
        utts.push(Utterance::new("b", vec!["Yes.".into()]));
        utts.push(Utterance::new("a", vec!["Okay.".into()]));
        Session {
            session_id: "s".into(),
            source: Source::Club,
            topic: "Stress".into(),
            moderated: true,
            speakers: vec![
                sp("m", "Bryan", Role::Moderator),
                sp("a", "Andrew", Role::Participant),
                sp("b", "Christine", Role::Participant),
            ],
            segments: vec![Segment {
                segment_id: "g".into(),
                subtopic_label: None,
                utterances: utts,
            }],
        }
    }

    fn pos(u: usize, s: usize) -> SentencePos {
        SentencePos {
            segment: 0,
            utterance: u,
            sentence: s,
        }
    }

    fn between<'a>(p: &'a str, a: &str, b: &str) -> &'a str {
        let i = p.find(a).unwrap() + a.len();
        let j = p[i..].find(b).unwrap() + i;
        &p[i..j]
    }

    #[test]
    fn first_sentence_has_empty_prior_context() {
        let p = build_whow_prompt(&session(), pos(0, 0), ContextWindow::default()).unwrap();
        let prior = between(
            &p,
            "(including dialogue up to 5 utterance prior)\n\n",
            "Target sentence:",
        );
        assert!(prior.trim().is_empty());
        let post = between(
            &p,
            "Dialogue context after the target sentence:\n\n",
            "(including dialogue up to 2",
        );
        assert_eq!(post.trim().lines().filter(|l| !l.is_empty()).count(), 2);
        assert!(post.contains("Bryan (moderator): Let's begin."));
    }

    #[test]
    fn prior_context_capped_at_five() {
        // eight participant utterances precede the moderator's second turn
        let p = build_whow_prompt(&session(), pos(9, 0), ContextWindow::default()).unwrap();
        let prior = between(
            &p,
            "(including dialogue up to 5 utterance prior)\n\n",
            "Target sentence:",
        );
        let lines: Vec<&str> = prior.lines().filter(|l| !l.is_empty()).collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[0].ends_with("Point number 4."));
        assert!(lines[4].ends_with("Point number 8."));
    }

    #[test]
    fn own_earlier_sentence_counts_as_prior_item() {
        let p = build_whow_prompt(&session(), pos(9, 1), ContextWindow::default()).unwrap();
        let prior = between(
            &p,
            "(including dialogue up to 5 utterance prior)\n\n",
            "Target sentence:",
        );
        let lines: Vec<&str> = prior.lines().filter(|l| !l.is_empty()).collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[4], "Bryan (moderator): Good point.");
        assert!(p.contains("Target sentence:\n\nBryan (moderator): What about you?"));
    }

    #[test]
    fn participant_target_rejected() {
        assert_eq!(
            build_whow_prompt(&session(), pos(1, 0), ContextWindow::default()),
            Err(PromptError::NotModerator)
        );
        assert!(matches!(
            build_whow_prompt(&session(), pos(99, 0), ContextWindow::default()),
            Err(PromptError::NoSuchSentence(_))
        ));
    }

    #[test]
    fn roster_lists_every_participant() {
        let mut s = session();
        for i in 0..5 {
            s.speakers
                .push(sp(&format!("x{i}"), &format!("P{i}"), Role::Participant));
        }
        let p = build_whow_prompt(&s, pos(0, 0), ContextWindow::default()).unwrap();
        let targets = options_after(&p, TARGET_OPTIONS_MARKER);
        assert_eq!(targets.len(), 3 + 7);
        assert_eq!(targets[0], "0 (Unknown)");
        assert_eq!(targets[3], "3 (Andrew)");
        assert_eq!(targets[9], "9 (P4)");
        let acts = options_after(&p, ACT_OPTIONS_MARKER);
        assert_eq!(acts.len(), 6);
    }

    #[test]
    fn eslmod_prompt_lists_strategies() {
        let reg = TaxonomyRegistry::default_registry();
        let p = build_eslmod_prompt(&session(), pos(9, 1), ContextWindow::default(), &reg).unwrap();
        let acts = options_after(&p, ACT_OPTIONS_MARKER);
        assert_eq!(acts.len(), 10);
        assert_eq!(acts[0], "0 (Information Probing)");
        assert_eq!(acts[9], "9 (Coordination Instruction)");
        for s in &reg.strategies {
            assert!(p.contains(&format!(
                "{}: {}\nExamples: \"{}\"",
                s.display_label(),
                s.definition,
                s.examples[0]
            )));
        }
        assert_eq!(
            p,
            build_eslmod_prompt(&session(), pos(9, 1), ContextWindow::default(), &reg).unwrap()
        );
    }

    #[test]
    fn eslmod_prompt_needs_definitions() {
        let mut reg = TaxonomyRegistry::default_registry();
        reg.strategies[4].definition.clear();
        assert!(matches!(
            build_eslmod_prompt(&session(), pos(0, 0), ContextWindow::default(), &reg),
            Err(PromptError::IncompleteTaxonomy(_))
        ));
    }

    #[test]
    fn quality_prompts_differ_only_in_focal_clause() {
        let s = session();
        let a = build_quality_prompt(&s, Some("g"), "a", DEFAULT_TRANSCRIPT_BUDGET).unwrap();
        let b = build_quality_prompt(&s, Some("g"), "b", DEFAULT_TRANSCRIPT_BUDGET).unwrap();
        let diff: Vec<(&str, &str)> = a.lines().zip(b.lines()).filter(|(x, y)| x != y).collect();
        assert_eq!(a.lines().count(), b.lines().count());
        assert_eq!(diff.len(), 1);
        assert!(diff[0].0.starts_with("Focal speaker: Andrew"));
        for (_, text) in OVERALL_RUBRIC {
            assert!(a.contains(text));
        }
    }

    #[test]
    fn quality_prompt_requires_active_speaker() {
        let mut s = session();
        s.speakers.push(sp("q", "Quiet", Role::Participant));
        assert_eq!(
            build_quality_prompt(&s, Some("g"), "q", 100),
            Err(PromptError::SpeakerAbsent("q".into()))
        );
        assert_eq!(
            build_quality_prompt(&s, Some("nope"), "a", 100),
            Err(PromptError::NoSuchSegment("nope".into()))
        );
    }

    #[test]
    fn truncation_keeps_openings_and_recent_turns() {
        let s = session();
        let utts: Vec<&Utterance> = s.utterances().collect();
        let (kept, omitted) = truncate_transcript(&utts, 12);
        assert_eq!(kept[0].sentences[0], "Welcome everyone.");
        assert_eq!(kept.last().unwrap().sentences[0], "Okay.");
        assert_eq!(kept.len() + omitted, utts.len());
        assert!(kept.iter().map(|u| u.token_count).sum::<usize>() <= 12);
    }
}
