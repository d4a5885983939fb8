//! Deterministic synthetic answers for network-free runs.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use sha2::{Digest, Sha256};

use super::{PromptRequest, SchemaTag};
use crate::schema::{DialogueAct, Motive};

pub(crate) const ACT_OPTIONS_MARKER: &str = "\"dialogue act\": String(one option from ";
pub(crate) const TARGET_OPTIONS_MARKER: &str = "\"target speaker(s)\": String(one option from ";

/// Quoted options following `marker`, up to the closing parenthesis.
pub(crate) fn options_after<'a>(prompt: &'a str, marker: &str) -> Vec<&'a str> {
    let Some(start) = prompt.find(marker) else {
        return Vec::new();
    };
    let mut rest = &prompt[start + marker.len()..];
    let mut out = Vec::new();
    loop {
        rest = rest.trim_start_matches([' ', ',']);
        if let Some(r) = rest.strip_prefix('"') {
            let Some(end) = r.find('"') else { break };
            out.push(&r[..end]);
            rest = &r[end + 1..];
        } else {
            break;
        }
    }
    out
}

fn rng_for(request: &PromptRequest, seed: u64) -> ChaCha8Rng {
    let digest = Sha256::digest(request.prompt_text.as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    ChaCha8Rng::seed_from_u64(seed ^ u64::from_le_bytes(bytes))
}

fn act_phrases(act: DialogueAct) -> &'static [&'static str] {
    match act {
        DialogueAct::Probing => &[
            "asks a follow-up question to elicit the participant's perspective",
            "invites the group to share their opinions on the question",
            "prompts a quiet participant to respond",
        ],
        DialogueAct::Confronting => &[
            "asks one participant to respond to another participant's statement",
            "invites a reaction to the previous opinion",
        ],
        DialogueAct::Instruction => &[
            "instructs the participants to move to the next question",
            "manages the time and asks everyone to wrap up",
        ],
        DialogueAct::Interpretation => &[
            "summarizes the participant's point in other words",
            "clarifies and reframes the previous statement",
        ],
        DialogueAct::Supplement => &[
            "shares a personal opinion about the topic",
            "provides additional information about the topic",
            "shares a personal experience related to the discussion",
            "agrees with the participant and builds on the statement",
        ],
        DialogueAct::Utility => &[
            "uses a short backchannel response to show active listening",
            "thanks the participant for the contribution",
            "greets the participants",
        ],
    }
}

/// Schema-valid answer derived from a seeded hash of the prompt text.
pub fn mock_response(request: &PromptRequest, seed: u64) -> String {
    let mut rng = rng_for(request, seed);
    let prompt = request.prompt_text.as_str();
    let targets = options_after(prompt, TARGET_OPTIONS_MARKER);
    let target = targets.choose(&mut rng).copied().unwrap_or("0 (Unknown)").to_string();
    match request.schema_tag {
        SchemaTag::Whow => {
            let act = *DialogueAct::ALL.choose(&mut rng).expect("non-empty");
            let first = *Motive::ALL.choose(&mut rng).expect("non-empty");
            let mut motives = vec![first.prompt_label()];
            if rng.random_bool(0.1) {
                let second = *Motive::ALL.choose(&mut rng).expect("non-empty");
                if second != first {
                    motives.push(second.prompt_label());
                }
            }
            let phrase = act_phrases(act).choose(&mut rng).expect("non-empty");
            json!({
                "motives": motives,
                "dialogue act": act.prompt_label(),
                "target speaker(s)": target,
                "reason": format!("The moderator {phrase}. This keeps the discussion going."),
            })
            .to_string()
        }
        SchemaTag::Eslmod => {
            let acts = options_after(prompt, ACT_OPTIONS_MARKER);
            let act = acts.choose(&mut rng).copied().unwrap_or("0 (Information Probing)");
            json!({
                "dialogue act": act,
                "target speaker(s)": target,
                "reason": format!("The moderator's sentence fits {act}."),
            })
            .to_string()
        }
        SchemaTag::Quality => {
            let mut s = || rng.random_range(1..=5u8);
            json!({
                "overall": s(),
                "topic_management": s(),
                "tone_appropriateness": s(),
                "conversation_opening": s(),
                "conversation_closing": s(),
                "rationale": "Synthetic rationale from the mock backend.",
            })
            .to_string()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn options_are_read_from_prompt() {
        let p = r#"{"target speaker(s)": String(one option from "0 (Unknown)", "1 (Everyone)", "2 (Amy)"),"reason": String}"#;
        assert_eq!(
            options_after(p, TARGET_OPTIONS_MARKER),
            ["0 (Unknown)", "1 (Everyone)", "2 (Amy)"]
        );
        assert!(options_after("nothing", TARGET_OPTIONS_MARKER).is_empty());
    }

    #[test]
    fn deterministic_per_seed() {
        let r = PromptRequest::new("prompt", "m", SchemaTag::Quality);
        assert_eq!(mock_response(&r, 3), mock_response(&r, 3));
        let outs: std::collections::HashSet<String> = (0..20).map(|s| mock_response(&r, s)).collect();
        assert!(outs.len() > 1);
    }
}
