//! Reduction of annotation reasons to short intent phrases.

/// Syntactic-parse based extraction; returns `None` when it cannot decide.
pub trait PhraseExtractor: Send + Sync {
    fn extract(&self, first_sentence: &str) -> Option<String>;
}

/// Pattern rules around the subject "the moderator".
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleBased;

const AUXILIARIES: &[&str] = &[
    "is", "was", "are", "were", "has", "have", "had", "does", "did", "also", "then", "again", "just", "first", "here",
    "now", "clearly", "simply", "briefly",
];
const CLAUSE_WORDS: &[&str] = &[
    "because", "since", "while", "which", "who", "as", "so", "whereas", "thereby",
];
const DETERMINERS: &[&str] = &[
    "the",
    "a",
    "an",
    "his",
    "her",
    "their",
    "its",
    "this",
    "that",
    "these",
    "those",
    "my",
    "your",
    "our",
    "each",
    "every",
    "some",
    "all",
    "any",
    "both",
    "them",
    "him",
    "me",
    "us",
    "everyone",
    "everybody",
    "another",
    "other",
];
const PREPOSITIONS: &[&str] = &[
    "in", "at", "on", "for", "with", "from", "into", "during", "by", "within",
];

/// Text up to the first `.`, `?` or `!` followed by whitespace or the end.
pub fn first_sentence(text: &str) -> &str {
    let t = text.trim();
    let mut iter = t.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        if matches!(c, '.' | '?' | '!') {
            match iter.peek() {
                None => return t,
                Some(&(_, next)) if next.is_whitespace() => return &t[..i + c.len_utf8()],
                _ => {}
            }
        }
    }
    t
}

fn bare(token: &str) -> String {
    token
        .trim_matches(|c: char| !c.is_alphanumeric() && c != '\'')
        .to_lowercase()
}

fn is_participle(word: &str) -> bool {
    word.len() > 4 && (word.ends_with("ing") || word.ends_with("ed"))
}

impl PhraseExtractor for RuleBased {
    fn extract(&self, sentence: &str) -> Option<String> {
        let tokens: Vec<&str> = sentence.split_whitespace().collect();
        if tokens.len() < 3 || bare(tokens[0]) != "the" || bare(tokens[1]) != "moderator" {
            return None;
        }
        let mut i = 2;
        while i < tokens.len() && AUXILIARIES.contains(&bare(tokens[i]).as_str()) {
            i += 1;
        }
        let mut kept: Vec<&str> = Vec::new();
        while i < tokens.len() {
            let tok = tokens[i];
            let word = bare(tok);
            if !kept.is_empty() {
                if CLAUSE_WORDS.contains(&word.as_str()) {
                    break;
                }
                if word == "to" {
                    let next = tokens.get(i + 1).map(|t| bare(t)).unwrap_or_default();
                    if !DETERMINERS.contains(&next.as_str()) && !next.is_empty() {
                        break;
                    }
                }
                if kept.len() > 1 && PREPOSITIONS.contains(&word.as_str()) && is_participle(&bare(kept[kept.len() - 1]))
                {
                    break;
                }
            }
            kept.push(tok);
            if tok.ends_with([',', ';', ':']) {
                break;
            }
            i += 1;
        }
        let phrase = kept.join(" ");
        let phrase = phrase.trim_end_matches(|c: char| !c.is_alphanumeric() && c != ')' && c != '"' && c != '\'');
        (!phrase.is_empty()).then(|| phrase.to_string())
    }
}

/// Verb phrase of the first sentence, or the whole first sentence when the
/// rules do not apply.
pub fn reduce_reason(reason: &str) -> String {
    reduce_reason_with(reason, None)
}

/// As [`reduce_reason`], preferring `provider` when it yields a phrase.
pub fn reduce_reason_with(reason: &str, provider: Option<&dyn PhraseExtractor>) -> String {
    let sentence = first_sentence(reason);
    let rule = RuleBased.extract(sentence);
    let chosen = match provider.and_then(|p| p.extract(sentence)) {
        Some(parsed) => {
            if rule.as_deref().is_some_and(|r| r != parsed) {
                log::debug!("phrase providers diverge: {parsed:?} vs {rule:?}");
            }
            Some(parsed)
        }
        None => rule,
    };
    chosen.unwrap_or_else(|| sentence.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example() {
        let r = "The moderator shares a personal anecdote about his experience working in an AI company to contribute work-related insights to the topic 'The impact of AI'";
        assert_eq!(
            reduce_reason(r),
            "shares a personal anecdote about his experience working"
        );
    }

    #[test]
    fn single_token_passes_through() {
        assert_eq!(reduce_reason("Asks."), "Asks.");
    }

    #[test]
    fn second_sentence_is_ignored() {
        let out = reduce_reason("The moderator thanks Amy. Zebra crossing follows.");
        assert_eq!(out, "thanks Amy");
        assert!(!out.contains("Zebra"));
        assert_eq!(
            reduce_reason("Greets everyone warmly. Zebra."),
            "Greets everyone warmly."
        );
    }

    #[test]
    fn clause_boundaries() {
        assert_eq!(
            reduce_reason("The moderator is asking Leo a question, inviting more detail."),
            "asking Leo a question"
        );
        assert_eq!(
            reduce_reason("The moderator agrees with the point because it is valid."),
            "agrees with the point"
        );
        assert_eq!(
            reduce_reason("The moderator talks to the group to keep things moving."),
            "talks to the group"
        );
        assert_eq!(
            reduce_reason("The moderator uses backchanneling."),
            "uses backchanneling"
        );
    }

    #[test]
    fn provider_preferred_when_it_answers() {
        struct Fixed;
        impl PhraseExtractor for Fixed {
            fn extract(&self, _: &str) -> Option<String> {
                Some("shares anecdote".into())
            }
        }
        assert_eq!(
            reduce_reason_with("The moderator shares an anecdote.", Some(&Fixed)),
            "shares anecdote"
        );
    }
}
