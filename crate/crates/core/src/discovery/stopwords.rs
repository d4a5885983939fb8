use std::collections::BTreeSet;

use crate::corpus::Corpus;

/// Common English function words.
pub const BASE_STOPWORDS: &[&str] = &[
    "a",
    "about",
    "above",
    "after",
    "again",
    "against",
    "all",
    "also",
    "am",
    "an",
    "and",
    "any",
    "are",
    "as",
    "at",
    "be",
    "because",
    "been",
    "before",
    "being",
    "below",
    "between",
    "both",
    "but",
    "by",
    "can",
    "could",
    "did",
    "do",
    "does",
    "doing",
    "down",
    "during",
    "each",
    "either",
    "else",
    "etc",
    "even",
    "ever",
    "every",
    "few",
    "for",
    "from",
    "further",
    "had",
    "has",
    "have",
    "having",
    "he",
    "her",
    "here",
    "hers",
    "herself",
    "him",
    "himself",
    "his",
    "how",
    "however",
    "i",
    "if",
    "in",
    "into",
    "is",
    "it",
    "its",
    "itself",
    "just",
    "let",
    "may",
    "me",
    "might",
    "more",
    "most",
    "much",
    "must",
    "my",
    "myself",
    "no",
    "nor",
    "not",
    "now",
    "of",
    "off",
    "on",
    "once",
    "one",
    "only",
    "or",
    "other",
    "our",
    "ours",
    "ourselves",
    "out",
    "over",
    "own",
    "same",
    "shall",
    "she",
    "should",
    "so",
    "some",
    "such",
    "than",
    "that",
    "the",
    "their",
    "theirs",
    "them",
    "themselves",
    "then",
    "there",
    "these",
    "they",
    "this",
    "those",
    "through",
    "thus",
    "to",
    "too",
    "under",
    "until",
    "up",
    "upon",
    "us",
    "very",
    "via",
    "was",
    "we",
    "were",
    "what",
    "when",
    "where",
    "whether",
    "which",
    "while",
    "who",
    "whom",
    "whose",
    "why",
    "will",
    "with",
    "within",
    "without",
    "would",
    "yet",
    "you",
    "your",
    "yours",
    "yourself",
    "yourselves",
];

/// Lowercased alphanumeric tokens; apostrophe suffixes and single characters dropped.
pub fn terms(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .map(|t| {
            let t = t.trim_matches('\'');
            let t = t.strip_suffix("'s").unwrap_or(t);
            t.to_lowercase()
        })
        .filter(|t| t.chars().count() > 1)
        .collect()
}

/// Base list plus speaker-name tokens and topic keywords, sorted and deduplicated.
pub fn curate_stopwords(corpus: &Corpus, base: &[&str]) -> Vec<String> {
    let base_set: BTreeSet<String> = base.iter().map(|w| w.to_lowercase()).collect();
    let mut out = base_set.clone();
    for session in &corpus.sessions {
        for sp in &session.speakers {
            out.extend(terms(&sp.display_name));
        }
        out.extend(terms(&session.topic).into_iter().filter(|t| !base_set.contains(t)));
    }
    out.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Role, Segment, Session, Source, Speaker, Utterance};

    fn session(id: &str, topic: &str, names: &[&str]) -> Session {
        Session {
            session_id: id.into(),
            source: Source::Club,
            topic: topic.into(),
            moderated: false,
            speakers: names
                .iter()
                .enumerate()
                .map(|(i, n)| Speaker {
                    id: format!("p{i}"),
                    display_name: n.to_string(),
                    role: Role::Participant,
                    native_language: None,
                    global_id: None,
                })
                .collect(),
            segments: vec![Segment {
                segment_id: "g".into(),
                subtopic_label: None,
                utterances: vec![Utterance::new("p0", vec!["Hi.".into()])],
            }],
        }
    }

    #[test]
    fn names_and_topic_added() {
        let c = Corpus::new(vec![
            session("a", "AI", &["Amy", "Joe Smith"]),
            session("b", "The impact of stress", &["Amy"]),
        ]);
        let list = curate_stopwords(&c, BASE_STOPWORDS);
        for w in ["ai", "amy", "joe", "smith", "impact", "stress", "the"] {
            assert!(list.contains(&w.to_string()), "{w}");
        }
        assert_eq!(list.iter().filter(|w| *w == "amy").count(), 1);
    }

    #[test]
    fn empty_corpus_keeps_base() {
        let list = curate_stopwords(&Corpus::new(vec![]), BASE_STOPWORDS);
        assert_eq!(list.len(), BASE_STOPWORDS.len());
    }

    #[test]
    fn term_splitting() {
        assert_eq!(
            terms("Shares the participant's view, briefly."),
            ["shares", "the", "participant", "view", "briefly"]
        );
    }
}
