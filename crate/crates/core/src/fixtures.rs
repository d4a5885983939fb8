//! Bundled two-session sample corpus.

use std::path::Path;

use crate::corpus::{parse_session, Corpus};

pub const SAMPLE_SESSIONS: [(&str, &str); 2] = [
    (
        "club-stress-01.json",
        include_str!("../fixtures/sessions/club-stress-01.json"),
    ),
    (
        "volunteer-ai-01.json",
        include_str!("../fixtures/sessions/volunteer-ai-01.json"),
    ),
];

/// Directory holding the sample session files, for path-based loading.
pub fn sample_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/sessions"))
}

pub fn sample_corpus() -> Corpus {
    Corpus::new(
        SAMPLE_SESSIONS
            .iter()
            .map(|(name, text)| parse_session(text, Path::new(name)).expect("bundled fixture is valid"))
            .collect(),
    )
}
