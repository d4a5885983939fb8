//! Transcript data model, loading and descriptive statistics.
//!
//! A corpus is a list of [`Session`]s. Each session holds a roster of
//! speakers and an ordered list of manually delimited [`Segment`]s; every
//! utterance carries its sentences as authored in the input file.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{file}: cannot read: {source}")]
    Io {
        file: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{file}: schema violation at {path}: {message}")]
    Schema {
        file: PathBuf,
        path: String,
        message: String,
    },
    #[error("{file}: session {session}: {path}: {message}")]
    Invalid {
        file: PathBuf,
        session: String,
        path: String,
        message: String,
    },
    #[error("{file}: duplicate session_id {session} (first defined in {first})")]
    DuplicateSession {
        file: PathBuf,
        session: String,
        first: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Moderator,
    Participant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Club,
    Volunteer,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Club => "club",
            Source::Volunteer => "volunteer",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Speaker {
    pub id: String,
    pub display_name: String,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub native_language: Option<String>,
    /// Identity shared across sessions. Falls back to `display_name`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub global_id: Option<String>,
}

impl Speaker {
    pub fn identity(&self) -> &str {
        self.global_id.as_deref().unwrap_or(&self.display_name)
    }

    pub fn is_moderator(&self) -> bool {
        self.role == Role::Moderator
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Utterance {
    pub speaker_id: String,
    pub sentences: Vec<String>,
    /// Recomputed from `sentences` on load.
    #[serde(skip)]
    pub token_count: usize,
}

impl Utterance {
    pub fn new(speaker_id: impl Into<String>, sentences: Vec<String>) -> Self {
        let mut u = Utterance {
            speaker_id: speaker_id.into(),
            sentences,
            token_count: 0,
        };
        u.recount();
        u
    }

    fn recount(&mut self) {
        self.token_count = self.sentences.iter().map(|s| tokenize(s).len()).sum();
    }

    pub fn text(&self) -> String {
        self.sentences.join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub segment_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subtopic_label: Option<String>,
    pub utterances: Vec<Utterance>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Session {
    pub session_id: String,
    pub source: Source,
    pub topic: String,
    pub moderated: bool,
    pub speakers: Vec<Speaker>,
    pub segments: Vec<Segment>,
}

/// Address of one sentence inside a session.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Location {
    pub session_id: String,
    pub segment_id: String,
    pub utterance_idx: usize,
    pub sentence_idx: usize,
}

/// Index-based position of a sentence inside a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SentencePos {
    pub segment: usize,
    pub utterance: usize,
    pub sentence: usize,
}

impl Session {
    pub fn speaker(&self, id: &str) -> Option<&Speaker> {
        self.speakers.iter().find(|s| s.id == id)
    }

    pub fn moderator(&self) -> Option<&Speaker> {
        self.speakers.iter().find(|s| s.is_moderator())
    }

    pub fn is_moderator(&self, speaker_id: &str) -> bool {
        self.speaker(speaker_id).is_some_and(Speaker::is_moderator)
    }

    pub fn participants(&self) -> impl Iterator<Item = &Speaker> {
        self.speakers.iter().filter(|s| !s.is_moderator())
    }

    pub fn segment(&self, segment_id: &str) -> Option<&Segment> {
        self.segments.iter().find(|s| s.segment_id == segment_id)
    }

    pub fn segment_index(&self, segment_id: &str) -> Option<usize> {
        self.segments.iter().position(|s| s.segment_id == segment_id)
    }

    pub fn location(&self, pos: SentencePos) -> Location {
        Location {
            session_id: self.session_id.clone(),
            segment_id: self.segments[pos.segment].segment_id.clone(),
            utterance_idx: pos.utterance,
            sentence_idx: pos.sentence,
        }
    }

    pub fn resolve(&self, loc: &Location) -> Option<SentencePos> {
        if loc.session_id != self.session_id {
            return None;
        }
        let segment = self.segment_index(&loc.segment_id)?;
        let utt = self.segments[segment].utterances.get(loc.utterance_idx)?;
        (loc.sentence_idx < utt.sentences.len()).then_some(SentencePos {
            segment,
            utterance: loc.utterance_idx,
            sentence: loc.sentence_idx,
        })
    }

    pub fn sentence(&self, pos: SentencePos) -> Option<&str> {
        self.segments
            .get(pos.segment)?
            .utterances
            .get(pos.utterance)?
            .sentences
            .get(pos.sentence)
            .map(String::as_str)
    }

    pub fn utterance(&self, pos: SentencePos) -> Option<&Utterance> {
        self.segments.get(pos.segment)?.utterances.get(pos.utterance)
    }

    /// Every sentence spoken by the moderator, in transcript order.
    pub fn moderator_sentences(&self) -> Vec<SentencePos> {
        let mut out = Vec::new();
        for (si, seg) in self.segments.iter().enumerate() {
            for (ui, utt) in seg.utterances.iter().enumerate() {
                if self.is_moderator(&utt.speaker_id) {
                    out.extend((0..utt.sentences.len()).map(|k| SentencePos {
                        segment: si,
                        utterance: ui,
                        sentence: k,
                    }));
                }
            }
        }
        out
    }

    pub fn sentence_count(&self) -> usize {
        self.utterances().map(|u| u.sentences.len()).sum()
    }

    pub fn moderator_sentence_count(&self) -> usize {
        self.utterances()
            .filter(|u| self.is_moderator(&u.speaker_id))
            .map(|u| u.sentences.len())
            .sum()
    }

    pub fn token_count(&self) -> usize {
        self.utterances().map(|u| u.token_count).sum()
    }

    pub fn utterances(&self) -> impl Iterator<Item = &Utterance> {
        self.segments.iter().flat_map(|s| s.utterances.iter())
    }

    fn recount_tokens(&mut self) {
        for seg in &mut self.segments {
            for utt in &mut seg.utterances {
                utt.recount();
            }
        }
    }

    /// Checks every structural invariant; returns the offending JSON path.
    pub fn validate(&self) -> Result<(), (String, String)> {
        let mut ids = HashSet::new();
        for (i, sp) in self.speakers.iter().enumerate() {
            if sp.id.is_empty() {
                return Err((format!("speakers[{i}].id"), "empty speaker id".into()));
            }
            if !ids.insert(sp.id.as_str()) {
                return Err((format!("speakers[{i}].id"), format!("duplicate speaker id {:?}", sp.id)));
            }
        }
        let moderators = self.speakers.iter().filter(|s| s.is_moderator()).count();
        if moderators > 1 {
            return Err((
                "speakers".into(),
                format!("{moderators} moderators; at most one allowed"),
            ));
        }
        if self.moderated != (moderators == 1) {
            return Err((
                "moderated".into(),
                format!("moderated={} but roster has {moderators} moderator(s)", self.moderated),
            ));
        }
        if self.segments.is_empty() {
            return Err(("segments".into(), "session has no segments".into()));
        }
        let mut seg_ids = HashSet::new();
        for (si, seg) in self.segments.iter().enumerate() {
            if !seg_ids.insert(seg.segment_id.as_str()) {
                return Err((
                    format!("segments[{si}].segment_id"),
                    format!("duplicate segment_id {:?}", seg.segment_id),
                ));
            }
            if seg.utterances.is_empty() {
                return Err((format!("segments[{si}].utterances"), "segment has no utterances".into()));
            }
            for (ui, utt) in seg.utterances.iter().enumerate() {
                if !ids.contains(utt.speaker_id.as_str()) {
                    return Err((
                        format!("segments[{si}].utterances[{ui}].speaker_id"),
                        format!("unresolved speaker_id {:?}", utt.speaker_id),
                    ));
                }
                if utt.sentences.is_empty() {
                    return Err((
                        format!("segments[{si}].utterances[{ui}].sentences"),
                        "utterance has no sentences".into(),
                    ));
                }
            }
        }
        if self.moderated && self.moderator_sentence_count() == 0 {
            return Err((
                "moderated".into(),
                "moderated session contains no moderator sentences".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Corpus {
    pub sessions: Vec<Session>,
}

impl Corpus {
    pub fn new(sessions: Vec<Session>) -> Self {
        Corpus { sessions }
    }

    pub fn session(&self, id: &str) -> Option<&Session> {
        self.sessions.iter().find(|s| s.session_id == id)
    }

    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }

    pub fn len(&self) -> usize {
        self.sessions.len()
    }

    /// Parses a snapshot written with [`Corpus::to_json`], re-validating it.
    pub fn from_json(text: &str, origin: &Path) -> Result<Corpus, CorpusError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let sessions: Vec<Session> = serde_path_to_error::deserialize(de).map_err(|e| CorpusError::Schema {
            file: origin.to_path_buf(),
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        let mut out = Vec::with_capacity(sessions.len());
        let mut seen = BTreeMap::new();
        for (i, mut s) in sessions.into_iter().enumerate() {
            s.recount_tokens();
            check(&s, origin, &format!("[{i}]."))?;
            if seen.insert(s.session_id.clone(), ()).is_some() {
                return Err(CorpusError::DuplicateSession {
                    file: origin.to_path_buf(),
                    session: s.session_id,
                    first: origin.to_path_buf(),
                });
            }
            out.push(s);
        }
        Ok(Corpus { sessions: out })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.sessions).expect("corpus serializes")
    }
}

fn check(session: &Session, file: &Path, prefix: &str) -> Result<(), CorpusError> {
    session.validate().map_err(|(path, message)| CorpusError::Invalid {
        file: file.to_path_buf(),
        session: session.session_id.clone(),
        path: format!("{prefix}{path}"),
        message,
    })
}

/// Parses and validates one session file.
pub fn load_session(path: &Path) -> Result<Session, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        file: path.to_path_buf(),
        source,
    })?;
    parse_session(&text, path)
}

pub fn parse_session(text: &str, origin: &Path) -> Result<Session, CorpusError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut session: Session = serde_path_to_error::deserialize(de).map_err(|e| CorpusError::Schema {
        file: origin.to_path_buf(),
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    session.recount_tokens();
    check(&session, origin, "")?;
    Ok(session)
}

/// Expands directories (sorted `*.json` entries) and loads every session.
pub fn load_corpus<P: AsRef<Path>>(paths: &[P]) -> Result<Corpus, CorpusError> {
    let mut files = Vec::new();
    for p in paths {
        let p = p.as_ref();
        if p.is_dir() {
            let entries = fs::read_dir(p).map_err(|source| CorpusError::Io {
                file: p.to_path_buf(),
                source,
            })?;
            let mut found: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file() && f.extension().is_some_and(|x| x == "json"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.to_path_buf());
        }
    }

    let loaded: Vec<Result<Session, CorpusError>> = files.par_iter().map(|f| load_session(f)).collect();

    let mut first_seen: BTreeMap<String, PathBuf> = BTreeMap::new();
    let mut sessions = Vec::with_capacity(files.len());
    for (file, result) in files.iter().zip(loaded) {
        let session = result?;
        if let Some(first) = first_seen.get(&session.session_id) {
            return Err(CorpusError::DuplicateSession {
                file: file.clone(),
                session: session.session_id,
                first: first.clone(),
            });
        }
        first_seen.insert(session.session_id.clone(), file.clone());
        sessions.push(session);
    }
    Ok(Corpus { sessions })
}

/// Whitespace tokenizer; punctuation stays attached to words.
pub fn tokenize(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

/// Splits raw text into sentences on `.`, `?` or `!` followed by whitespace.
/// Only used when importing unsegmented text.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '?' | '!') {
            if let Some(&(j, next)) = chars.peek() {
                if next.is_whitespace() {
                    let piece = text[start..j].trim();
                    if !piece.is_empty() {
                        out.push(piece.to_string());
                    }
                    start = j;
                }
            } else {
                let _ = i;
            }
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail.to_string());
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupStats {
    pub source: Option<Source>,
    pub moderated: Option<bool>,
    pub sessions: usize,
    pub unique_speakers: usize,
    pub avg_speakers: f64,
    pub avg_segments: f64,
    pub avg_sentences: f64,
    pub avg_moderator_sentences: f64,
    pub avg_tokens: f64,
    pub total_speakers: usize,
    pub total_segments: usize,
    pub total_sentences: usize,
    pub total_moderator_sentences: usize,
    pub total_tokens: usize,
}

impl GroupStats {
    fn from_sessions<'a>(
        source: Option<Source>,
        moderated: Option<bool>,
        sessions: impl Iterator<Item = &'a Session>,
    ) -> Self {
        let mut identities = BTreeSet::new();
        let mut g = GroupStats {
            source,
            moderated,
            sessions: 0,
            unique_speakers: 0,
            avg_speakers: 0.0,
            avg_segments: 0.0,
            avg_sentences: 0.0,
            avg_moderator_sentences: 0.0,
            avg_tokens: 0.0,
            total_speakers: 0,
            total_segments: 0,
            total_sentences: 0,
            total_moderator_sentences: 0,
            total_tokens: 0,
        };
        for s in sessions {
            g.sessions += 1;
            g.total_speakers += s.speakers.len();
            g.total_segments += s.segments.len();
            g.total_sentences += s.sentence_count();
            g.total_moderator_sentences += s.moderator_sentence_count();
            g.total_tokens += s.token_count();
            identities.extend(s.speakers.iter().map(|sp| sp.identity().to_string()));
        }
        g.unique_speakers = identities.len();
        if g.sessions > 0 {
            let n = g.sessions as f64;
            g.avg_speakers = g.total_speakers as f64 / n;
            g.avg_segments = g.total_segments as f64 / n;
            g.avg_sentences = g.total_sentences as f64 / n;
            g.avg_moderator_sentences = g.total_moderator_sentences as f64 / n;
            g.avg_tokens = g.total_tokens as f64 / n;
        }
        g
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    /// One row per (source, moderated) group present in the corpus.
    pub groups: Vec<GroupStats>,
    pub total: GroupStats,
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let mut keys: BTreeSet<(Source, bool)> = BTreeSet::new();
    for s in &corpus.sessions {
        keys.insert((s.source, !s.moderated));
    }
    // moderated groups first within each source
    let groups = keys
        .into_iter()
        .map(|(src, not_mod)| {
            GroupStats::from_sessions(
                Some(src),
                Some(!not_mod),
                corpus
                    .sessions
                    .iter()
                    .filter(move |s| s.source == src && s.moderated != not_mod),
            )
        })
        .collect();
    CorpusStats {
        groups,
        total: GroupStats::from_sessions(None, None, corpus.sessions.iter()),
    }
}

impl CorpusStats {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "source",
            "moderated",
            "sessions",
            "unique_speakers",
            "avg_speakers",
            "avg_segments",
            "avg_sentences",
            "avg_moderator_sentences",
            "avg_tokens",
            "total_segments",
            "total_sentences",
            "total_moderator_sentences",
            "total_tokens",
        ])
        .expect("in-memory csv");
        for g in self.groups.iter().chain(std::iter::once(&self.total)) {
            w.write_record([
                g.source.map_or("total".to_string(), |s| s.to_string()),
                g.moderated.map_or("-".to_string(), |m| m.to_string()),
                g.sessions.to_string(),
                g.unique_speakers.to_string(),
                format!("{:.2}", g.avg_speakers),
                format!("{:.2}", g.avg_segments),
                format!("{:.2}", g.avg_sentences),
                format!("{:.2}", g.avg_moderator_sentences),
                format!("{:.2}", g.avg_tokens),
                g.total_segments.to_string(),
                g.total_sentences.to_string(),
                g.total_moderator_sentences.to_string(),
                g.total_tokens.to_string(),
            ])
            .expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8 csv")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn speaker(id: &str, role: Role) -> Speaker {
        Speaker {
            id: id.into(),
            display_name: id.to_uppercase(),
            role,
            native_language: None,
            global_id: None,
        }
    }

    fn session() -> Session {
        Session {
            session_id: "s1".into(),
            source: Source::Club,
            topic: "Time".into(),
            moderated: true,
            speakers: vec![speaker("m", Role::Moderator), speaker("a", Role::Participant)],
            segments: vec![Segment {
                segment_id: "g1".into(),
                subtopic_label: None,
                utterances: vec![
                    Utterance::new("m", vec!["Hello all.".into(), "Shall we start?".into()]),
                    Utterance::new("a", vec!["Yes , sure".into()]),
                ],
            }],
        }
    }

    #[test]
    fn tokenize_whitespace_rule() {
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("Okay."), vec!["Okay."]);
        assert_eq!(tokenize("I see , thanks").len(), 4);
        assert_eq!(tokenize("  a\u{2003}b\tc\n"), vec!["a", "b", "c"]);
    }

    #[test]
    fn split_sentences_on_terminal_punctuation() {
        assert_eq!(
            split_sentences("Hi there. How are you? Fine!  ok"),
            vec!["Hi there.", "How are you?", "Fine!", "ok"]
        );
        assert_eq!(split_sentences("v1.2 is out."), vec!["v1.2 is out."]);
        assert!(split_sentences("   ").is_empty());
    }

    #[test]
    fn counts() {
        let s = session();
        assert!(s.validate().is_ok());
        assert_eq!(s.sentence_count(), 3);
        assert_eq!(s.moderator_sentence_count(), 2);
        assert_eq!(s.token_count(), 2 + 3 + 3);
        assert_eq!(s.moderator_sentences().len(), 2);
    }

    #[test]
    fn unresolved_speaker_rejected() {
        let mut s = session();
        s.segments[0].utterances[1].speaker_id = "ghost".into();
        let (path, msg) = s.validate().unwrap_err();
        assert_eq!(path, "segments[0].utterances[1].speaker_id");
        assert!(msg.contains("unresolved speaker_id"));
    }

    #[test]
    fn moderated_flag_must_match_roster() {
        let mut s = session();
        s.moderated = false;
        assert_eq!(s.validate().unwrap_err().0, "moderated");

        let mut s = session();
        s.speakers[1].role = Role::Moderator;
        assert!(s.validate().unwrap_err().1.contains("at most one"));
    }

    #[test]
    fn silent_moderator_rejected() {
        let mut s = session();
        s.segments[0].utterances.remove(0);
        assert!(s.validate().unwrap_err().1.contains("no moderator sentences"));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let mut s = session();
        s.speakers.push(speaker("a", Role::Participant));
        assert!(s.validate().unwrap_err().1.contains("duplicate speaker id"));

        let mut s = session();
        let seg = s.segments[0].clone();
        s.segments.push(seg);
        assert!(s.validate().unwrap_err().1.contains("duplicate segment_id"));
    }

    #[test]
    fn schema_error_names_path() {
        let text = r#"{"session_id":"x","source":"club","topic":"t","moderated":false,
            "speakers":[{"id":"a","display_name":"A","role":"boss"}],"segments":[]}"#;
        let err = parse_session(text, Path::new("x.json")).unwrap_err();
        match err {
            CorpusError::Schema { path, .. } => assert_eq!(path, "speakers[0].role"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn empty_corpus_stats_are_zero() {
        let stats = corpus_stats(&Corpus::default());
        assert!(stats.groups.is_empty());
        assert_eq!(stats.total.sessions, 0);
        assert_eq!(stats.total.avg_tokens, 0.0);
        assert_eq!(stats.total.total_tokens, 0);
    }

    #[test]
    fn unique_speakers_use_identity() {
        let mut a = session();
        let mut b = session();
        b.session_id = "s2".into();
        a.speakers[1].global_id = Some("p-17".into());
        b.speakers[1].global_id = Some("p-17".into());
        b.speakers[1].display_name = "renamed".into();
        let stats = corpus_stats(&Corpus::new(vec![a, b]));
        // shared moderator display name + shared participant identity
        assert_eq!(stats.total.unique_speakers, 2);
        assert_eq!(stats.total.total_speakers, 4);
    }
}
