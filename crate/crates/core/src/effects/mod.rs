//! Strategy frequencies, condition comparisons, segment quality and
//! per-strategy effects.

mod alpha;
mod stats;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Session};
use crate::eslmod::EslmodAnnotation;
use crate::quality::SpeakerQualityScores;
use crate::taxonomy::TaxonomyRegistry;

pub use alpha::{krippendorff_alpha, ratings_from_csv, AlphaError};
pub use stats::{
    ln_gamma, mean, p_value, pooled_t, regularized_beta, t_cdf, variance, welch_t, StatsError, TTest, Tails,
};

pub const SIGNIFICANCE: f64 = 0.05;

#[derive(Debug, Error, PartialEq)]
pub enum EffectsError {
    #[error("no annotations")]
    NoAnnotations,
    #[error("unscorable segment {session_id}/{segment_id}")]
    UnscorableSegment { session_id: String, segment_id: String },
    #[error("no {0} sessions in scope")]
    EmptyCondition(&'static str),
    #[error("no topic occurs in both conditions")]
    NoSharedTopic,
    #[error("no speaker appears in both conditions")]
    NoSharedSpeaker,
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Overall,
    TopicManagement,
    Tone,
    Opening,
    Closing,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::Overall,
        Metric::TopicManagement,
        Metric::Tone,
        Metric::Opening,
        Metric::Closing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Overall => "overall",
            Metric::TopicManagement => "topic_management",
            Metric::Tone => "tone",
            Metric::Opening => "opening",
            Metric::Closing => "closing",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Metric::Overall => "Overall",
            Metric::TopicManagement => "Topic management",
            Metric::Tone => "Tone choice",
            Metric::Opening => "Conversation opening",
            Metric::Closing => "Conversation closing",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyRow {
    pub strategy_id: String,
    pub name: String,
    pub count: usize,
    pub percent: f64,
}

/// Counts per strategy in registry order; ids outside the registry follow.
pub fn strategy_frequencies(
    annotations: &[EslmodAnnotation],
    taxonomy: &TaxonomyRegistry,
) -> Result<Vec<FrequencyRow>, EffectsError> {
    if annotations.is_empty() {
        return Err(EffectsError::NoAnnotations);
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for a in annotations {
        *counts.entry(a.strategy.as_str()).or_default() += 1;
    }
    let total = annotations.len() as f64;
    let mut rows: Vec<FrequencyRow> = taxonomy
        .strategies
        .iter()
        .map(|s| FrequencyRow {
            strategy_id: s.id.clone(),
            name: s.name.clone(),
            count: counts.remove(s.id.as_str()).unwrap_or(0),
            percent: 0.0,
        })
        .collect();
    rows.extend(counts.into_iter().map(|(id, count)| FrequencyRow {
        strategy_id: id.to_string(),
        name: id.to_string(),
        count,
        percent: 0.0,
    }));
    for r in &mut rows {
        r.percent = 100.0 * r.count as f64 / total;
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contributor {
    pub speaker_id: String,
    pub q: f64,
    pub tokens: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentQuality {
    pub session_id: String,
    pub segment_id: String,
    pub q: f64,
    pub contributors: Vec<Contributor>,
}

/// Σ (t_i / Σ t_j) · q_i over pairs with t_i > 0.
pub fn weighted_quality(scores_tokens: &[(f64, usize)]) -> Option<f64> {
    let total: usize = scores_tokens.iter().filter(|(_, t)| *t > 0).map(|(_, t)| t).sum();
    (total > 0).then(|| {
        scores_tokens
            .iter()
            .filter(|(_, t)| *t > 0)
            .map(|&(q, t)| q * t as f64 / total as f64)
            .sum()
    })
}

fn score_for<'a>(
    records: &'a [SpeakerQualityScores],
    session_id: &str,
    segment_id: &str,
    speaker_id: &str,
) -> Option<&'a SpeakerQualityScores> {
    let mine = |r: &&SpeakerQualityScores| r.session_id == session_id && r.speaker_id == speaker_id;
    records
        .iter()
        .filter(mine)
        .find(|r| r.segment_id.as_deref() == Some(segment_id))
        .or_else(|| records.iter().filter(mine).find(|r| r.segment_id.is_none()))
}

/// Token-weighted quality of one segment's non-moderator speakers. A speaker's
/// segment-scope record is preferred over a session-scope one.
pub fn segment_quality(
    session: &Session,
    segment_id: &str,
    records: &[SpeakerQualityScores],
    metric: Metric,
) -> Result<SegmentQuality, EffectsError> {
    let unscorable = || EffectsError::UnscorableSegment {
        session_id: session.session_id.clone(),
        segment_id: segment_id.to_string(),
    };
    let segment = session.segment(segment_id).ok_or_else(unscorable)?;
    let mut tokens: BTreeMap<&str, usize> = BTreeMap::new();
    for u in &segment.utterances {
        if !session.is_moderator(&u.speaker_id) {
            *tokens.entry(u.speaker_id.as_str()).or_default() += u.token_count;
        }
    }
    let mut contributors: Vec<Contributor> = tokens
        .into_iter()
        .filter(|(_, t)| *t > 0)
        .filter_map(|(sp, t)| {
            score_for(records, &session.session_id, segment_id, sp).map(|r| Contributor {
                speaker_id: sp.to_string(),
                q: r.scores.get(metric) as f64,
                tokens: t,
                weight: 0.0,
            })
        })
        .collect();
    let total: usize = contributors.iter().map(|c| c.tokens).sum();
    if total == 0 {
        return Err(unscorable());
    }
    for c in &mut contributors {
        c.weight = c.tokens as f64 / total as f64;
    }
    let q = contributors.iter().map(|c| c.weight * c.q).sum();
    Ok(SegmentQuality {
        session_id: session.session_id.clone(),
        segment_id: segment_id.to_string(),
        q,
        contributors,
    })
}

/// Q for every segment of the given sessions; unscorable segments are logged and skipped.
pub fn segment_qualities<'a>(
    sessions: impl IntoIterator<Item = &'a Session>,
    records: &[SpeakerQualityScores],
    metric: Metric,
) -> Vec<SegmentQuality> {
    let mut out = Vec::new();
    for s in sessions {
        for g in &s.segments {
            match segment_quality(s, &g.segment_id, records, metric) {
                Ok(q) => out.push(q),
                Err(e) => log::info!("excluded: {e}"),
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    All,
    ByTopic,
    BySpeaker,
}

impl std::str::FromStr for Pairing {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "all" => Ok(Pairing::All),
            "by_topic" | "by-topic" => Ok(Pairing::ByTopic),
            "by_speaker" | "by-speaker" => Ok(Pairing::BySpeaker),
            other => Err(format!("unknown pairing {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub metric: Metric,
    pub mean_moderated: f64,
    pub mean_non_moderated: f64,
    pub n_moderated: usize,
    pub n_non_moderated: usize,
    pub t_stat: Option<f64>,
    pub df: Option<f64>,
    /// Alternative: moderated > non-moderated. `None` when the test is undefined.
    pub p_one_tailed: Option<f64>,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicDelta {
    pub topic: String,
    pub metric: Metric,
    pub delta: f64,
}

impl TopicDelta {
    pub fn arrow(&self) -> &'static str {
        if self.delta > 0.0 {
            "↑"
        } else if self.delta < 0.0 {
            "↓"
        } else {
            "="
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub pairing: Pairing,
    pub rows: Vec<ComparisonRow>,
    pub topic_deltas: Vec<TopicDelta>,
    /// Speaker identities kept by the by-speaker pairing.
    pub speakers: Vec<String>,
}

fn comparison_row(metric: Metric, moderated: &[f64], non_moderated: &[f64]) -> ComparisonRow {
    let test = welch_t(moderated, non_moderated, Tails::One).ok();
    ComparisonRow {
        metric,
        mean_moderated: mean(moderated),
        mean_non_moderated: mean(non_moderated),
        n_moderated: moderated.len(),
        n_non_moderated: non_moderated.len(),
        t_stat: test.map(|t| t.t),
        df: test.map(|t| t.df),
        p_one_tailed: test.map(|t| t.p),
        significant: test.is_some_and(|t| t.p < SIGNIFICANCE),
    }
}

/// Moderated vs non-moderated quality per metric with one-tailed Welch tests.
///
/// Session-scope records are used when present, otherwise segment-scope ones.
/// The unit of comparison is the session mean (`All`, `ByTopic`) or the
/// per-condition speaker mean (`BySpeaker`, speakers seen in both conditions).
pub fn compare_conditions(
    records: &[SpeakerQualityScores],
    corpus: &Corpus,
    pairing: Pairing,
) -> Result<Comparison, EffectsError> {
    let session_scope = records.iter().any(|r| r.segment_id.is_none());
    let records: Vec<&SpeakerQualityScores> = records
        .iter()
        .filter(|r| r.segment_id.is_none() == session_scope)
        .filter(|r| {
            corpus
                .session(&r.session_id)
                .is_some_and(|s| !s.is_moderator(&r.speaker_id))
        })
        .collect();

    let mut sessions: Vec<&Session> = corpus.sessions.iter().collect();
    if pairing == Pairing::ByTopic {
        let topics = |m: bool| -> BTreeSet<&str> {
            corpus
                .sessions
                .iter()
                .filter(|s| s.moderated == m)
                .map(|s| s.topic.as_str())
                .collect()
        };
        let shared: BTreeSet<&str> = topics(true).intersection(&topics(false)).copied().collect();
        if shared.is_empty() {
            return Err(EffectsError::NoSharedTopic);
        }
        sessions.retain(|s| shared.contains(s.topic.as_str()));
    }

    // unit key → condition, per-metric scores
    let mut units: BTreeMap<(bool, String), Vec<&SpeakerQualityScores>> = BTreeMap::new();
    let mut kept_speakers = Vec::new();
    match pairing {
        Pairing::All | Pairing::ByTopic => {
            for s in &sessions {
                let rs: Vec<_> = records
                    .iter()
                    .copied()
                    .filter(|r| r.session_id == s.session_id)
                    .collect();
                if !rs.is_empty() {
                    units.insert((s.moderated, s.session_id.clone()), rs);
                }
            }
        }
        Pairing::BySpeaker => {
            let mut by_identity: BTreeMap<(bool, String), Vec<&SpeakerQualityScores>> = BTreeMap::new();
            for r in &records {
                let s = corpus.session(&r.session_id).expect("filtered above");
                let identity = s
                    .speaker(&r.speaker_id)
                    .map_or(r.speaker_id.as_str(), |sp| sp.identity());
                by_identity
                    .entry((s.moderated, identity.to_string()))
                    .or_default()
                    .push(r);
            }
            let ids = |m: bool| -> BTreeSet<String> {
                by_identity
                    .keys()
                    .filter(|(c, _)| *c == m)
                    .map(|(_, id)| id.clone())
                    .collect()
            };
            let both: BTreeSet<String> = ids(true).intersection(&ids(false)).cloned().collect();
            if both.is_empty() {
                return Err(EffectsError::NoSharedSpeaker);
            }
            by_identity.retain(|(_, id), _| both.contains(id));
            kept_speakers = both.into_iter().collect();
            units = by_identity;
        }
    }
    if !units.keys().any(|(m, _)| *m) {
        return Err(EffectsError::EmptyCondition("moderated"));
    }
    if !units.keys().any(|(m, _)| !*m) {
        return Err(EffectsError::EmptyCondition("non-moderated"));
    }

    let unit_mean = |rs: &[&SpeakerQualityScores], metric: Metric| {
        rs.iter().map(|r| r.scores.get(metric) as f64).sum::<f64>() / rs.len() as f64
    };
    let rows = Metric::ALL
        .iter()
        .map(|&metric| {
            let side = |m: bool| -> Vec<f64> {
                units
                    .iter()
                    .filter(|((c, _), _)| *c == m)
                    .map(|(_, rs)| unit_mean(rs, metric))
                    .collect()
            };
            comparison_row(metric, &side(true), &side(false))
        })
        .collect();

    let mut topic_deltas = Vec::new();
    if pairing == Pairing::ByTopic {
        let topics: BTreeSet<&str> = sessions.iter().map(|s| s.topic.as_str()).collect();
        for topic in topics {
            for metric in Metric::ALL {
                let side = |m: bool| -> Vec<f64> {
                    units
                        .iter()
                        .filter(|((c, id), _)| *c == m && corpus.session(id).is_some_and(|s| s.topic == topic))
                        .map(|(_, rs)| unit_mean(rs, metric))
                        .collect()
                };
                let (a, b) = (side(true), side(false));
                if !a.is_empty() && !b.is_empty() {
                    topic_deltas.push(TopicDelta {
                        topic: topic.to_string(),
                        metric,
                        delta: mean(&a) - mean(&b),
                    });
                }
            }
        }
    }
    Ok(Comparison {
        pairing,
        rows,
        topic_deltas,
        speakers: kept_speakers,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyEffect {
    pub strategy_id: String,
    pub name: String,
    pub n_with: usize,
    pub n_without: usize,
    pub mean_with: Option<f64>,
    pub mean_without: Option<f64>,
    pub delta: Option<f64>,
    pub t_stat: Option<f64>,
    pub df: Option<f64>,
    pub p_value: Option<f64>,
    /// Why the test was not run.
    pub flag: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    #[default]
    Welch,
    Pooled,
}

/// Δ_m = mean Q of segments with ≥1 sentence of strategy m minus mean Q of the
/// rest, with a two-tailed test; sorted by `mean_with`, highest first.
pub fn strategy_effects(
    qualities: &[SegmentQuality],
    annotations: &[EslmodAnnotation],
    taxonomy: &TaxonomyRegistry,
    test: TestKind,
) -> Vec<StrategyEffect> {
    let mut present: BTreeMap<(&str, &str), BTreeSet<&str>> = BTreeMap::new();
    for a in annotations {
        present
            .entry((a.location.session_id.as_str(), a.location.segment_id.as_str()))
            .or_default()
            .insert(a.strategy.as_str());
    }
    let mut rows: Vec<StrategyEffect> = taxonomy
        .strategies
        .iter()
        .map(|s| {
            let (mut with, mut without) = (Vec::new(), Vec::new());
            for q in qualities {
                let has = present
                    .get(&(q.session_id.as_str(), q.segment_id.as_str()))
                    .is_some_and(|set| set.contains(s.id.as_str()));
                if has {
                    with.push(q.q);
                } else {
                    without.push(q.q);
                }
            }
            let m = |v: &[f64]| (!v.is_empty()).then(|| mean(v));
            let (mean_with, mean_without) = (m(&with), m(&without));
            let mut row = StrategyEffect {
                strategy_id: s.id.clone(),
                name: s.name.clone(),
                n_with: with.len(),
                n_without: without.len(),
                mean_with,
                mean_without,
                delta: mean_with.zip(mean_without).map(|(a, b)| a - b),
                t_stat: None,
                df: None,
                p_value: None,
                flag: None,
            };
            if with.len() < 2 || without.len() < 2 {
                row.flag = Some(format!(
                    "present in {} and absent in {} segments",
                    with.len(),
                    without.len()
                ));
            } else {
                let r = match test {
                    TestKind::Welch => welch_t(&with, &without, Tails::Two),
                    TestKind::Pooled => pooled_t(&with, &without, Tails::Two),
                };
                match r {
                    Ok(t) => {
                        row.t_stat = Some(t.t);
                        row.df = Some(t.df);
                        row.p_value = Some(t.p);
                    }
                    Err(e) => row.flag = Some(e.to_string()),
                }
            }
            row
        })
        .collect();
    rows.sort_by(|a, b| match (a.mean_with, b.mean_with) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Location, Role, Segment, Source, Speaker, Utterance};
    use crate::gateway::parse::Scores;
    use crate::gateway::SchemaTag;

    fn scores(v: u8) -> Scores {
        Scores {
            overall: v,
            topic_management: v,
            tone_appropriateness: v,
            conversation_opening: v,
            conversation_closing: v,
        }
    }

    fn rec(session: &str, segment: Option<&str>, speaker: &str, v: u8) -> SpeakerQualityScores {
        SpeakerQualityScores {
            session_id: session.into(),
            segment_id: segment.map(str::to_string),
            speaker_id: speaker.into(),
            scores: scores(v),
            rationale: String::new(),
            model_id: "m".into(),
            prompt_hash: "h".into(),
        }
    }

    fn words(n: usize) -> Vec<String> {
        vec![vec!["w"; n].join(" ")]
    }

    fn session(id: &str, moderated: bool, topic: &str) -> Session {
        let mut speakers = vec![
            Speaker {
                id: "a".into(),
                display_name: "A".into(),
                role: Role::Participant,
                native_language: None,
                global_id: None,
            },
            Speaker {
                id: "b".into(),
                display_name: "B".into(),
                role: Role::Participant,
                native_language: None,
                global_id: None,
            },
        ];
        let mut utts = vec![Utterance::new("a", words(100)), Utterance::new("b", words(300))];
        if moderated {
            speakers.push(Speaker {
                id: "m".into(),
                display_name: "M".into(),
                role: Role::Moderator,
                native_language: None,
                global_id: None,
            });
            utts.push(Utterance::new("m", words(1000)));
        }
        Session {
            session_id: id.into(),
            source: Source::Volunteer,
            topic: topic.into(),
            moderated,
            speakers,
            segments: vec![Segment {
                segment_id: "g".into(),
                subtopic_label: None,
                utterances: utts,
            }],
        }
    }

    #[test]
    fn q_substitution_example() {
        let s = session("s", true, "t");
        let recs = vec![
            rec("s", Some("g"), "a", 4),
            rec("s", Some("g"), "b", 2),
            rec("s", Some("g"), "m", 5),
        ];
        let q = segment_quality(&s, "g", &recs, Metric::Overall).unwrap();
        assert!((q.q - 2.5).abs() < 1e-12);
        assert_eq!(q.contributors.len(), 2);
    }

    #[test]
    fn session_record_fallback_and_unscorable() {
        let s = session("s", false, "t");
        let q = segment_quality(&s, "g", &[rec("s", None, "a", 3)], Metric::Tone).unwrap();
        assert_eq!(q.q, 3.0);
        assert!(matches!(
            segment_quality(&s, "g", &[], Metric::Tone),
            Err(EffectsError::UnscorableSegment { .. })
        ));
    }

    #[test]
    fn frequencies_single_row() {
        let a = EslmodAnnotation {
            location: Location {
                session_id: "s".into(),
                segment_id: "g".into(),
                utterance_idx: 0,
                sentence_idx: 0,
            },
            schema: SchemaTag::Eslmod,
            strategy: "echoing".into(),
            target_speaker: String::new(),
            reason: String::new(),
            model_id: "m".into(),
            prompt_hash: "h".into(),
        };
        let rows = strategy_frequencies(&[a], &TaxonomyRegistry::default_registry()).unwrap();
        assert_eq!(rows.len(), 10);
        let echo = rows.iter().find(|r| r.strategy_id == "echoing").unwrap();
        assert_eq!((echo.count, echo.percent), (1, 100.0));
        assert_eq!(
            strategy_frequencies(&[], &TaxonomyRegistry::default_registry()),
            Err(EffectsError::NoAnnotations)
        );
    }

    #[test]
    fn identical_conditions_not_significant() {
        let corpus = Corpus::new(vec![
            session("m1", true, "x"),
            session("m2", true, "y"),
            session("n1", false, "x"),
            session("n2", false, "y"),
        ]);
        let mut recs = Vec::new();
        for (s, v) in [("m1", 3), ("m2", 4), ("n1", 3), ("n2", 4)] {
            recs.push(rec(s, None, "a", v));
            recs.push(rec(s, None, "b", v));
        }
        for pairing in [Pairing::All, Pairing::ByTopic, Pairing::BySpeaker] {
            let c = compare_conditions(&recs, &corpus, pairing).unwrap();
            for r in &c.rows {
                assert_eq!(r.mean_moderated, r.mean_non_moderated);
                assert!(!r.significant);
            }
            assert!(c.topic_deltas.iter().all(|d| d.delta == 0.0));
        }
        let only_mod = Corpus::new(vec![session("m1", true, "x")]);
        assert_eq!(
            compare_conditions(&recs, &only_mod, Pairing::All),
            Err(EffectsError::EmptyCondition("non-moderated"))
        );
    }

    #[test]
    fn disjoint_topics_and_speakers() {
        let corpus = Corpus::new(vec![session("m1", true, "x"), session("n1", false, "y")]);
        let recs = vec![rec("m1", None, "a", 3), rec("n1", None, "b", 4)];
        assert!(compare_conditions(&recs, &corpus, Pairing::All).is_ok());
        assert_eq!(
            compare_conditions(&recs, &corpus, Pairing::ByTopic),
            Err(EffectsError::NoSharedTopic)
        );
        assert_eq!(
            compare_conditions(&recs, &corpus, Pairing::BySpeaker),
            Err(EffectsError::NoSharedSpeaker)
        );
    }

    #[test]
    fn always_present_strategy_is_flagged() {
        let reg = TaxonomyRegistry::default_registry();
        let qualities: Vec<SegmentQuality> = (0..4)
            .map(|i| SegmentQuality {
                session_id: "s".into(),
                segment_id: format!("g{i}"),
                q: 3.0,
                contributors: vec![],
            })
            .collect();
        let ann: Vec<EslmodAnnotation> = (0..4)
            .map(|i| EslmodAnnotation {
                location: Location {
                    session_id: "s".into(),
                    segment_id: format!("g{i}"),
                    utterance_idx: 0,
                    sentence_idx: 0,
                },
                schema: SchemaTag::Eslmod,
                strategy: "echoing".into(),
                target_speaker: String::new(),
                reason: String::new(),
                model_id: "m".into(),
                prompt_hash: "h".into(),
            })
            .collect();
        let rows = strategy_effects(&qualities, &ann, &reg, TestKind::Welch);
        let echo = rows.iter().find(|r| r.strategy_id == "echoing").unwrap();
        assert_eq!(echo.p_value, None);
        assert!(echo.flag.is_some());
        assert_eq!(echo.delta, None);
        assert!(rows.iter().all(|r| r.n_with + r.n_without == 4));
    }
}
