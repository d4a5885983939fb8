//! Fixture builders and independent oracles shared by the integration tests.
#![allow(dead_code)]

use modlab_core::corpus::{Role, Segment, Session, Source, Speaker, Utterance};
use modlab_core::quality::Scores;
use modlab_core::{DialogueAct, EslmodAnnotation, Location, Motive, SchemaTag, SpeakerQualityScores, WhowAnnotation};

use DialogueAct::*;
use Motive::*;

pub fn loc(session: &str, i: usize) -> Location {
    Location {
        session_id: session.to_string(),
        segment_id: format!("g{}", i / 40),
        utterance_idx: i % 40,
        sentence_idx: 0,
    }
}

pub fn whow(location: Location, motives: &[Motive], act: DialogueAct, reason: &str) -> WhowAnnotation {
    WhowAnnotation {
        location,
        schema: SchemaTag::Whow,
        motives: motives.to_vec(),
        dialogue_act: act,
        target_speaker: "Everyone".into(),
        reason: reason.to_string(),
        model_id: "fixture".into(),
        prompt_hash: String::new(),
    }
}

pub fn eslmod(location: Location, strategy: &str) -> EslmodAnnotation {
    EslmodAnnotation {
        location,
        schema: SchemaTag::Eslmod,
        strategy: strategy.to_string(),
        target_speaker: "Everyone".into(),
        reason: String::new(),
        model_id: "fixture".into(),
        prompt_hash: String::new(),
    }
}

/// Sentences per (act, motive set); two-motive sentences make the cell sums
/// exceed the sentence total, as in the published matrix.
pub const MATRIX_GROUPS: &[(DialogueAct, &[Motive], usize)] = &[
    (Probing, &[Informational, Social], 68),
    (Probing, &[Informational, Coordinative], 19),
    (Probing, &[Informational], 751),
    (Probing, &[Coordinative], 18),
    (Confronting, &[Informational, Social], 3),
    (Confronting, &[Informational], 14),
    (Confronting, &[Coordinative], 2),
    (Instruction, &[Coordinative, Social], 10),
    (Instruction, &[Informational, Coordinative], 6),
    (Instruction, &[Informational], 5),
    (Instruction, &[Coordinative], 103),
    (Interpretation, &[Informational, Social], 34),
    (Interpretation, &[Informational], 256),
    (Interpretation, &[Coordinative], 6),
    (Interpretation, &[Social], 46),
    (Supplement, &[Informational, Social], 132),
    (Supplement, &[Informational], 1091),
    (Supplement, &[Coordinative], 35),
    (Supplement, &[Social], 269),
    (Utility, &[Informational], 22),
    (Utility, &[Coordinative], 19),
    (Utility, &[Social], 315),
    (Utility, &[], 60),
];

pub fn matrix_annotations() -> Vec<WhowAnnotation> {
    let mut out = Vec::new();
    for &(act, motives, n) in MATRIX_GROUPS {
        for _ in 0..n {
            let i = out.len();
            out.push(whow(loc("jm", i), motives, act, "The moderator responds."));
        }
    }
    out
}

/// Published cells as (probability, count); rows follow `Motive::ALL`,
/// columns follow `DialogueAct::ALL`.
pub const MATRIX_CELLS: [[(f64, usize); 6]; 3] = [
    [
        (0.26, 838),
        (0.01, 17),
        (0.00, 11),
        (0.09, 290),
        (0.37, 1223),
        (0.01, 22),
    ],
    [(0.01, 37), (0.00, 2), (0.04, 119), (0.00, 6), (0.01, 35), (0.01, 19)],
    [(0.02, 68), (0.00, 3), (0.00, 10), (0.02, 80), (0.12, 401), (0.10, 315)],
];
pub const MATRIX_ROW_TOTALS: [(f64, usize); 3] = [(0.73, 2401), (0.07, 218), (0.27, 877)];
pub const MATRIX_COL_TOTALS: [(f64, usize); 6] = [
    (0.26, 856),
    (0.01, 19),
    (0.04, 124),
    (0.10, 342),
    (0.46, 1527),
    (0.13, 416),
];
pub const MATRIX_TOTAL: usize = 3284;

/// Strategy id, published count, published percent.
pub const FREQUENCIES: [(&str, usize, f64); 10] = [
    ("information_probing", 849, 25.8),
    ("informational_interpretation", 548, 16.7),
    ("information_sharing", 430, 13.1),
    ("backchanneling", 318, 9.7),
    ("opinion_sharing", 316, 9.6),
    ("experience_sharing", 247, 7.5),
    ("acknowledgement", 193, 5.9),
    ("echoing", 179, 5.5),
    ("coordinative_instruction", 146, 4.4),
    ("social_utility", 58, 1.8),
];

pub fn frequency_annotations() -> Vec<EslmodAnnotation> {
    let mut out = Vec::new();
    for &(id, n, _) in &FREQUENCIES {
        for _ in 0..n {
            let i = out.len();
            out.push(eslmod(loc("fq", i), id));
        }
    }
    out
}

pub fn speaker(id: &str, role: Role, global_id: Option<&str>) -> Speaker {
    Speaker {
        id: id.to_string(),
        display_name: id.to_uppercase(),
        role,
        native_language: None,
        global_id: global_id.map(str::to_string),
    }
}

/// An utterance of exactly `tokens` whitespace tokens.
pub fn utterance(speaker_id: &str, tokens: usize) -> Utterance {
    let words = vec!["word"; tokens.max(1)].join(" ");
    Utterance::new(speaker_id, vec![format!("{words}.")])
}

/// One moderated segment `g` where participant `p{i}` speaks `tokens[i]` tokens.
pub fn segment_session(tokens: &[usize]) -> Session {
    let mut speakers = vec![speaker("mod", Role::Moderator, None)];
    let mut utterances = vec![utterance("mod", 3)];
    for (i, &t) in tokens.iter().enumerate() {
        let id = format!("p{i}");
        speakers.push(speaker(&id, Role::Participant, None));
        utterances.push(utterance(&id, t));
    }
    Session {
        session_id: "s".into(),
        source: Source::Volunteer,
        topic: "t".into(),
        moderated: true,
        speakers,
        segments: vec![Segment {
            segment_id: "g".into(),
            subtopic_label: None,
            utterances,
        }],
    }
}

pub fn uniform_scores(v: u8) -> Scores {
    Scores {
        overall: v,
        topic_management: v,
        tone_appropriateness: v,
        conversation_opening: v,
        conversation_closing: v,
    }
}

pub fn record(session: &str, segment: Option<&str>, speaker: &str, scores: Scores) -> SpeakerQualityScores {
    SpeakerQualityScores {
        session_id: session.to_string(),
        segment_id: segment.map(str::to_string),
        speaker_id: speaker.to_string(),
        scores,
        rationale: String::new(),
        model_id: "fixture".into(),
        prompt_hash: String::new(),
    }
}

/// Direct substitution into the weighted sum: numerator and denominator
/// accumulated separately, no normalized weights.
pub fn oracle_q(tokens_scores: &[(usize, f64)]) -> f64 {
    let num: f64 = tokens_scores.iter().map(|&(t, q)| t as f64 * q).sum();
    let den: usize = tokens_scores.iter().map(|&(t, _)| t).sum();
    num / den as f64
}

fn gamma_half(n2: u32) -> f64 {
    // Γ(n2 / 2) by the recurrence Γ(x + 1) = x Γ(x)
    let (mut x, mut g) = if n2.is_multiple_of(2) {
        (1.0, 1.0)
    } else {
        (0.5, std::f64::consts::PI.sqrt())
    };
    while x < n2 as f64 / 2.0 - 1e-9 {
        g *= x;
        x += 1.0;
    }
    g
}

/// Student-t density for integer `df`.
pub fn t_pdf(x: f64, df: u32) -> f64 {
    let v = df as f64;
    gamma_half(df + 1) / ((v * std::f64::consts::PI).sqrt() * gamma_half(df)) * (1.0 + x * x / v).powf(-(v + 1.0) / 2.0)
}

/// Two-tailed p from composite Simpson integration of the density on [0, |t|].
pub fn oracle_two_tailed_p(t: f64, df: u32) -> f64 {
    let n = 20_000;
    let h = t.abs() / n as f64;
    let mut s = t_pdf(0.0, df) + t_pdf(t.abs(), df);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * t_pdf(i as f64 * h, df);
    }
    1.0 - 2.0 * s * h / 3.0
}

/// Box-Muller normal draws from a seeded generator.
pub fn normals(rng: &mut impl rand::Rng, n: usize, mean: f64, sd: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            let u2: f64 = rng.random();
            mean + sd * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        })
        .collect()
}
