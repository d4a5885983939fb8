mod common;

use std::collections::BTreeSet;
use std::path::Path;

use proptest::prelude::*;

use modlab_core::effects::{krippendorff_alpha, segment_quality, welch_t, Metric, Tails};
use modlab_core::gateway::parse::{parse_annotation_response, EslmodLabels, ParsedResponse, QualityScores, WhowLabels};
use modlab_core::quality::Scores;
use modlab_core::schema::Cell;
use modlab_core::whow::{joint_matrix, select_prominent, MotiveCounting};
use modlab_core::{
    Corpus, DialogueAct, Gateway, Motive, PromptRequest, SchemaTag, Segment, Session, Source, TaxonomyRegistry,
    Utterance,
};

use common::*;

fn motive() -> impl Strategy<Value = Motive> {
    prop::sample::select(Motive::ALL.to_vec())
}

fn act() -> impl Strategy<Value = DialogueAct> {
    prop::sample::select(DialogueAct::ALL.to_vec())
}

fn motive_set() -> impl Strategy<Value = Vec<Motive>> {
    prop::collection::vec(motive(), 1..=3).prop_map(|mut v| {
        let mut seen = BTreeSet::new();
        v.retain(|m| seen.insert(*m));
        v
    })
}

fn labels() -> impl Strategy<Value = Vec<(Vec<Motive>, DialogueAct)>> {
    prop::collection::vec((motive_set(), act()), 1..200)
}

fn annotate(rows: &[(Vec<Motive>, DialogueAct)]) -> Vec<modlab_core::WhowAnnotation> {
    rows.iter()
        .enumerate()
        .map(|(i, (m, a))| whow(loc("p", i), m, *a, "The moderator responds."))
        .collect()
}

fn score() -> impl Strategy<Value = u8> {
    1u8..=5
}

fn scores() -> impl Strategy<Value = Scores> {
    (score(), score(), score(), score(), score()).prop_map(|(a, b, c, d, e)| Scores {
        overall: a,
        topic_management: b,
        tone_appropriateness: c,
        conversation_opening: d,
        conversation_closing: e,
    })
}

fn sample(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0f64..50.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn joint_matrix_ignores_order(rows in labels(), seed in any::<u64>()) {
        let ann = annotate(&rows);
        let mut shuffled = ann.clone();
        let n = shuffled.len();
        // Fisher-Yates driven by a splitmix sequence
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let j = ((s ^ (s >> 31)).wrapping_mul(0xBF58_476D_1CE4_E5B9) % (i as u64 + 1)) as usize;
            shuffled.swap(i, j);
        }
        for counting in [MotiveCounting::AllListed, MotiveCounting::FirstListed] {
            prop_assert_eq!(joint_matrix(&ann, counting).unwrap(), joint_matrix(&shuffled, counting).unwrap());
        }
    }

    #[test]
    fn first_listed_probabilities_sum_to_one(rows in labels()) {
        let m = joint_matrix(&annotate(&rows), MotiveCounting::FirstListed).unwrap();
        let sum: f64 = Cell::all().map(|c| m.probability(c)).sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
        let all = joint_matrix(&annotate(&rows), MotiveCounting::AllListed).unwrap();
        let cells: usize = Cell::all().map(|c| all.count(c)).sum();
        prop_assert!(cells >= all.total);
        prop_assert_eq!(all.total, rows.len());
    }

    #[test]
    fn partition_is_exhaustive_and_follows_thresholds(rows in labels(), low in 0.0f64..0.5, gap in 0.001f64..0.5) {
        let m = joint_matrix(&annotate(&rows), MotiveCounting::AllListed).unwrap();
        let high = low + gap;
        let p = select_prominent(&m, low, high).unwrap();
        prop_assert_eq!(p.expand.len() + p.keep.len() + p.drop.len(), 18);
        for c in Cell::all() {
            let pr = m.probability(c);
            let expected = if pr < low { &p.drop } else if pr >= high { &p.expand } else { &p.keep };
            prop_assert!(expected.contains(&c));
        }
    }

    #[test]
    fn segment_quality_matches_oracle_and_stays_in_range(
        speakers in prop::collection::vec((1usize..300, score()), 1..10)
    ) {
        let tokens: Vec<usize> = speakers.iter().map(|s| s.0).collect();
        let session = segment_session(&tokens);
        let records: Vec<_> = speakers
            .iter()
            .enumerate()
            .map(|(i, &(_, v))| record("s", Some("g"), &format!("p{i}"), uniform_scores(v)))
            .collect();
        let q = segment_quality(&session, "g", &records, Metric::Overall).unwrap().q;
        let oracle = oracle_q(&speakers.iter().map(|&(t, v)| (t, v as f64)).collect::<Vec<_>>());
        prop_assert!((q - oracle).abs() < 1e-9);
        let lo = speakers.iter().map(|s| s.1).min().unwrap() as f64;
        let hi = speakers.iter().map(|s| s.1).max().unwrap() as f64;
        prop_assert!(lo - 1e-12 <= q && q <= hi + 1e-12);
    }

    #[test]
    fn welch_is_antisymmetric(a in sample(2..30), b in sample(2..30)) {
        prop_assume!(welch_t(&a, &b, Tails::Two).is_ok());
        let ab = welch_t(&a, &b, Tails::Two).unwrap();
        let ba = welch_t(&b, &a, Tails::Two).unwrap();
        prop_assert!((ab.t + ba.t).abs() < 1e-9 * (1.0 + ab.t.abs()));
        prop_assert!((ab.p - ba.p).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&ab.p));
        let one = welch_t(&a, &b, Tails::One).unwrap().p + welch_t(&b, &a, Tails::One).unwrap().p;
        prop_assert!((one - 1.0).abs() < 1e-9);
    }

    #[test]
    fn alpha_ignores_label_names_and_unit_order(
        units in prop::collection::vec(prop::collection::vec(prop::option::weighted(0.9, 0u8..4), 2..4), 5..60)
    ) {
        prop_assume!(krippendorff_alpha(&units).is_ok());
        let a = krippendorff_alpha(&units).unwrap();
        let renamed: Vec<Vec<Option<String>>> = units
            .iter()
            .map(|u| u.iter().map(|l| l.map(|x| format!("label-{}", 3 - x))).collect())
            .collect();
        let mut reversed = units.clone();
        reversed.reverse();
        let b = krippendorff_alpha(&renamed).unwrap();
        let c = krippendorff_alpha(&reversed).unwrap();
        prop_assert!((a - b).abs() < 1e-12 || (a.is_nan() && b.is_nan()));
        prop_assert!((a - c).abs() < 1e-12 || (a.is_nan() && c.is_nan()));
        prop_assert!(a <= 1.0 + 1e-12);
    }

    #[test]
    fn whow_answers_round_trip(motives in motive_set(), a in act(), target in "[A-Z][a-z]{1,8}", reason in "\\PC{0,80}") {
        let labels = WhowLabels { motives, dialogue_act: a, target_speaker: target, reason };
        let parsed = parse_annotation_response(&labels.to_response_json(), SchemaTag::Whow).unwrap();
        prop_assert_eq!(parsed, ParsedResponse::Whow(labels));
    }

    #[test]
    fn eslmod_and_quality_answers_round_trip(i in 0usize..10, s in scores(), reason in "\\PC{0,80}") {
        let reg = TaxonomyRegistry::default_registry();
        let labels = EslmodLabels {
            strategy: reg.strategies[i].id.clone(),
            target_speaker: "Everyone".into(),
            reason: reason.clone(),
        };
        let parsed = parse_annotation_response(&labels.to_response_json(&reg), SchemaTag::Eslmod).unwrap();
        prop_assert_eq!(parsed, ParsedResponse::Eslmod(labels));
        let q = QualityScores { scores: s, rationale: reason };
        let parsed = parse_annotation_response(&q.to_response_json(), SchemaTag::Quality).unwrap();
        prop_assert_eq!(parsed, ParsedResponse::Quality(q));
    }

    #[test]
    fn mock_answers_always_parse(prompt in "\\PC{1,300}", seed in any::<u64>()) {
        prop_assume!(!prompt.trim().is_empty());
        let gateway = Gateway::mock(seed, None);
        for tag in [SchemaTag::Whow, SchemaTag::Eslmod, SchemaTag::Quality] {
            let req = PromptRequest::new(prompt.clone(), "m", tag);
            let raw = gateway.complete(&req).unwrap();
            prop_assert_eq!(&raw, &Gateway::mock(seed, None).complete(&req).unwrap());
            prop_assert!(parse_annotation_response(&raw, tag).is_ok(), "{}", raw);
        }
    }

    #[test]
    fn cache_keys_separate_fields(model in "[a-z0-9-]{1,12}", prompt in "\\PC{1,60}", cut in 0usize..60) {
        let req = PromptRequest::new(prompt.clone(), model.clone(), SchemaTag::Whow);
        let key = req.cache_key();
        prop_assert_eq!(key.len(), 64);
        prop_assert!(key.chars().all(|c| c.is_ascii_hexdigit()));
        prop_assert_eq!(&key, &req.clone().cache_key());
        // moving characters across the model/prompt boundary changes the key
        let chars: Vec<char> = prompt.chars().collect();
        let cut = cut % chars.len();
        if cut > 0 {
            let moved_model = format!("{model}{}", chars[..cut].iter().collect::<String>());
            let moved_prompt: String = chars[cut..].iter().collect();
            let other = PromptRequest::new(moved_prompt, moved_model, SchemaTag::Whow);
            prop_assert_ne!(other.cache_key(), key.clone());
        }
        let mut hotter = req.clone();
        hotter.decoding.temperature = 0.5;
        prop_assert_ne!(hotter.cache_key(), key);
    }

    #[test]
    fn corpus_survives_a_json_round_trip(
        segs in prop::collection::vec(prop::collection::vec((0usize..3, "[a-z]{1,6}( [a-z]{1,6}){0,5}\\."), 1..6), 1..4)
    ) {
        let ids = ["m", "p1", "p2"];
        let session = Session {
            session_id: "rt".into(),
            source: Source::Club,
            topic: "Travel".into(),
            moderated: true,
            speakers: vec![
                speaker("m", modlab_core::Role::Moderator, None),
                speaker("p1", modlab_core::Role::Participant, Some("g-1")),
                speaker("p2", modlab_core::Role::Participant, None),
            ],
            segments: segs
                .iter()
                .enumerate()
                .map(|(i, us)| Segment {
                    segment_id: format!("s{i}"),
                    subtopic_label: None,
                    utterances: std::iter::once(Utterance::new("m", vec!["Hello.".into()]))
                        .chain(us.iter().map(|(who, text)| Utterance::new(ids[*who], vec![text.clone()])))
                        .collect(),
                })
                .collect(),
        };
        let corpus = Corpus::new(vec![session]);
        let back = Corpus::from_json(&corpus.to_json(), Path::new("roundtrip.json")).unwrap();
        prop_assert_eq!(back, corpus);
    }
}
