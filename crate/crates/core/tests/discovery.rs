mod common;

use modlab_core::discovery::{
    build_docs, curate_stopwords, propose_subtopics, DiscoveryConfig, TfEmbedder, BASE_STOPWORDS,
};
use modlab_core::fixtures::sample_corpus;
use modlab_core::schema::Cell;
use modlab_core::taxonomy::{default_decisions, finalize_taxonomy};
use modlab_core::{DialogueAct, Motive, WhowAnnotation};

use common::{loc, whow};

const NAMES: [&str; 4] = ["Andrew", "Christine", "Mei", "Kenji"];

type Themes = Vec<(&'static str, usize)>;

/// Themes per prominent cell with their sizes, largest first.
fn themes() -> Vec<(Motive, DialogueAct, Themes)> {
    vec![
        (
            Motive::Informational,
            DialogueAct::Probing,
            vec![
                ("The moderator asks {} a question about personal views.", 574),
                ("The moderator requests clarification from {} regarding details.", 221),
                ("The moderator checks whether {} understood vocabulary.", 70),
            ],
        ),
        (
            Motive::Informational,
            DialogueAct::Supplement,
            vec![
                ("The moderator offers an opinion agreeing with {}.", 823),
                ("The moderator provides factual background after {} spoke.", 292),
                ("The moderator repeats the words of {} to confirm.", 82),
            ],
        ),
        (
            Motive::Social,
            DialogueAct::Supplement,
            vec![
                ("The moderator tells a story from life to relate with {}.", 213),
                ("The moderator thanks {} warmly.", 74),
                ("The moderator praises the answer given by {}.", 52),
                ("The moderator mirrors feelings expressed by {} sympathetically.", 50),
            ],
        ),
        (
            Motive::Social,
            DialogueAct::Utility,
            vec![
                ("The moderator says okay to {} briefly.", 249),
                ("The moderator greets {} at the start.", 73),
            ],
        ),
    ]
}

fn annotations() -> Vec<WhowAnnotation> {
    let mut out = Vec::new();
    for (motive, act, groups) in themes() {
        for (template, n) in groups {
            for i in 0..n {
                let reason = template.replace("{}", NAMES[i % NAMES.len()]);
                out.push(whow(loc("themes", out.len()), &[motive], act, &reason));
            }
        }
    }
    out
}

#[test]
fn themed_cells_recover_sizes_and_build_the_default_registry() {
    let corpus = sample_corpus();
    let stopwords = curate_stopwords(&corpus, BASE_STOPWORDS);
    let ann = annotations();
    let mut runs = Vec::new();
    for (motive, act, groups) in themes() {
        let cell = Cell::new(motive, act);
        let k = groups.len();
        let docs = build_docs(&ann, cell, &stopwords, None);
        let config = DiscoveryConfig {
            k_min: k,
            k_max: k,
            ..DiscoveryConfig::default()
        };
        let d = propose_subtopics(cell, docs, &config, &TfEmbedder).unwrap();
        let run = d.best_run().clone();
        let expected: Vec<usize> = groups.iter().map(|&(_, n)| n).collect();
        assert_eq!(run.cluster_sizes, expected, "{cell}");
        assert!(!run.degenerate, "{cell}");
        runs.push(run);
    }
    let taxonomy = finalize_taxonomy(&runs, &default_decisions()).unwrap();
    assert_eq!(taxonomy.registry.len(), 10);
}

#[test]
fn the_best_run_over_a_k_range_prefers_the_true_theme_count() {
    let corpus = sample_corpus();
    let stopwords = curate_stopwords(&corpus, BASE_STOPWORDS);
    let ann = annotations();
    let cell = Cell::new(Motive::Social, DialogueAct::Utility);
    let docs = build_docs(&ann, cell, &stopwords, None);
    let d = propose_subtopics(cell, docs, &DiscoveryConfig::default(), &TfEmbedder).unwrap();
    // two distinct points: larger k collapse to two clusters and are flagged
    assert_eq!(d.best_run().k, 2);
    assert!(d
        .runs
        .iter()
        .filter(|r| r.k > 2)
        .all(|r| r.degenerate && r.effective_k == 2));
}
