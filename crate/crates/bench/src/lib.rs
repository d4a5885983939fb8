//! Synthetic inputs shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use modlab_core::effects::SegmentQuality;
use modlab_core::{DialogueAct, EslmodAnnotation, Location, Motive, SchemaTag, WhowAnnotation};

fn location(i: usize) -> Location {
    Location {
        session_id: format!("s{}", i / 400),
        segment_id: format!("g{}", i / 20),
        utterance_idx: i % 20,
        sentence_idx: 0,
    }
}

pub fn whow_annotations(n: usize, seed: u64) -> Vec<WhowAnnotation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let n_motives = rng.random_range(0..=2);
            let motives = (0..n_motives).map(|_| Motive::ALL[rng.random_range(0..3)]).collect();
            WhowAnnotation {
                location: location(i),
                schema: SchemaTag::Whow,
                motives,
                dialogue_act: DialogueAct::ALL[rng.random_range(0..6)],
                target_speaker: "Everyone".into(),
                reason: "The moderator asks a follow-up question.".into(),
                model_id: "bench".into(),
                prompt_hash: String::new(),
            }
        })
        .collect()
}

pub fn eslmod_annotations(n: usize, strategies: &[&str], seed: u64) -> Vec<EslmodAnnotation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| EslmodAnnotation {
            location: location(i),
            schema: SchemaTag::Eslmod,
            strategy: strategies[rng.random_range(0..strategies.len())].to_string(),
            target_speaker: "Everyone".into(),
            reason: String::new(),
            model_id: "bench".into(),
            prompt_hash: String::new(),
        })
        .collect()
}

/// One quality value per segment id produced by [`eslmod_annotations`].
pub fn segment_qualities(n_annotations: usize, seed: u64) -> Vec<SegmentQuality> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_annotations.div_ceil(20))
        .map(|g| SegmentQuality {
            session_id: format!("s{}", g / 20),
            segment_id: format!("g{g}"),
            q: rng.random_range(1.0..5.0),
            contributors: Vec::new(),
        })
        .collect()
}

/// Points around `k` separated centres in `dim` dimensions.
pub fn blobs(n: usize, k: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let c = (i % k) as f64 * 10.0;
            (0..dim)
                .map(|d| if d == 0 { c } else { 0.0 } + rng.random_range(-1.0..1.0))
                .collect()
        })
        .collect()
}

pub fn samples(n: usize, shift: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| shift + rng.random_range(-1.0..1.0)).collect()
}
