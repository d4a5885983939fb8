use std::collections::{BTreeMap, BTreeSet};

pub const COHERENCE_KEYWORDS: usize = 10;
pub const WINDOW: usize = 10;

/// Per-cluster terms ranked by tf × ln(N_clusters / clusters containing term);
/// ties by higher tf, then alphabetically.
pub fn class_tfidf(docs: &[Vec<String>], assignments: &[usize], n_clusters: usize) -> Vec<Vec<(String, f64)>> {
    let mut tf: Vec<BTreeMap<&str, usize>> = vec![BTreeMap::new(); n_clusters];
    for (doc, &c) in docs.iter().zip(assignments) {
        for w in doc {
            *tf[c].entry(w.as_str()).or_default() += 1;
        }
    }
    let mut cf: BTreeMap<&str, usize> = BTreeMap::new();
    for cluster in &tf {
        for w in cluster.keys() {
            *cf.entry(w).or_default() += 1;
        }
    }
    tf.iter()
        .map(|cluster| {
            let mut scored: Vec<(&str, usize, f64)> = cluster
                .iter()
                .map(|(&w, &n)| (w, n, n as f64 * (n_clusters as f64 / cf[w] as f64).ln()))
                .collect();
            scored.sort_by(|a, b| b.2.total_cmp(&a.2).then(b.1.cmp(&a.1)).then(a.0.cmp(b.0)));
            scored.into_iter().map(|(w, _, s)| (w.to_string(), s)).collect()
        })
        .collect()
}

pub fn top_keywords(docs: &[Vec<String>], assignments: &[usize], n_clusters: usize, n: usize) -> Vec<Vec<String>> {
    class_tfidf(docs, assignments, n_clusters)
        .into_iter()
        .map(|c| c.into_iter().take(n).map(|(w, _)| w).collect())
        .collect()
}

/// Token sets of sliding windows; a document shorter than the window is one window.
pub fn windows(docs: &[Vec<String>], size: usize) -> Vec<BTreeSet<&str>> {
    let mut out = Vec::new();
    for doc in docs.iter().filter(|d| !d.is_empty()) {
        if doc.len() <= size {
            out.push(doc.iter().map(String::as_str).collect());
        } else {
            for start in 0..=doc.len() - size {
                out.push(doc[start..start + size].iter().map(String::as_str).collect());
            }
        }
    }
    out
}

pub fn npmi(windows: &[BTreeSet<&str>], a: &str, b: &str) -> f64 {
    let n = windows.len() as f64;
    let (mut ca, mut cb, mut cab) = (0usize, 0usize, 0usize);
    for w in windows {
        let (ha, hb) = (w.contains(a), w.contains(b));
        ca += ha as usize;
        cb += hb as usize;
        cab += (ha && hb) as usize;
    }
    if cab == 0 {
        return -1.0;
    }
    let pab = cab as f64 / n;
    if pab >= 1.0 {
        return 1.0;
    }
    let pa = ca as f64 / n;
    let pb = cb as f64 / n;
    (pab / (pa * pb)).ln() / -pab.ln()
}

/// Mean pairwise NPMI of the keywords; `None` with fewer than two keywords.
pub fn keyword_coherence(windows: &[BTreeSet<&str>], keywords: &[String]) -> Option<f64> {
    if keywords.len() < 2 || windows.is_empty() {
        return None;
    }
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..keywords.len() {
        for j in i + 1..keywords.len() {
            sum += npmi(windows, &keywords[i], &keywords[j]);
            pairs += 1;
        }
    }
    Some(sum / pairs as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coherence {
    pub per_cluster: Vec<Option<f64>>,
    /// Size-weighted mean over clusters with a defined score.
    pub score: Option<f64>,
}

/// NPMI coherence of each cluster's top keywords, counted over all `docs`.
pub fn score_coherence(docs: &[Vec<String>], assignments: &[usize]) -> Coherence {
    let n_clusters = assignments.iter().max().map_or(0, |m| m + 1);
    let keywords = top_keywords(docs, assignments, n_clusters, COHERENCE_KEYWORDS);
    let wins = windows(docs, WINDOW);
    let mut sizes = vec![0usize; n_clusters];
    for &a in assignments {
        sizes[a] += 1;
    }
    let per_cluster: Vec<Option<f64>> = keywords.iter().map(|k| keyword_coherence(&wins, k)).collect();
    let (mut num, mut den) = (0.0, 0usize);
    for (c, s) in per_cluster.iter().enumerate() {
        if let Some(s) = s {
            num += s * sizes[c] as f64;
            den += sizes[c];
        }
    }
    Coherence {
        per_cluster,
        score: (den > 0).then(|| num / den as f64),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn copies_are_fully_coherent() {
        let docs = vec![d("share opinion view"); 4];
        let c = score_coherence(&docs, &[0, 0, 0, 0]);
        assert!((c.score.unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn disjoint_keywords_score_negative() {
        // p(a)=p(b)=1/2, never together: npmi = -1
        let docs = vec![d("alpha"), d("beta")];
        let c = score_coherence(&docs, &[0, 0]);
        assert_eq!(c.score, Some(-1.0));
    }

    #[test]
    fn hand_computed_npmi() {
        // windows: {a,b} {a} {c} {b,c}; p(a)=.5 p(b)=.5 p(ab)=.25 → npmi 0
        let docs = vec![d("a1 b1"), d("a1"), d("c1"), d("b1 c1")];
        let w = windows(&docs, 10);
        assert!(npmi(&w, "a1", "b1").abs() < 1e-12);
    }

    #[test]
    fn single_token_vocabulary_is_undefined() {
        let c = score_coherence(&[d("hi"), d("hi")], &[0, 0]);
        assert_eq!(c.score, None);
    }

    #[test]
    fn ctfidf_prefers_distinctive_terms() {
        let docs = vec![d("share opinion share"), d("share time manage")];
        let k = top_keywords(&docs, &[0, 1], 2, 5);
        assert_eq!(k[0][0], "opinion");
        assert_eq!(k[1][0], "manage");
        assert_eq!(k[0].last().unwrap(), "share");
    }

    #[test]
    fn sliding_window_count() {
        let doc = vec![(0..12).map(|i| format!("w{i}")).collect::<Vec<_>>()];
        assert_eq!(windows(&doc, 10).len(), 3);
    }
}
