//! Refinement of prominent WHoW cells into finer strategies.
//!
//! Each cell's annotation reasons are reduced to short intent phrases, filtered
//! by a curated stopword list, embedded, projected to a few dimensions and
//! clustered with k-means for every k in a range. The run whose keywords are
//! most coherent is proposed for human review.

mod coherence;
mod dimred;
mod embed;
mod kmeans;
mod reduce;
mod stopwords;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Location;
use crate::schema::Cell;
use crate::taxonomy::DecisionEntry;
use crate::whow::WhowAnnotation;

pub use coherence::{class_tfidf, keyword_coherence, npmi, score_coherence, top_keywords, windows, Coherence};
pub use dimred::{pca, reduce_dim, ReducerKind, ReducerParams};
pub use embed::{cosine, Embedder, Embeddings, HttpEmbedder, TfEmbedder};
pub use kmeans::{adjusted_rand_index, cluster_kmeans, distinct_points, KMeans, MAX_ITERATIONS};
pub use reduce::{first_sentence, reduce_reason, reduce_reason_with, PhraseExtractor, RuleBased};
pub use stopwords::{curate_stopwords, terms, BASE_STOPWORDS};

pub const MIN_DOCS: usize = 20;
pub const TOP_KEYWORDS: usize = 5;

#[derive(Debug, Error)]
pub enum DiscoveryError {
    #[error("insufficient data for clustering: {got} documents, need {need}")]
    InsufficientData { got: usize, need: usize },
    #[error("too few vectors for reduction: {got}, need {need}")]
    TooFewVectors { got: usize, need: usize },
    #[error("k = {k} exceeds the {distinct} distinct points")]
    TooFewPoints { k: usize, distinct: usize },
    #[error("embedding failed: {0}")]
    Embedding(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("configuration error: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasonDoc {
    pub source_location: Location,
    pub original_reason: String,
    pub reduced_phrase: String,
    pub source_cell: Cell,
    /// Terms of `reduced_phrase` left after stopword filtering.
    pub terms: Vec<String>,
}

/// Reason documents for every annotation listing the cell's motive and act.
pub fn build_docs(
    annotations: &[WhowAnnotation],
    cell: Cell,
    stopwords: &[String],
    provider: Option<&dyn PhraseExtractor>,
) -> Vec<ReasonDoc> {
    let stop: BTreeSet<&str> = stopwords.iter().map(String::as_str).collect();
    annotations
        .iter()
        .filter(|a| a.in_cell(cell))
        .filter_map(|a| {
            let reduced = reduce_reason_with(&a.reason, provider);
            if reduced.trim().is_empty() {
                log::debug!("empty reason at {:?}", a.location);
                return None;
            }
            let terms = terms(&reduced)
                .into_iter()
                .filter(|t| !stop.contains(t.as_str()))
                .collect();
            Some(ReasonDoc {
                source_location: a.location.clone(),
                original_reason: a.reason.clone(),
                reduced_phrase: reduced,
                source_cell: cell,
                terms,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub seeds: Vec<u64>,
    pub reducer: ReducerKind,
    pub reducer_params: ReducerParams,
    pub min_docs: usize,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        DiscoveryConfig {
            k_min: 2,
            k_max: 5,
            seeds: vec![0],
            reducer: ReducerKind::Pca,
            reducer_params: ReducerParams::default(),
            min_docs: MIN_DOCS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRun {
    pub cell: Cell,
    pub k: usize,
    /// Clusters actually formed; below `k` when there are fewer distinct points.
    pub effective_k: usize,
    pub degenerate: bool,
    pub embedder: String,
    pub reducer: ReducerKind,
    pub reducer_params: ReducerParams,
    pub seed: u64,
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// `None` when no cluster has two keywords to compare.
    pub coherence: Option<f64>,
    pub cluster_coherence: Vec<Option<f64>>,
    pub top_keywords: Vec<Vec<String>>,
    pub cluster_sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellDiscovery {
    pub cell: Cell,
    pub docs: Vec<ReasonDoc>,
    /// Index into `runs` of the proposed run.
    pub best: usize,
    pub runs: Vec<ClusterRun>,
}

impl CellDiscovery {
    pub fn best_run(&self) -> &ClusterRun {
        &self.runs[self.best]
    }
}

fn better(candidate: Option<f64>, current: Option<f64>) -> bool {
    match (candidate, current) {
        (Some(c), Some(b)) => c > b + 1e-12,
        (Some(_), None) => true,
        _ => false,
    }
}

/// Clusters the cell's documents for each k and seed; the most coherent run
/// wins, the smallest k on ties.
pub fn propose_subtopics(
    cell: Cell,
    docs: Vec<ReasonDoc>,
    config: &DiscoveryConfig,
    embedder: &dyn Embedder,
) -> Result<CellDiscovery, DiscoveryError> {
    if config.k_min == 0 || config.k_min > config.k_max {
        return Err(DiscoveryError::Config(format!(
            "bad k range {}..={}",
            config.k_min, config.k_max
        )));
    }
    if config.seeds.is_empty() {
        return Err(DiscoveryError::Config("no seeds".into()));
    }
    if docs.len() < config.min_docs {
        return Err(DiscoveryError::InsufficientData {
            got: docs.len(),
            need: config.min_docs,
        });
    }
    let texts: Vec<String> = docs.iter().map(|d| d.terms.join(" ")).collect();
    let embedded = embedder.embed(&texts)?;
    if !embedded.empty.is_empty() {
        log::debug!(
            "{}: {} documents have no terms after filtering",
            cell.key(),
            embedded.empty.len()
        );
    }
    let reduced = reduce_dim(&embedded.vectors, &config.reducer_params, config.reducer)?;
    let distinct = distinct_points(&reduced);
    let term_docs: Vec<Vec<String>> = docs.iter().map(|d| d.terms.clone()).collect();

    let mut runs: Vec<ClusterRun> = Vec::new();
    let mut best = 0;
    for k in config.k_min..=config.k_max {
        for &seed in &config.seeds {
            let effective_k = k.min(distinct);
            let km = cluster_kmeans(&reduced, effective_k, seed)?;
            let n_clusters = km.centroids.len();
            let coherence = score_coherence(&term_docs, &km.assignments);
            let mut sizes = vec![0usize; n_clusters];
            for &a in &km.assignments {
                sizes[a] += 1;
            }
            let run = ClusterRun {
                cell,
                k,
                effective_k: n_clusters,
                degenerate: n_clusters < k,
                embedder: embedder.name(),
                reducer: config.reducer,
                reducer_params: config.reducer_params,
                seed,
                top_keywords: top_keywords(&term_docs, &km.assignments, n_clusters, TOP_KEYWORDS),
                assignments: km.assignments,
                centroids: km.centroids,
                coherence: coherence.score,
                cluster_coherence: coherence.per_cluster,
                cluster_sizes: sizes,
            };
            if runs.is_empty() || better(run.coherence, runs[best].coherence) {
                best = runs.len();
            }
            runs.push(run);
        }
    }
    Ok(CellDiscovery { cell, docs, best, runs })
}

/// One row per cluster of each proposed run, with decisions when available.
pub fn runs_to_csv(discoveries: &[CellDiscovery], decisions: &[DecisionEntry]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "cell",
        "hyper_parameters",
        "coherence",
        "cluster",
        "keywords",
        "size",
        "decision",
        "refined_label",
    ])
    .expect("in-memory csv");
    for d in discoveries {
        let run = d.best_run();
        let params = format!(
            "k={} reducer={:?} n_neighbors={} min_dist={} target_dim={} seed={}",
            run.k,
            run.reducer,
            run.reducer_params.n_neighbors,
            run.reducer_params.min_dist,
            run.reducer_params.target_dim,
            run.seed
        )
        .to_lowercase();
        let coherence = run
            .coherence
            .map_or_else(|| "undefined".to_string(), |c| format!("{c:.3}"));
        for (i, size) in run.cluster_sizes.iter().enumerate() {
            let decision = decisions
                .iter()
                .find(|e| Cell::parse_key(&e.cell) == Some(run.cell) && e.cluster_index == Some(i));
            w.write_record([
                run.cell.key(),
                params.clone(),
                coherence.clone(),
                i.to_string(),
                run.top_keywords[i].join(", "),
                size.to_string(),
                decision.map(|e| e.decision.to_string()).unwrap_or_default(),
                decision.map(|e| e.label.clone()).unwrap_or_default(),
            ])
            .expect("in-memory csv");
        }
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}
