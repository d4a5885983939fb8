//! File-based stages and the run manifest.
//!
//! Every stage reads its inputs from the output directory (or the configured
//! corpus paths), writes its outputs there and records both sets of hashes in
//! `run_manifest.json`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{corpus_stats, load_corpus, Corpus, CorpusError};
use crate::discovery::{
    build_docs, curate_stopwords, propose_subtopics, runs_to_csv, CellDiscovery, ClusterRun, DiscoveryConfig,
    DiscoveryError, TfEmbedder, BASE_STOPWORDS,
};
use crate::effects::{
    compare_conditions, krippendorff_alpha, ratings_from_csv, segment_qualities, strategy_effects,
    strategy_frequencies, Comparison, FrequencyRow, Metric, Pairing, SegmentQuality, StrategyEffect, TestKind,
};
use crate::eslmod::{annotate_eslmod, EslmodAnnotation, EslmodError};
use crate::gateway::{BackendKind, Gateway, GatewayError, DEFAULT_MODEL};
use crate::prompts::{ContextWindow, DEFAULT_TRANSCRIPT_BUDGET};
use crate::quality::{score_all, Granularity, QualityError, SpeakerQualityScores};
use crate::report::{render_report, ReportInputs};
use crate::sidecar::{read_jsonl, write_jsonl, AnnotationFailure, SidecarError};
use crate::taxonomy::{build, default_decisions, finalize_taxonomy, parse_decisions, TaxonomyRegistry};
use crate::whow::{
    annotate_whow, joint_matrix, select_prominent, MotiveCounting, WhowAnnotation, WhowError, DEFAULT_HIGH, DEFAULT_LOW,
};

pub const MANIFEST: &str = "run_manifest.json";
pub const CORPUS_FILE: &str = "corpus.json";
pub const STATS_FILE: &str = "stats.csv";
pub const WHOW_FILE: &str = "whow.jsonl";
pub const WHOW_FAILURES: &str = "whow_failures.jsonl";
pub const DISCOVERY_DIR: &str = "discovery";
pub const DISCOVERY_SUMMARY: &str = "discovery/summary.json";
pub const TAXONOMY_FILE: &str = "taxonomy.json";
pub const ESLMOD_FILE: &str = "eslmod.jsonl";
pub const ESLMOD_FAILURES: &str = "eslmod_failures.jsonl";
pub const QUALITY_FILE: &str = "quality.jsonl";
pub const QUALITY_FAILURES: &str = "quality_failures.jsonl";
pub const ANALYSIS_FILE: &str = "analysis.json";
pub const REPORT_FILE: &str = "report.md";
pub const TABLES_DIR: &str = "tables";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("missing {file}; run `{stage}` first")]
    MissingPrerequisite { stage: Stage, file: String },
    #[error("backend failure: {0}")]
    Backend(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Validation(_) | PipelineError::Io { .. } => 1,
            PipelineError::MissingPrerequisite { .. } => 2,
            PipelineError::Backend(_) => 3,
        }
    }
}

impl From<CorpusError> for PipelineError {
    fn from(e: CorpusError) -> Self {
        PipelineError::Validation(e.to_string())
    }
}

impl From<SidecarError> for PipelineError {
    fn from(e: SidecarError) -> Self {
        match e {
            SidecarError::Io { path, source } => PipelineError::Io { path, source },
            other => PipelineError::Validation(other.to_string()),
        }
    }
}

impl From<GatewayError> for PipelineError {
    fn from(e: GatewayError) -> Self {
        match e {
            GatewayError::InvalidRequest(m) => PipelineError::Validation(m),
            other => PipelineError::Backend(other.to_string()),
        }
    }
}

impl From<WhowError> for PipelineError {
    fn from(e: WhowError) -> Self {
        match e {
            WhowError::Gateway(g) => g.into(),
            other => PipelineError::Validation(other.to_string()),
        }
    }
}

impl From<EslmodError> for PipelineError {
    fn from(e: EslmodError) -> Self {
        match e {
            EslmodError::Gateway(g) => g.into(),
            other => PipelineError::Validation(other.to_string()),
        }
    }
}

impl From<QualityError> for PipelineError {
    fn from(e: QualityError) -> Self {
        match e {
            QualityError::Gateway(g) => g.into(),
            other => PipelineError::Validation(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Ingest,
    AnnotateWhow,
    Discover,
    BuildTaxonomy,
    AnnotateEslmod,
    ScoreQuality,
    Analyze,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Ingest,
        Stage::AnnotateWhow,
        Stage::Discover,
        Stage::BuildTaxonomy,
        Stage::AnnotateEslmod,
        Stage::ScoreQuality,
        Stage::Analyze,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::AnnotateWhow => "annotate-whow",
            Stage::Discover => "discover",
            Stage::BuildTaxonomy => "build-taxonomy",
            Stage::AnnotateEslmod => "annotate-eslmod",
            Stage::ScoreQuality => "score-quality",
            Stage::Analyze => "analyze",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub corpus: Vec<PathBuf>,
    /// Defaults to `<out>/cache`.
    pub cache_dir: Option<PathBuf>,
    pub backend: BackendKind,
    pub model: String,
    pub seed: u64,
    pub k_min: usize,
    pub k_max: usize,
    pub threshold_low: f64,
    pub threshold_high: f64,
    pub granularity: Granularity,
    pub decisions: Option<PathBuf>,
    pub out: PathBuf,
    pub in_flight: usize,
    pub motive_counting: MotiveCounting,
    pub test: TestKind,
    /// `unit,rater,label` CSV for agreement.
    pub ratings: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus: Vec::new(),
            cache_dir: None,
            backend: BackendKind::Mock,
            model: DEFAULT_MODEL.to_string(),
            seed: 0,
            k_min: 2,
            k_max: 5,
            threshold_low: DEFAULT_LOW,
            threshold_high: DEFAULT_HIGH,
            granularity: Granularity::Segment,
            decisions: None,
            out: PathBuf::from("out"),
            in_flight: 4,
            motive_counting: MotiveCounting::AllListed,
            test: TestKind::Welch,
            ratings: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.threshold_low.partial_cmp(&self.threshold_high) != Some(std::cmp::Ordering::Less) {
            return Err(PipelineError::Validation(format!(
                "threshold low {} must be below high {}",
                self.threshold_low, self.threshold_high
            )));
        }
        if !(2 <= self.k_min && self.k_min <= self.k_max && self.k_max <= 5) {
            return Err(PipelineError::Validation(format!(
                "k range {}..={} must lie within 2..=5",
                self.k_min, self.k_max
            )));
        }
        if self.in_flight == 0 {
            return Err(PipelineError::Validation("in_flight must be at least 1".into()));
        }
        if self.model.trim().is_empty() {
            return Err(PipelineError::Validation("model must not be empty".into()));
        }
        Ok(())
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(|| self.out.join("cache"))
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    /// Settings that affect outputs; paths of the run itself are left out.
    fn fingerprint(&self) -> BTreeMap<&'static str, String> {
        BTreeMap::from([
            ("backend", self.backend.to_string()),
            ("model", self.model.clone()),
            ("seed", self.seed.to_string()),
            ("k_range", format!("{}..={}", self.k_min, self.k_max)),
            ("thresholds", format!("{}/{}", self.threshold_low, self.threshold_high)),
            ("granularity", serde_name(&self.granularity)),
            ("motive_counting", serde_name(&self.motive_counting)),
            ("test", serde_name(&self.test)),
        ])
    }
}

fn serde_name<T: Serialize>(value: &T) -> String {
    match serde_json::to_value(value) {
        Ok(serde_json::Value::String(s)) => s,
        other => format!("{other:?}"),
    }
}

pub fn make_gateway(config: &RunConfig) -> Result<Gateway, PipelineError> {
    let cache = config.cache_dir();
    let gw = match config.backend {
        BackendKind::Mock => Gateway::mock(config.seed, Some(cache)),
        BackendKind::Replay => {
            if !cache.is_dir() {
                return Err(PipelineError::MissingPrerequisite {
                    stage: Stage::AnnotateWhow,
                    file: format!("response cache {}", cache.display()),
                });
            }
            Gateway::replay(cache)
        }
        BackendKind::Live => Gateway::live_from_env(cache)?,
    };
    Ok(gw.with_in_flight(config.in_flight))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: BTreeMap<String, String>,
    pub stages: BTreeMap<Stage, StageRecord>,
}

pub fn sha256_file(path: &Path) -> Result<String, PipelineError> {
    let bytes = fs::read(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn read_manifest(out: &Path) -> Result<Manifest, PipelineError> {
    let path = out.join(MANIFEST);
    match fs::read_to_string(&path) {
        Ok(text) => {
            serde_json::from_str(&text).map_err(|e| PipelineError::Validation(format!("{}: {e}", path.display())))
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Manifest::default()),
        Err(source) => Err(PipelineError::Io { path, source }),
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), PipelineError> {
    let io = |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io)?;
    }
    fs::write(path, contents).map_err(io)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    write_file(path, text)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    let text = fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Validation(format!("{}: {e}", path.display())))
}

/// Tracks files a stage reads and writes, relative to the output directory.
struct Ledger<'a> {
    config: &'a RunConfig,
    stage: Stage,
    record: StageRecord,
}

impl<'a> Ledger<'a> {
    fn new(config: &'a RunConfig, stage: Stage) -> Self {
        Ledger {
            config,
            stage,
            record: StageRecord::default(),
        }
    }

    /// Fails with the producing stage when `rel` is missing.
    fn require(&mut self, rel: &str, producer: Stage) -> Result<PathBuf, PipelineError> {
        let path = self.config.path(rel);
        if !path.exists() {
            return Err(PipelineError::MissingPrerequisite {
                stage: producer,
                file: rel.to_string(),
            });
        }
        self.record.inputs.insert(rel.to_string(), sha256_file(&path)?);
        Ok(path)
    }

    fn optional(&mut self, rel: &str) -> Result<Option<PathBuf>, PipelineError> {
        let path = self.config.path(rel);
        if !path.exists() {
            return Ok(None);
        }
        self.record.inputs.insert(rel.to_string(), sha256_file(&path)?);
        Ok(Some(path))
    }

    fn external(&mut self, label: String, path: &Path) -> Result<(), PipelineError> {
        self.record.inputs.insert(label, sha256_file(path)?);
        Ok(())
    }

    fn output(&mut self, rel: &str) -> Result<(), PipelineError> {
        let hash = sha256_file(&self.config.path(rel))?;
        self.record.outputs.insert(rel.to_string(), hash);
        Ok(())
    }

    fn commit(self) -> Result<(), PipelineError> {
        let mut manifest = read_manifest(&self.config.out)?;
        manifest.config = self
            .config
            .fingerprint()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        manifest.stages.insert(self.stage, self.record);
        write_json(&self.config.out.join(MANIFEST), &manifest)
    }
}

fn load_stage_corpus(ledger: &mut Ledger<'_>) -> Result<Corpus, PipelineError> {
    let path = ledger.require(CORPUS_FILE, Stage::Ingest)?;
    let text = fs::read_to_string(&path).map_err(|source| PipelineError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(Corpus::from_json(&text, &path)?)
}

pub fn ingest(config: &RunConfig) -> Result<Corpus, PipelineError> {
    let mut ledger = Ledger::new(config, Stage::Ingest);
    if config.corpus.is_empty() {
        return Err(PipelineError::Validation("no corpus paths given".into()));
    }
    let corpus = load_corpus(&config.corpus)?;
    for p in &config.corpus {
        let mut files = Vec::new();
        if p.is_dir() {
            for entry in fs::read_dir(p).map_err(|source| PipelineError::Io {
                path: p.clone(),
                source,
            })? {
                let path = entry
                    .map_err(|source| PipelineError::Io {
                        path: p.clone(),
                        source,
                    })?
                    .path();
                if path.extension().is_some_and(|e| e == "json") {
                    files.push(path);
                }
            }
        } else {
            files.push(p.clone());
        }
        for f in files {
            let name = f
                .file_name()
                .map_or_else(|| f.display().to_string(), |n| n.to_string_lossy().into_owned());
            ledger.external(format!("corpus:{name}"), &f)?;
        }
    }
    write_file(&config.path(CORPUS_FILE), corpus.to_json())?;
    ledger.output(CORPUS_FILE)?;
    write_file(&config.path(STATS_FILE), corpus_stats(&corpus).to_csv())?;
    ledger.output(STATS_FILE)?;
    ledger.commit()?;
    Ok(corpus)
}

pub fn annotate_whow_stage(config: &RunConfig) -> Result<usize, PipelineError> {
    let mut ledger = Ledger::new(config, Stage::AnnotateWhow);
    let corpus = load_stage_corpus(&mut ledger)?;
    let gateway = make_gateway(config)?;
    let run = annotate_whow(&corpus, &gateway, &config.model, ContextWindow::default())?;
    write_jsonl(&config.path(WHOW_FILE), &run.annotations)?;
    write_jsonl(&config.path(WHOW_FAILURES), &run.failures)?;
    ledger.output(WHOW_FILE)?;
    ledger.output(WHOW_FAILURES)?;
    ledger.commit()?;
    Ok(run.annotations.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoverySummary {
    pub partition: crate::whow::ProminencePartition,
    /// Cell key → file under `discovery/`.
    pub cells: BTreeMap<String, String>,
    /// Cell key → reason it was not clustered.
    pub skipped: BTreeMap<String, String>,
}

fn cell_file(cell: crate::schema::Cell) -> String {
    format!("{}_{}.json", cell.motive.name(), cell.act.name())
}

pub fn discover(config: &RunConfig) -> Result<DiscoverySummary, PipelineError> {
    let mut ledger = Ledger::new(config, Stage::Discover);
    let corpus = load_stage_corpus(&mut ledger)?;
    let path = ledger.require(WHOW_FILE, Stage::AnnotateWhow)?;
    let annotations: Vec<WhowAnnotation> = read_jsonl(&path)?;
    let matrix = joint_matrix(&annotations, config.motive_counting)?;
    let partition = select_prominent(&matrix, config.threshold_low, config.threshold_high)?;
    write_file(&config.path("discovery/joint_matrix.csv"), matrix.to_csv())?;
    ledger.output("discovery/joint_matrix.csv")?;

    let stopwords = curate_stopwords(&corpus, BASE_STOPWORDS);
    let dconf = DiscoveryConfig {
        k_min: config.k_min,
        k_max: config.k_max,
        seeds: vec![config.seed],
        ..DiscoveryConfig::default()
    };
    let results: Vec<(crate::schema::Cell, Result<CellDiscovery, DiscoveryError>)> = {
        use rayon::prelude::*;
        let cells: Vec<_> = partition.expand.iter().copied().collect();
        cells
            .par_iter()
            .map(|&cell| {
                let docs = build_docs(&annotations, cell, &stopwords, None);
                (cell, propose_subtopics(cell, docs, &dconf, &TfEmbedder))
            })
            .collect()
    };
    let mut summary = DiscoverySummary {
        partition,
        cells: BTreeMap::new(),
        skipped: BTreeMap::new(),
    };
    let mut found = Vec::new();
    for (cell, r) in results {
        match r {
            Ok(d) => {
                let rel = format!("{DISCOVERY_DIR}/{}", cell_file(cell));
                write_json(&config.path(&rel), &d)?;
                ledger.output(&rel)?;
                summary.cells.insert(cell.key(), rel);
                found.push(d);
            }
            Err(e @ (DiscoveryError::InsufficientData { .. } | DiscoveryError::TooFewVectors { .. })) => {
                log::warn!("{}: {e}", cell.key());
                summary.skipped.insert(cell.key(), e.to_string());
            }
            Err(e) => return Err(PipelineError::Validation(format!("{}: {e}", cell.key()))),
        }
    }
    let decisions = match &config.decisions {
        Some(p) => read_decisions(p)?,
        None => Vec::new(),
    };
    write_file(&config.path("discovery/clusters.csv"), runs_to_csv(&found, &decisions))?;
    ledger.output("discovery/clusters.csv")?;
    write_json(&config.path(DISCOVERY_SUMMARY), &summary)?;
    ledger.output(DISCOVERY_SUMMARY)?;
    ledger.commit()?;
    Ok(summary)
}

fn read_decisions(path: &Path) -> Result<Vec<crate::taxonomy::DecisionEntry>, PipelineError> {
    let text = fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_decisions(&text).map_err(|e| PipelineError::Validation(e.to_string()))
}

/// Applies the decisions file to the proposed runs, or uses the bundled
/// decisions when none is configured.
pub fn build_taxonomy(config: &RunConfig) -> Result<TaxonomyRegistry, PipelineError> {
    let mut ledger = Ledger::new(config, Stage::BuildTaxonomy);
    let finalized = match &config.decisions {
        Some(p) => {
            ledger.external(
                format!(
                    "decisions:{}",
                    p.file_name()
                        .map_or_else(String::new, |n| n.to_string_lossy().into_owned())
                ),
                p,
            )?;
            let decisions = read_decisions(p)?;
            let summary_path = ledger.require(DISCOVERY_SUMMARY, Stage::Discover)?;
            let summary: DiscoverySummary = read_json(&summary_path)?;
            let mut runs: Vec<ClusterRun> = Vec::new();
            for rel in summary.cells.values() {
                let path = ledger.require(rel, Stage::Discover)?;
                let d: CellDiscovery = read_json(&path)?;
                runs.push(d.best_run().clone());
            }
            finalize_taxonomy(&runs, &decisions)
        }
        None => build(&default_decisions()),
    }
    .map_err(|e| PipelineError::Validation(e.to_string()))?;
    write_file(&config.path(TAXONOMY_FILE), finalized.registry.to_json())?;
    ledger.output(TAXONOMY_FILE)?;
    ledger.commit()?;
    Ok(finalized.registry)
}

fn load_taxonomy(ledger: &mut Ledger<'_>) -> Result<TaxonomyRegistry, PipelineError> {
    let path = ledger.require(TAXONOMY_FILE, Stage::BuildTaxonomy)?;
    let text = fs::read_to_string(&path).map_err(|source| PipelineError::Io {
        path: path.clone(),
        source,
    })?;
    TaxonomyRegistry::from_json(&text).map_err(|e| PipelineError::Validation(e.to_string()))
}

pub fn annotate_eslmod_stage(config: &RunConfig) -> Result<usize, PipelineError> {
    let mut ledger = Ledger::new(config, Stage::AnnotateEslmod);
    let corpus = load_stage_corpus(&mut ledger)?;
    let taxonomy = load_taxonomy(&mut ledger)?;
    let gateway = make_gateway(config)?;
    let run = annotate_eslmod(&corpus, &gateway, &config.model, ContextWindow::default(), &taxonomy)?;
    write_jsonl(&config.path(ESLMOD_FILE), &run.annotations)?;
    write_jsonl(&config.path(ESLMOD_FAILURES), &run.failures)?;
    ledger.output(ESLMOD_FILE)?;
    ledger.output(ESLMOD_FAILURES)?;
    ledger.commit()?;
    Ok(run.annotations.len())
}

pub fn score_quality_stage(config: &RunConfig) -> Result<usize, PipelineError> {
    let mut ledger = Ledger::new(config, Stage::ScoreQuality);
    let corpus = load_stage_corpus(&mut ledger)?;
    let gateway = make_gateway(config)?;
    let run = score_all(
        &corpus,
        config.granularity,
        &gateway,
        &config.model,
        DEFAULT_TRANSCRIPT_BUDGET,
    )?;
    write_jsonl(&config.path(QUALITY_FILE), &run.scores)?;
    write_jsonl(&config.path(QUALITY_FAILURES), &run.failures)?;
    ledger.output(QUALITY_FILE)?;
    ledger.output(QUALITY_FAILURES)?;
    ledger.commit()?;
    Ok(run.scores.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisResults {
    pub frequencies: Option<Vec<FrequencyRow>>,
    pub comparison: Option<Comparison>,
    pub by_topic: Option<Comparison>,
    pub by_speaker: Option<Comparison>,
    pub segment_quality: Vec<SegmentQuality>,
    pub strategy_effects: Option<Vec<StrategyEffect>>,
    pub alpha: Option<f64>,
    /// Why an analysis was skipped.
    pub skipped: BTreeMap<String, String>,
    /// Sidecar name → unparsed answers.
    pub failures: BTreeMap<String, usize>,
}

pub fn analyze(config: &RunConfig) -> Result<AnalysisResults, PipelineError> {
    let mut ledger = Ledger::new(config, Stage::Analyze);
    let corpus = load_stage_corpus(&mut ledger)?;
    let quality_path = ledger.require(QUALITY_FILE, Stage::ScoreQuality)?;
    let eslmod_path = ledger.require(ESLMOD_FILE, Stage::AnnotateEslmod)?;
    let taxonomy = load_taxonomy(&mut ledger)?;
    let records: Vec<SpeakerQualityScores> = read_jsonl(&quality_path)?;
    let eslmod: Vec<EslmodAnnotation> = read_jsonl(&eslmod_path)?;

    let mut skipped = BTreeMap::new();
    let frequencies = match strategy_frequencies(&eslmod, &taxonomy) {
        Ok(f) => Some(f),
        Err(e) => {
            skipped.insert("frequencies".to_string(), e.to_string());
            None
        }
    };
    let mut compare = |p: Pairing, label: &str| match compare_conditions(&records, &corpus, p) {
        Ok(c) => Some(c),
        Err(e) => {
            skipped.insert(label.to_string(), e.to_string());
            None
        }
    };
    let comparison = compare(Pairing::All, "comparison");
    let by_topic = compare(Pairing::ByTopic, "by_topic");
    let by_speaker = compare(Pairing::BySpeaker, "by_speaker");

    // strategies can only be present in moderated sessions
    let moderated = corpus.sessions.iter().filter(|s| s.moderated);
    let segment_quality = segment_qualities(moderated, &records, Metric::Overall);
    let strategy_effects = if segment_quality.is_empty() {
        skipped.insert(
            "strategy_effects".to_string(),
            "no scorable moderated segments".to_string(),
        );
        None
    } else {
        Some(strategy_effects(&segment_quality, &eslmod, &taxonomy, config.test))
    };

    let alpha = match &config.ratings {
        Some(p) => {
            ledger.external("ratings".to_string(), p)?;
            let text = fs::read_to_string(p).map_err(|source| PipelineError::Io {
                path: p.clone(),
                source,
            })?;
            let units = ratings_from_csv(&text).map_err(|e| PipelineError::Validation(e.to_string()))?;
            Some(krippendorff_alpha(&units).map_err(|e| PipelineError::Validation(e.to_string()))?)
        }
        None => None,
    };

    let mut failures = BTreeMap::new();
    for rel in [WHOW_FAILURES, ESLMOD_FAILURES, QUALITY_FAILURES] {
        if let Some(p) = ledger.optional(rel)? {
            let rows: Vec<AnnotationFailure> = read_jsonl(&p)?;
            failures.insert(rel.to_string(), rows.len());
        }
    }

    let results = AnalysisResults {
        frequencies,
        comparison,
        by_topic,
        by_speaker,
        segment_quality,
        strategy_effects,
        alpha,
        skipped,
        failures,
    };
    write_json(&config.path(ANALYSIS_FILE), &results)?;
    ledger.output(ANALYSIS_FILE)?;
    ledger.commit()?;
    Ok(results)
}

fn section_of(skipped_key: &str) -> Option<usize> {
    match skipped_key {
        "comparison" => Some(2),
        "frequencies" => Some(3),
        "by_topic" => Some(4),
        "by_speaker" => Some(5),
        "strategy_effects" => Some(6),
        _ => None,
    }
}

pub fn report(config: &RunConfig) -> Result<PathBuf, PipelineError> {
    let mut ledger = Ledger::new(config, Stage::Report);
    let corpus = load_stage_corpus(&mut ledger)?;
    let analysis: AnalysisResults = read_json(&ledger.require(ANALYSIS_FILE, Stage::Analyze)?)?;
    let stats = corpus_stats(&corpus);
    let matrix = match ledger.optional(WHOW_FILE)? {
        Some(p) => {
            let annotations: Vec<WhowAnnotation> = read_jsonl(&p)?;
            match joint_matrix(&annotations, config.motive_counting) {
                Ok(m) => {
                    let part = select_prominent(&m, config.threshold_low, config.threshold_high)?;
                    Some((m, part))
                }
                Err(_) => None,
            }
        }
        None => None,
    };
    let failures: Vec<(String, usize)> = analysis.failures.iter().map(|(k, v)| (k.clone(), *v)).collect();
    let unavailable: Vec<(usize, String)> = analysis
        .skipped
        .iter()
        .filter_map(|(k, why)| section_of(k).map(|i| (i, why.clone())))
        .chain(matrix.is_none().then(|| (1, "no WHoW annotations".to_string())))
        .collect();
    let bundle = render_report(&ReportInputs {
        stats: Some(&stats),
        matrix: matrix.as_ref().map(|(m, p)| (m, p)),
        comparison: analysis.comparison.as_ref(),
        frequencies: analysis.frequencies.as_deref(),
        by_topic: analysis.by_topic.as_ref(),
        by_speaker: analysis.by_speaker.as_ref(),
        effects: analysis.strategy_effects.as_deref(),
        alpha: analysis.alpha,
        failures: &failures,
        unavailable: &unavailable,
    });
    write_file(&config.path(REPORT_FILE), &bundle.markdown)?;
    ledger.output(REPORT_FILE)?;
    for (name, text) in &bundle.tables {
        let rel = format!("{TABLES_DIR}/{name}");
        write_file(&config.path(&rel), text)?;
        ledger.output(&rel)?;
    }
    ledger.commit()?;
    Ok(config.path(REPORT_FILE))
}

pub fn run_stage(stage: Stage, config: &RunConfig) -> Result<(), PipelineError> {
    config.validate()?;
    match stage {
        Stage::Ingest => ingest(config).map(drop),
        Stage::AnnotateWhow => annotate_whow_stage(config).map(drop),
        Stage::Discover => discover(config).map(drop),
        Stage::BuildTaxonomy => build_taxonomy(config).map(drop),
        Stage::AnnotateEslmod => annotate_eslmod_stage(config).map(drop),
        Stage::ScoreQuality => score_quality_stage(config).map(drop),
        Stage::Analyze => analyze(config).map(drop),
        Stage::Report => report(config).map(drop),
    }
}

/// Every stage in order.
pub fn run_all(config: &RunConfig) -> Result<(), PipelineError> {
    for stage in Stage::ALL {
        log::info!("stage {stage}");
        run_stage(stage, config)?;
    }
    Ok(())
}
