use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Deserialize;

use modlab_core::effects::TestKind;
use modlab_core::pipeline::{self, PipelineError, RunConfig, Stage};
use modlab_core::{BackendKind, Granularity, MotiveCounting};

#[derive(Parser, Debug)]
#[command(
    name = "modlab",
    version,
    about = "Moderation strategy analysis for multi-party discussions"
)]
struct Cli {
    #[command(flatten)]
    opts: Opts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Validate the corpus and write descriptive statistics.
    Ingest,
    /// Label every moderator sentence with motives, act and target.
    AnnotateWhow,
    /// Joint matrix, prominent cells and sub-topic clustering.
    Discover,
    /// Apply the decisions file (or the bundled one) to build the strategy registry.
    BuildTaxonomy,
    /// Label every moderator sentence with a strategy from the registry.
    AnnotateEslmod,
    /// Score participants on the quality rubric.
    ScoreQuality,
    /// Frequencies, condition comparisons, segment quality and strategy effects.
    Analyze,
    /// Render report.md and tables/.
    Report,
    /// Run every stage in order.
    Pipeline,
}

impl Command {
    fn stages(self) -> Vec<Stage> {
        match self {
            Command::Ingest => vec![Stage::Ingest],
            Command::AnnotateWhow => vec![Stage::AnnotateWhow],
            Command::Discover => vec![Stage::Discover],
            Command::BuildTaxonomy => vec![Stage::BuildTaxonomy],
            Command::AnnotateEslmod => vec![Stage::AnnotateEslmod],
            Command::ScoreQuality => vec![Stage::ScoreQuality],
            Command::Analyze => vec![Stage::Analyze],
            Command::Report => vec![Stage::Report],
            Command::Pipeline => Stage::ALL.to_vec(),
        }
    }
}

#[derive(Args, Debug, Default)]
struct Opts {
    /// TOML file with the same keys as the flags; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Session file or directory (repeatable).
    #[arg(long = "corpus", global = true)]
    corpus: Vec<PathBuf>,
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// live, mock or replay.
    #[arg(long, global = true)]
    backend: Option<BackendKind>,
    #[arg(long, global = true)]
    model: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    k_min: Option<usize>,
    #[arg(long, global = true)]
    k_max: Option<usize>,
    #[arg(long, global = true)]
    threshold_low: Option<f64>,
    #[arg(long, global = true)]
    threshold_high: Option<f64>,
    /// session or segment.
    #[arg(long, global = true)]
    granularity: Option<Granularity>,
    /// Decisions JSON for build-taxonomy.
    #[arg(long, global = true)]
    decisions: Option<PathBuf>,
    /// Ratings CSV (unit,rater,label) for agreement in analyze.
    #[arg(long, global = true)]
    ratings: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Concurrent backend requests.
    #[arg(long, global = true)]
    in_flight: Option<usize>,
    /// Count only the first listed motive of each sentence.
    #[arg(long, global = true)]
    first_motive_only: bool,
    /// Use the pooled-variance t-test for strategy effects.
    #[arg(long, global = true)]
    pooled: bool,
}

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct FileConfig {
    #[serde(default)]
    corpus: Vec<PathBuf>,
    cache_dir: Option<PathBuf>,
    backend: Option<BackendKind>,
    model: Option<String>,
    seed: Option<u64>,
    k_min: Option<usize>,
    k_max: Option<usize>,
    threshold_low: Option<f64>,
    threshold_high: Option<f64>,
    granularity: Option<Granularity>,
    decisions: Option<PathBuf>,
    ratings: Option<PathBuf>,
    out: Option<PathBuf>,
    in_flight: Option<usize>,
    motive_counting: Option<MotiveCounting>,
    test: Option<TestKind>,
}

/// Paths in a config file are relative to the file.
fn anchor(base: &Path, p: PathBuf) -> PathBuf {
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

fn load_file_config(path: &Path) -> Result<FileConfig, PipelineError> {
    let text = fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut fc: FileConfig =
        toml::from_str(&text).map_err(|e| PipelineError::Validation(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    fc.corpus = fc.corpus.into_iter().map(|p| anchor(base, p)).collect();
    fc.cache_dir = fc.cache_dir.map(|p| anchor(base, p));
    fc.decisions = fc.decisions.map(|p| anchor(base, p));
    fc.ratings = fc.ratings.map(|p| anchor(base, p));
    fc.out = fc.out.map(|p| anchor(base, p));
    Ok(fc)
}

fn resolve(opts: Opts) -> Result<RunConfig, PipelineError> {
    let file = match &opts.config {
        Some(p) => load_file_config(p)?,
        None => FileConfig::default(),
    };
    let d = RunConfig::default();
    let config = RunConfig {
        corpus: if opts.corpus.is_empty() {
            file.corpus
        } else {
            opts.corpus
        },
        cache_dir: opts.cache_dir.or(file.cache_dir),
        backend: opts.backend.or(file.backend).unwrap_or(d.backend),
        model: opts.model.or(file.model).unwrap_or(d.model),
        seed: opts.seed.or(file.seed).unwrap_or(d.seed),
        k_min: opts.k_min.or(file.k_min).unwrap_or(d.k_min),
        k_max: opts.k_max.or(file.k_max).unwrap_or(d.k_max),
        threshold_low: opts.threshold_low.or(file.threshold_low).unwrap_or(d.threshold_low),
        threshold_high: opts.threshold_high.or(file.threshold_high).unwrap_or(d.threshold_high),
        granularity: opts.granularity.or(file.granularity).unwrap_or(d.granularity),
        decisions: opts.decisions.or(file.decisions),
        out: opts.out.or(file.out).unwrap_or(d.out),
        in_flight: opts.in_flight.or(file.in_flight).unwrap_or(d.in_flight),
        motive_counting: if opts.first_motive_only {
            MotiveCounting::FirstListed
        } else {
            file.motive_counting.unwrap_or(d.motive_counting)
        },
        test: if opts.pooled {
            TestKind::Pooled
        } else {
            file.test.unwrap_or(d.test)
        },
        ratings: opts.ratings.or(file.ratings),
    };
    config.validate()?;
    Ok(config)
}

fn run(stage: Stage, config: &RunConfig) -> Result<String, PipelineError> {
    Ok(match stage {
        Stage::Ingest => {
            let corpus = pipeline::ingest(config)?;
            format!(
                "{} sessions, {} moderator sentences",
                corpus.sessions.len(),
                corpus
                    .sessions
                    .iter()
                    .map(|s| s.moderator_sentences().len())
                    .sum::<usize>()
            )
        }
        Stage::AnnotateWhow => format!("{} annotations", pipeline::annotate_whow_stage(config)?),
        Stage::Discover => {
            let s = pipeline::discover(config)?;
            format!("{} cells clustered, {} skipped", s.cells.len(), s.skipped.len())
        }
        Stage::BuildTaxonomy => format!("{} strategies", pipeline::build_taxonomy(config)?.len()),
        Stage::AnnotateEslmod => {
            format!("{} annotations", pipeline::annotate_eslmod_stage(config)?)
        }
        Stage::ScoreQuality => format!("{} score records", pipeline::score_quality_stage(config)?),
        Stage::Analyze => {
            let a = pipeline::analyze(config)?;
            format!(
                "{} segments scored, {} analyses skipped",
                a.segment_quality.len(),
                a.skipped.len()
            )
        }
        Stage::Report => pipeline::report(config)?.display().to_string(),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();

    let result = resolve(cli.opts).and_then(|config| {
        for stage in cli.command.stages() {
            info!("running {stage}");
            let summary = run(stage, &config)?;
            println!("{stage}: {summary}");
        }
        Ok(())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
