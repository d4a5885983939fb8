//! Markdown report and CSV tables from whatever results are available.

use std::fmt::Write as _;

use crate::corpus::{CorpusStats, GroupStats};
use crate::effects::{Comparison, FrequencyRow, StrategyEffect, SIGNIFICANCE};
use crate::whow::{JointMatrix, ProminencePartition};

pub const SECTION_TITLES: [&str; 7] = [
    "Corpus statistics",
    "Motive and dialogue act distribution",
    "Dialogue quality: moderated vs non-moderated",
    "Strategy frequencies",
    "Quality differences by topic",
    "Quality differences controlling for speakers",
    "Strategy effects on segment quality",
];

#[derive(Debug, Clone, Copy, Default)]
pub struct ReportInputs<'a> {
    pub stats: Option<&'a CorpusStats>,
    pub matrix: Option<(&'a JointMatrix, &'a ProminencePartition)>,
    pub comparison: Option<&'a Comparison>,
    pub frequencies: Option<&'a [FrequencyRow]>,
    pub by_topic: Option<&'a Comparison>,
    pub by_speaker: Option<&'a Comparison>,
    pub effects: Option<&'a [StrategyEffect]>,
    pub alpha: Option<f64>,
    /// (stage, unparsed answers)
    pub failures: &'a [(String, usize)],
    /// (section index, reason) for results that could not be computed.
    pub unavailable: &'a [(usize, String)],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub markdown: String,
    /// (file name under `tables/`, CSV text)
    pub tables: Vec<(String, String)>,
}

fn f2(x: f64) -> String {
    format!("{x:.2}")
}

fn opt2(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".to_string(), f2)
}

fn p_fmt(p: Option<f64>) -> String {
    match p {
        None => "n/a".into(),
        Some(p) if p < 0.001 => "<0.001".into(),
        Some(p) => format!("{p:.3}"),
    }
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for r in rows {
        w.write_record(&r).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

fn group_label(g: &GroupStats) -> String {
    match (g.source, g.moderated) {
        (Some(s), Some(true)) => format!("{s} (moderated)"),
        (Some(s), Some(false)) => format!("{s} (non-moderated)"),
        _ => "total".into(),
    }
}

fn stats_section(out: &mut String, stats: &CorpusStats) {
    out.push_str("| group | sessions | unique speakers | speakers avg | segments avg | sentences avg | moderator sentences avg | tokens avg |\n|---|---|---|---|---|---|---|---|\n");
    for g in stats.groups.iter().chain(std::iter::once(&stats.total)) {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} | {} |",
            group_label(g),
            g.sessions,
            g.unique_speakers,
            f2(g.avg_speakers),
            f2(g.avg_segments),
            f2(g.avg_sentences),
            f2(g.avg_moderator_sentences),
            f2(g.avg_tokens)
        );
    }
    let t = &stats.total;
    let _ = writeln!(
        out,
        "\nTotals: {} sessions, {} segments, {} sentences, {} moderator sentences, {} tokens.",
        t.sessions, t.total_segments, t.total_sentences, t.total_moderator_sentences, t.total_tokens
    );
}

fn cells(set: &std::collections::BTreeSet<crate::schema::Cell>) -> String {
    if set.is_empty() {
        return "none".into();
    }
    set.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", ")
}

fn comparison_table(out: &mut String, c: &Comparison) {
    out.push_str("| metric | moderated | non-moderated | p (one-tailed) |\n|---|---|---|---|\n");
    for r in &c.rows {
        let (m, n) = if r.significant {
            (
                format!("**{}***", f2(r.mean_moderated)),
                format!("**{}**", f2(r.mean_non_moderated)),
            )
        } else {
            (f2(r.mean_moderated), f2(r.mean_non_moderated))
        };
        let _ = writeln!(out, "| {} | {m} | {n} | {} |", r.metric.title(), p_fmt(r.p_one_tailed));
    }
    if let Some(r) = c.rows.first() {
        let _ = writeln!(
            out,
            "\nUnits: {} moderated, {} non-moderated. * marks p < {SIGNIFICANCE}.",
            r.n_moderated, r.n_non_moderated
        );
    }
}

fn comparison_csv(label: &str, c: &Comparison) -> Vec<Vec<String>> {
    c.rows
        .iter()
        .map(|r| {
            vec![
                label.to_string(),
                r.metric.name().to_string(),
                r.mean_moderated.to_string(),
                r.mean_non_moderated.to_string(),
                r.n_moderated.to_string(),
                r.n_non_moderated.to_string(),
                r.t_stat.map(|v| v.to_string()).unwrap_or_default(),
                r.df.map(|v| v.to_string()).unwrap_or_default(),
                r.p_one_tailed.map(|v| v.to_string()).unwrap_or_default(),
                r.significant.to_string(),
            ]
        })
        .collect()
}

/// Sections appear for results that are present or listed as unavailable;
/// output is deterministic.
pub fn render_report(inputs: &ReportInputs<'_>) -> ReportBundle {
    let mut md = String::from("# Moderation analysis report\n");
    let mut tables = Vec::new();
    let section = |md: &mut String, i: usize| {
        let _ = write!(md, "\n## {}\n\n", SECTION_TITLES[i]);
    };
    let unavailable = |md: &mut String, i: usize| {
        if let Some((_, why)) = inputs.unavailable.iter().find(|(j, _)| *j == i) {
            section(md, i);
            let _ = writeln!(md, "Not available: {why}.");
        }
    };

    if let Some(stats) = inputs.stats {
        section(&mut md, 0);
        stats_section(&mut md, stats);
        tables.push(("stats.csv".to_string(), stats.to_csv()));
    } else {
        unavailable(&mut md, 0);
    }

    if let Some((m, p)) = inputs.matrix {
        section(&mut md, 1);
        md.push_str("Joint probability (count) of each motive and dialogue act over moderator sentences.\n\n");
        md.push_str(&m.to_markdown());
        let _ = writeln!(
            md,
            "\nThresholds: low {} / high {}.\n\n- expand: {}\n- keep: {}\n- drop: {} cells",
            p.low,
            p.high,
            cells(&p.expand),
            cells(&p.keep),
            p.drop.len()
        );
        tables.push(("joint_matrix.csv".to_string(), m.to_csv()));
    } else {
        unavailable(&mut md, 1);
    }

    if let Some(c) = inputs.comparison {
        section(&mut md, 2);
        comparison_table(&mut md, c);
    } else {
        unavailable(&mut md, 2);
    }

    if let Some(rows) = inputs.frequencies {
        section(&mut md, 3);
        md.push_str("| strategy | count | percent |\n|---|---|---|\n");
        let total: usize = rows.iter().map(|r| r.count).sum();
        for r in rows {
            let _ = writeln!(md, "| {} | {} | {:.1}% |", r.name, r.count, r.percent);
        }
        let _ = writeln!(md, "| total | {total} | 100% |");
        tables.push((
            "frequencies.csv".to_string(),
            csv_text(
                &["strategy_id", "name", "count", "percent"],
                rows.iter().map(|r| {
                    vec![
                        r.strategy_id.clone(),
                        r.name.clone(),
                        r.count.to_string(),
                        r.percent.to_string(),
                    ]
                }),
            ),
        ));
    } else {
        unavailable(&mut md, 3);
    }

    if let Some(c) = inputs.by_topic {
        section(&mut md, 4);
        let mut topics: Vec<&str> = c.topic_deltas.iter().map(|d| d.topic.as_str()).collect();
        topics.dedup();
        md.push_str("Moderated minus non-moderated mean within each topic.\n\n| topic |");
        for r in &c.rows {
            let _ = write!(md, " {} |", r.metric.title());
        }
        md.push_str("\n|---|");
        md.push_str(&"---|".repeat(c.rows.len()));
        md.push('\n');
        for t in &topics {
            let _ = write!(md, "| {t} |");
            for d in c.topic_deltas.iter().filter(|d| d.topic == *t) {
                let _ = write!(md, " {} {} |", d.arrow(), f2(d.delta.abs()));
            }
            md.push('\n');
        }
        if topics.is_empty() {
            md.push_str("\nNo topic occurs in both conditions.\n");
        }
        tables.push((
            "topic_deltas.csv".to_string(),
            csv_text(
                &["topic", "metric", "delta", "direction"],
                c.topic_deltas.iter().map(|d| {
                    vec![
                        d.topic.clone(),
                        d.metric.name().to_string(),
                        d.delta.to_string(),
                        d.arrow().to_string(),
                    ]
                }),
            ),
        ));
    } else {
        unavailable(&mut md, 4);
    }

    if let Some(c) = inputs.by_speaker {
        section(&mut md, 5);
        let _ = writeln!(md, "Speakers present in both conditions: {}.\n", c.speakers.len());
        comparison_table(&mut md, c);
    } else {
        unavailable(&mut md, 5);
    }

    let comparison_rows: Vec<Vec<String>> = [
        ("all", inputs.comparison),
        ("by_topic", inputs.by_topic),
        ("by_speaker", inputs.by_speaker),
    ]
    .into_iter()
    .filter_map(|(l, c)| c.map(|c| comparison_csv(l, c)))
    .flatten()
    .collect();
    if !comparison_rows.is_empty() {
        tables.push((
            "comparisons.csv".to_string(),
            csv_text(
                &[
                    "pairing",
                    "metric",
                    "mean_moderated",
                    "mean_non_moderated",
                    "n_moderated",
                    "n_non_moderated",
                    "t",
                    "df",
                    "p_one_tailed",
                    "significant",
                ],
                comparison_rows,
            ),
        ));
    }

    if let Some(effects) = inputs.effects {
        section(&mut md, 6);
        md.push_str("| strategy | with | without | Δ | p | segments with / without |\n|---|---|---|---|---|---|\n");
        for e in effects {
            let star = if e.p_value.is_some_and(|p| p < SIGNIFICANCE) {
                "*"
            } else {
                ""
            };
            let delta = e.delta.map_or_else(|| "n/a".to_string(), |d| format!("{d:+.2}"));
            let _ = writeln!(
                md,
                "| {}{star} | {} | {} | {delta} | {} | {} / {} |",
                e.name,
                opt2(e.mean_with),
                opt2(e.mean_without),
                p_fmt(e.p_value),
                e.n_with,
                e.n_without
            );
        }
        let _ = writeln!(md, "\n* marks p < {SIGNIFICANCE} (two-tailed).");
        tables.push((
            "strategy_effects.csv".to_string(),
            csv_text(
                &[
                    "strategy_id",
                    "name",
                    "n_with",
                    "n_without",
                    "mean_with",
                    "mean_without",
                    "delta",
                    "t",
                    "df",
                    "p",
                    "flag",
                ],
                effects.iter().map(|e| {
                    let o = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
                    vec![
                        e.strategy_id.clone(),
                        e.name.clone(),
                        e.n_with.to_string(),
                        e.n_without.to_string(),
                        o(e.mean_with),
                        o(e.mean_without),
                        o(e.delta),
                        o(e.t_stat),
                        o(e.df),
                        o(e.p_value),
                        e.flag.clone().unwrap_or_default(),
                    ]
                }),
            ),
        ));
    } else {
        unavailable(&mut md, 6);
    }

    let unparsed: usize = inputs.failures.iter().map(|(_, n)| n).sum();
    if inputs.alpha.is_some() || unparsed > 0 {
        md.push_str("\n## Notes\n\n");
        if let Some(a) = inputs.alpha {
            let _ = writeln!(md, "- Inter-rater agreement (Krippendorff's alpha, nominal): {a:.2}");
        }
        for (stage, n) in inputs.failures.iter().filter(|(_, n)| *n > 0) {
            let _ = writeln!(md, "- {stage}: {n} unparsed answers excluded");
        }
    }

    ReportBundle { markdown: md, tables }
}
