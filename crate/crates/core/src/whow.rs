//! WHoW annotation of moderator sentences, the motive × act matrix and the
//! prominence partition used to pick cells for refinement.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Location};
use crate::gateway::parse::parse_annotation_response;
use crate::gateway::{Completion, Gateway, GatewayError, ParsedResponse, PromptRequest, SchemaTag, WhowLabels};
use crate::prompts::{build_whow_prompt, ContextWindow, PromptError};
use crate::schema::{Cell, DialogueAct, Motive};
use crate::sidecar::AnnotationFailure;

pub const DEFAULT_LOW: f64 = 0.025;
pub const DEFAULT_HIGH: f64 = 0.095;

#[derive(Debug, Error)]
pub enum WhowError {
    #[error("no annotations")]
    NoAnnotations,
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WhowAnnotation {
    #[serde(flatten)]
    pub location: Location,
    pub schema: SchemaTag,
    pub motives: Vec<Motive>,
    pub dialogue_act: DialogueAct,
    pub target_speaker: String,
    pub reason: String,
    pub model_id: String,
    pub prompt_hash: String,
}

impl WhowAnnotation {
    pub fn new(location: Location, labels: WhowLabels, model_id: &str, prompt_hash: String) -> Self {
        WhowAnnotation {
            location,
            schema: SchemaTag::Whow,
            motives: labels.motives,
            dialogue_act: labels.dialogue_act,
            target_speaker: labels.target_speaker,
            reason: labels.reason,
            model_id: model_id.to_string(),
            prompt_hash,
        }
    }

    pub fn first_cell(&self) -> Option<Cell> {
        self.motives.first().map(|&m| Cell::new(m, self.dialogue_act))
    }

    pub fn in_cell(&self, cell: Cell) -> bool {
        self.dialogue_act == cell.act && self.motives.contains(&cell.motive)
    }
}

#[derive(Debug, Clone, Default)]
pub struct WhowRun {
    pub annotations: Vec<WhowAnnotation>,
    pub failures: Vec<AnnotationFailure>,
}

/// One annotation attempt per moderator sentence, in corpus order.
pub fn annotate_whow(
    corpus: &Corpus,
    gateway: &Gateway,
    model_id: &str,
    window: ContextWindow,
) -> Result<WhowRun, WhowError> {
    let mut targets = Vec::new();
    for session in &corpus.sessions {
        for pos in session.moderator_sentences() {
            targets.push((session, pos));
        }
    }
    let results = gateway.map_bounded(&targets, |&(session, pos)| -> Result<_, WhowError> {
        let prompt = build_whow_prompt(session, pos, window)?;
        let req = PromptRequest::new(prompt, model_id, SchemaTag::Whow);
        let done = gateway.complete_parsed(&req, |raw| match parse_annotation_response(raw, SchemaTag::Whow)? {
            ParsedResponse::Whow(l) => Ok(l),
            _ => unreachable!("whow tag yields whow labels"),
        })?;
        Ok((session.location(pos), done))
    });
    let mut run = WhowRun::default();
    for r in results {
        match r? {
            (loc, Completion::Parsed { value, prompt_hash }) => {
                run.annotations
                    .push(WhowAnnotation::new(loc, value, model_id, prompt_hash))
            }
            (loc, Completion::Unparsed { error, prompt_hash }) => {
                log::warn!("unparsed whow answer at {}/{}: {error}", loc.session_id, loc.segment_id);
                run.failures.push(AnnotationFailure::at_sentence(
                    SchemaTag::Whow,
                    &loc,
                    &error,
                    prompt_hash,
                ));
            }
        }
    }
    Ok(run)
}

/// How a sentence listing several motives is tallied into the cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotiveCounting {
    /// Every listed motive gets a count; act totals and `total` still count sentences.
    #[default]
    AllListed,
    FirstListed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointMatrix {
    /// `counts[motive][act]`, in [`Motive::ALL`] × [`DialogueAct::ALL`] order.
    pub counts: [[usize; 6]; 3],
    /// Sentences per act, whatever their motives.
    pub act_totals: [usize; 6],
    pub motive_totals: [usize; 3],
    /// Annotated sentences.
    pub total: usize,
    pub counting: MotiveCounting,
}

pub fn joint_matrix(annotations: &[WhowAnnotation], counting: MotiveCounting) -> Result<JointMatrix, WhowError> {
    if annotations.is_empty() {
        return Err(WhowError::NoAnnotations);
    }
    let mut counts = [[0usize; 6]; 3];
    let mut act_totals = [0usize; 6];
    for a in annotations {
        let act = a.dialogue_act.index();
        act_totals[act] += 1;
        let listed = match counting {
            MotiveCounting::AllListed => &a.motives[..],
            MotiveCounting::FirstListed => &a.motives[..a.motives.len().min(1)],
        };
        for m in listed {
            counts[m.index()][act] += 1;
        }
    }
    let motive_totals = counts.map(|row| row.iter().sum());
    Ok(JointMatrix {
        counts,
        act_totals,
        motive_totals,
        total: annotations.len(),
        counting,
    })
}

impl JointMatrix {
    pub fn count(&self, cell: Cell) -> usize {
        self.counts[cell.motive.index()][cell.act.index()]
    }

    /// Joint frequency count / total.
    pub fn probability(&self, cell: Cell) -> f64 {
        self.count(cell) as f64 / self.total as f64
    }

    /// P(act | motive), a display view.
    pub fn conditional(&self, cell: Cell) -> f64 {
        let row = self.motive_totals[cell.motive.index()];
        if row == 0 {
            0.0
        } else {
            self.count(cell) as f64 / row as f64
        }
    }

    pub fn motive_probability(&self, m: Motive) -> f64 {
        self.motive_totals[m.index()] as f64 / self.total as f64
    }

    pub fn act_probability(&self, a: DialogueAct) -> f64 {
        self.act_totals[a.index()] as f64 / self.total as f64
    }

    /// Motive rows, act columns, totals last; cells read `0.26 (838)`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["motive".to_string()];
        header.extend(DialogueAct::ALL.iter().map(|a| a.name().to_string()));
        header.push("total".into());
        w.write_record(&header).expect("in-memory csv");
        let fmt = |n: usize| format!("{:.2} ({n})", n as f64 / self.total as f64);
        for m in Motive::ALL {
            let mut row = vec![m.name().to_string()];
            row.extend(DialogueAct::ALL.iter().map(|&a| fmt(self.count(Cell::new(m, a)))));
            row.push(fmt(self.motive_totals[m.index()]));
            w.write_record(&row).expect("in-memory csv");
        }
        let mut row = vec!["total".to_string()];
        row.extend(self.act_totals.iter().map(|&n| fmt(n)));
        row.push(fmt(self.total));
        w.write_record(&row).expect("in-memory csv");
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| motive |");
        for a in DialogueAct::ALL {
            let _ = write!(out, " {} |", a.name());
        }
        out.push_str(" total |\n|---|");
        out.push_str(&"---|".repeat(7));
        out.push('\n');
        let fmt = |n: usize| format!("{:.2} ({n})", n as f64 / self.total as f64);
        for m in Motive::ALL {
            let _ = write!(out, "| {} |", m.name());
            for a in DialogueAct::ALL {
                let _ = write!(out, " {} |", fmt(self.count(Cell::new(m, a))));
            }
            let _ = writeln!(out, " {} |", fmt(self.motive_totals[m.index()]));
        }
        out.push_str("| total |");
        for n in self.act_totals {
            let _ = write!(out, " {} |", fmt(n));
        }
        let _ = writeln!(out, " {} |", fmt(self.total));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProminencePartition {
    pub expand: BTreeSet<Cell>,
    pub keep: BTreeSet<Cell>,
    pub drop: BTreeSet<Cell>,
    pub low: f64,
    pub high: f64,
}

/// `p < low` → drop, `p ≥ high` → expand, otherwise keep.
pub fn select_prominent(matrix: &JointMatrix, low: f64, high: f64) -> Result<ProminencePartition, WhowError> {
    if low.partial_cmp(&high) != Some(std::cmp::Ordering::Less) {
        return Err(WhowError::Config(format!(
            "low threshold {low} must be below high threshold {high}"
        )));
    }
    let mut part = ProminencePartition {
        expand: BTreeSet::new(),
        keep: BTreeSet::new(),
        drop: BTreeSet::new(),
        low,
        high,
    };
    for cell in Cell::all() {
        let p = matrix.probability(cell);
        if p < low {
            part.drop.insert(cell);
        } else if p >= high {
            part.expand.insert(cell);
        } else {
            part.keep.insert(cell);
        }
    }
    Ok(part)
}
