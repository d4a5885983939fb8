//! Moderation-strategy registry and the declarative decisions that build it.
//!
//! Clusters found by [`crate::discovery`] are turned into named strategies by a
//! human-authored decisions file. Each entry points at one cluster of one
//! prominent cell (or at a whole "keep" cell) and says what to do with it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discovery::ClusterRun;
use crate::schema::Cell;

const DEFAULT_DECISIONS: &str = include_str!("../data/default_decisions.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionKind {
    Merge,
    Expand,
    Extend,
    MergeTo,
    Keep,
}

impl fmt::Display for DecisionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecisionKind::Merge => "merge",
            DecisionKind::Expand => "expand",
            DecisionKind::Extend => "extend",
            DecisionKind::MergeTo => "merge_to",
            DecisionKind::Keep => "keep",
        })
    }
}

/// Decision recorded on a finished strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyDecision {
    Expand,
    Merge,
    Keep,
    Extend,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionEntry {
    /// Cell key, e.g. `"social/supplement"`.
    pub cell: String,
    /// `None` passes a whole cell through (`keep`).
    pub cluster_index: Option<usize>,
    pub decision: DecisionKind,
    /// Strategy name; for `merge_to` the name of the strategy absorbing this cluster.
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub definition: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub examples: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    pub id: String,
    pub name: String,
    /// Label shown to the annotator; defaults to `name`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_label: Option<String>,
    pub definition: String,
    pub source_cells: Vec<Cell>,
    pub decision: StrategyDecision,
    pub examples: Vec<String>,
}

impl Strategy {
    pub fn display_label(&self) -> &str {
        self.prompt_label.as_deref().unwrap_or(&self.name)
    }

    fn matches(&self, label: &str) -> bool {
        let norm = normalize(label);
        [
            Some(self.name.as_str()),
            self.prompt_label.as_deref(),
            Some(self.id.as_str()),
        ]
        .into_iter()
        .flatten()
        .any(|l| normalize(l) == norm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyRegistry {
    pub strategies: Vec<Strategy>,
}

#[derive(Debug, Error, PartialEq)]
pub enum TaxonomyError {
    #[error("invalid cell key {0:?}")]
    BadCell(String),
    #[error("decision references unknown cluster {cluster} of cell {cell}")]
    UnknownCluster { cell: String, cluster: usize },
    #[error("missing decision for cluster {cluster} of cell {cell}")]
    MissingDecision { cell: String, cluster: usize },
    #[error("duplicate label {0:?} with conflicting definitions")]
    DuplicateLabel(String),
    #[error("duplicate strategy id {0:?}")]
    DuplicateId(String),
    #[error("cluster {cluster} of cell {cell} has more than one decision")]
    DuplicateDecision { cell: String, cluster: usize },
    #[error("merge_to target {0:?} is never defined")]
    DanglingMerge(String),
    #[error("decisions file: {0}")]
    Parse(String),
}

/// Result of applying a decisions file, with non-fatal warnings.
#[derive(Debug, Clone)]
pub struct FinalizedTaxonomy {
    pub registry: TaxonomyRegistry,
    pub warnings: Vec<String>,
}

fn normalize(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

fn slug(label: &str) -> String {
    let mut out = String::new();
    for word in label.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()) {
        if !out.is_empty() {
            out.push('_');
        }
        out.push_str(&word.to_lowercase());
    }
    out
}

pub fn parse_decisions(text: &str) -> Result<Vec<DecisionEntry>, TaxonomyError> {
    serde_json::from_str(text).map_err(|e| TaxonomyError::Parse(e.to_string()))
}

/// Decisions that reproduce the ten-strategy taxonomy.
pub fn default_decisions() -> Vec<DecisionEntry> {
    parse_decisions(DEFAULT_DECISIONS).expect("bundled decisions parse")
}

impl TaxonomyRegistry {
    /// The ten-strategy registry built from [`default_decisions`].
    pub fn default_registry() -> TaxonomyRegistry {
        build(&default_decisions())
            .expect("bundled decisions are consistent")
            .registry
    }

    pub fn len(&self) -> usize {
        self.strategies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strategies.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Strategy> {
        self.strategies.iter().find(|s| s.id == id)
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.strategies.iter().position(|s| s.id == id)
    }

    /// Resolves a name, prompt label or id (case and punctuation insensitive).
    pub fn lookup(&self, label: &str) -> Option<&Strategy> {
        self.strategies.iter().find(|s| s.matches(label))
    }

    /// Every cell some strategy draws from.
    pub fn covered_cells(&self) -> BTreeSet<Cell> {
        self.strategies
            .iter()
            .flat_map(|s| s.source_cells.iter().copied())
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("registry serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TaxonomyError> {
        serde_json::from_str(text).map_err(|e| TaxonomyError::Parse(e.to_string()))
    }
}

/// Applies `decisions` to the clustering runs chosen for each prominent cell.
///
/// Every cluster of every run needs exactly one decision, and every cluster
/// decision must point at an existing cluster.
pub fn finalize_taxonomy(runs: &[ClusterRun], decisions: &[DecisionEntry]) -> Result<FinalizedTaxonomy, TaxonomyError> {
    let mut by_cell: BTreeMap<Cell, &ClusterRun> = BTreeMap::new();
    for r in runs {
        by_cell.insert(r.cell, r);
    }
    let mut decided: BTreeSet<(Cell, usize)> = BTreeSet::new();
    for d in decisions {
        let cell = Cell::parse_key(&d.cell).ok_or_else(|| TaxonomyError::BadCell(d.cell.clone()))?;
        let Some(idx) = d.cluster_index else { continue };
        let exists = by_cell.get(&cell).is_some_and(|r| idx < r.cluster_sizes.len());
        if !exists {
            return Err(TaxonomyError::UnknownCluster {
                cell: d.cell.clone(),
                cluster: idx,
            });
        }
        if !decided.insert((cell, idx)) {
            return Err(TaxonomyError::DuplicateDecision {
                cell: d.cell.clone(),
                cluster: idx,
            });
        }
    }
    for (cell, run) in &by_cell {
        for idx in 0..run.cluster_sizes.len() {
            if !decided.contains(&(*cell, idx)) {
                return Err(TaxonomyError::MissingDecision {
                    cell: cell.key(),
                    cluster: idx,
                });
            }
        }
    }
    build(decisions)
}

/// Builds the registry from decisions alone, without cross-checking clusters.
pub fn build(decisions: &[DecisionEntry]) -> Result<FinalizedTaxonomy, TaxonomyError> {
    let mut strategies: Vec<Strategy> = Vec::new();
    let mut warnings = Vec::new();
    let mut merge_targets: Vec<(String, Cell)> = Vec::new();

    for d in decisions {
        let cell = Cell::parse_key(&d.cell).ok_or_else(|| TaxonomyError::BadCell(d.cell.clone()))?;
        if d.decision == DecisionKind::MergeTo {
            merge_targets.push((d.label.clone(), cell));
            continue;
        }
        let kind = match d.decision {
            DecisionKind::Merge => StrategyDecision::Merge,
            DecisionKind::Expand => StrategyDecision::Expand,
            DecisionKind::Extend => StrategyDecision::Extend,
            DecisionKind::Keep => StrategyDecision::Keep,
            DecisionKind::MergeTo => unreachable!(),
        };
        let pos = strategies
            .iter()
            .position(|s| normalize(&s.name) == normalize(&d.label));
        let strategy = match pos {
            Some(i) => &mut strategies[i],
            None => {
                strategies.push(Strategy {
                    id: d.id.clone().unwrap_or_else(|| slug(&d.label)),
                    name: d.label.clone(),
                    prompt_label: None,
                    definition: String::new(),
                    source_cells: Vec::new(),
                    decision: kind,
                    examples: Vec::new(),
                });
                strategies.last_mut().expect("just pushed")
            }
        };
        if let Some(def) = d.definition.as_deref().filter(|t| !t.trim().is_empty()) {
            if strategy.definition.is_empty() {
                strategy.definition = def.to_string();
            } else if strategy.definition != def {
                return Err(TaxonomyError::DuplicateLabel(d.label.clone()));
            }
        }
        if strategy.prompt_label.is_none() {
            strategy.prompt_label = d.prompt_label.clone();
        }
        if !strategy.source_cells.contains(&cell) {
            strategy.source_cells.push(cell);
        }
        for ex in &d.examples {
            if !strategy.examples.contains(ex) {
                strategy.examples.push(ex.clone());
            }
        }
    }

    for (label, cell) in merge_targets {
        let target = strategies
            .iter_mut()
            .find(|s| normalize(&s.name) == normalize(&label))
            .ok_or_else(|| TaxonomyError::DanglingMerge(label.clone()))?;
        if !target.source_cells.contains(&cell) {
            target.source_cells.push(cell);
        }
    }

    let mut ids = BTreeSet::new();
    for s in &strategies {
        if !ids.insert(s.id.clone()) {
            return Err(TaxonomyError::DuplicateId(s.id.clone()));
        }
        if s.definition.is_empty() {
            warnings.push(format!("strategy {:?} has no definition", s.name));
        }
    }
    if strategies.len() < 2 {
        warnings.push(format!(
            "taxonomy collapsed to {} strategy; check the decisions file",
            strategies.len()
        ));
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(FinalizedTaxonomy {
        registry: TaxonomyRegistry { strategies },
        warnings,
    })
}
