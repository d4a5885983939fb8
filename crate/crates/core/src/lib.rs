//! Moderation-strategy analysis for multi-party second-language discussions.
//!
//! The pipeline runs in stages that communicate through files:
//! corpus loading, WHoW annotation, strategy discovery, taxonomy building,
//! ESLMOD annotation, quality scoring, analysis and reporting.

pub mod corpus;
pub mod discovery;
pub mod effects;
pub mod eslmod;
pub mod fixtures;
pub mod gateway;
pub mod pipeline;
pub mod prompts;
pub mod quality;
pub mod report;
pub mod schema;
pub mod sidecar;
pub mod taxonomy;
pub mod whow;

pub use corpus::{Corpus, Location, Role, Segment, SentencePos, Session, Source, Speaker, Utterance};
pub use discovery::{ClusterRun, ReasonDoc};
pub use effects::{ComparisonRow, Metric, SegmentQuality, StrategyEffect};
pub use eslmod::EslmodAnnotation;
pub use gateway::{BackendKind, Gateway, PromptRequest, SchemaTag};
pub use quality::{Granularity, SpeakerQualityScores};
pub use schema::{Cell, DialogueAct, Motive};
pub use taxonomy::{Strategy, TaxonomyRegistry};
pub use whow::{JointMatrix, MotiveCounting, ProminencePartition, WhowAnnotation};
