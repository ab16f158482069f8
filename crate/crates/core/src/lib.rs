//! Tactic taxonomy, axiom auditing, ablation configs and proof-space
//! geometry for Lean proof corpora, plus a phase-driven proving loop over
//! abstract agent and checker providers.

pub mod ablation;
pub mod axiom_audit;
pub mod clustering;
pub mod corpus;
pub mod geometry;
pub mod json;
pub mod lexer;
pub mod linalg;
pub mod orchestrator;
pub mod taxonomy;

pub use ablation::{AblationConfig, ProjectCorpus, SliceSelector};
pub use axiom_audit::{ProbeKind, ProbeResult, ProbeSource};
pub use clustering::{Ellipse, GmmModel};
pub use corpus::{Condition, Corpus, DistanceMatrix, LayerStack, ProofRecord};
pub use geometry::MdsSolution;
pub use orchestrator::{Budget, Goal, Outcome, Phase, Trace};
pub use taxonomy::{AbstractionLevel, AxiomSet, AxiomTier, FunctionalCategory, TacticDb, TacticRecord};
