//! Simulator for the (Δ − k_Δ + 1)-coloring pipeline in the LOCAL model.
//!
//! The pipeline colors a graph that arrives already split into a sparse part,
//! two tiers of dense cliques and the buffer vertices between them. Every
//! randomized stage runs through a shattering engine: sample, retract the
//! variables of bad events, then repair the small leftover components by
//! resampling. An audit layer rechecks the deterministic guarantees of each
//! stage and the color-coverage ledger.

pub mod audit;
pub mod coloring;
pub mod constants;
pub mod decomposition;
pub mod graph;
pub mod ledger;
pub mod lll;
pub mod par;
pub mod rng;
pub mod runner;
pub mod stages;
pub mod stats;

pub use coloring::{palette, slack, PartialColoring};
pub use constants::{AnalysisConstants, Thresholds};
pub use decomposition::{CliqueInfo, Decomposition, Part, Tier};
pub use graph::{k_delta, DomainError, Graph};
pub use rng::NodeRng;
