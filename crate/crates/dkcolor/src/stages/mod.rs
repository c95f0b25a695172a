//! The five coloring stages and their shared plumbing.

pub mod cliques;
pub mod matching;
pub mod slack;
pub mod sparse;
pub mod trial;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audit::AuditReport;
use crate::coloring::PartialColoring;
use crate::constants::{AnalysisConstants, Thresholds};
use crate::decomposition::{Decomposition, ValidationReport};
use crate::graph::Graph;
use crate::ledger::{CcLedger, CcViolation};
use crate::lll::{LllError, ShatterOutcome};
use crate::rng::NodeRng;

pub const STAGE_RCT: u32 = 1;
pub const STAGE_MCT: u32 = 2;
pub const STAGE_SLACKGEN: u32 = 3;
pub const STAGE_SPLIT: u32 = 4;
pub const STAGE_SCT: u32 = 5;
pub const STAGE_SUBSAMPLE: u32 = 6;

pub const PHASE_PRE: u32 = 0;
pub const PHASE_POST: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq, Serialize, Deserialize)]
pub enum StageError {
    #[error("{stage}: precondition failed: {detail}")]
    Precondition { stage: String, detail: String },
    #[error("{stage}: invariant breach: {detail}")]
    Invariant { stage: String, detail: String },
    #[error("{stage}: Property Π violated ({} violations)", report.violations.len())]
    Pious { stage: String, report: Box<ValidationReport> },
    #[error("{stage}: iteration cap {cap} reached; worst degrees {worst:?}")]
    CapReached { stage: String, cap: u64, worst: Vec<(usize, usize)> },
    #[error("clique {clique}: no saturating matching, Hall violator {violator:?}")]
    Hall { clique: usize, violator: Vec<usize> },
    #[error("{stage}: monochromatic edge ({u}, {v})")]
    Properness { stage: String, u: usize, v: usize },
    #[error("{stage}: CC budget exceeded {violations:?}")]
    CcBreach { stage: String, violations: Vec<CcViolation> },
    #[error(transparent)]
    Lll(#[from] LllError),
}

impl StageError {
    pub fn precondition(stage: &str, detail: impl Into<String>) -> Self {
        StageError::Precondition { stage: stage.to_string(), detail: detail.into() }
    }

    pub fn invariant(stage: &str, detail: impl Into<String>) -> Self {
        StageError::Invariant { stage: stage.to_string(), detail: detail.into() }
    }
}

/// Permutation of vertex iteration order. Results must not depend on it.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    rank: Option<Vec<usize>>,
}

impl Schedule {
    pub fn identity() -> Self {
        Self { rank: None }
    }

    pub fn shuffled(n: usize, seed: u64) -> Self {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let mut rank = vec![0; n];
        for (i, &v) in perm.iter().enumerate() {
            rank[v] = i;
        }
        Self { rank: Some(rank) }
    }

    /// `verts` in schedule order.
    pub fn order(&self, verts: &[usize]) -> Vec<usize> {
        let mut out = verts.to_vec();
        if let Some(rank) = &self.rank {
            out.sort_by_key(|&v| rank[v]);
        }
        out
    }
}

/// Immutable inputs shared by every stage.
pub struct Ctx<'a> {
    pub graph: &'a Graph,
    pub dec: &'a Decomposition,
    pub k: &'a AnalysisConstants,
    pub th: Thresholds,
    pub rng: NodeRng,
    pub schedule: Schedule,
}

impl<'a> Ctx<'a> {
    pub fn new(graph: &'a Graph, dec: &'a Decomposition, k: &'a AnalysisConstants, c: u32, seed: u64) -> Self {
        Self {
            graph,
            dec,
            k,
            th: Thresholds::new(k, graph.delta(), c),
            rng: NodeRng::new(seed),
            schedule: Schedule::identity(),
        }
    }

    pub fn with_schedule(mut self, schedule: Schedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn component_cap(&self) -> usize {
        (self.n() / 20).max(1)
    }
}

/// Mutable pipeline state.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct State {
    pub coloring: PartialColoring,
    pub ledger: CcLedger,
    /// Counter keying the node RNG per shattered invocation.
    pub round: u32,
    pub outcomes: Vec<ShatterOutcome>,
    pub audits: Vec<AuditReport>,
    pub rounds_simulated: u64,
}

impl State {
    pub fn new(ctx: &Ctx<'_>) -> Self {
        Self {
            coloring: PartialColoring::new(ctx.n(), ctx.th.c),
            ledger: CcLedger::new(ctx.th.cc_budget),
            round: 0,
            outcomes: Vec::new(),
            audits: Vec::new(),
            rounds_simulated: 0,
        }
    }

    pub fn next_round(&mut self) -> u32 {
        self.round += 1;
        self.round
    }

    pub fn absorb(&mut self, outcome: ShatterOutcome) {
        self.rounds_simulated += outcome.rounds;
        self.outcomes.push(outcome);
    }

    /// Cliques with no colored member, excluding `skip`.
    pub fn uncolored_cliques(&self, ctx: &Ctx<'_>, skip: &[usize]) -> Vec<usize> {
        ctx.dec
            .cliques
            .iter()
            .filter(|q| skip.binary_search(&q.id).is_err())
            .filter(|q| q.members.iter().all(|&m| !self.coloring.is_colored(m)))
            .map(|q| q.id)
            .collect()
    }

    /// Applies `diff` as one step after a properness check against the
    /// current coloring and within the diff, then records it in the ledger.
    pub fn commit(
        &mut self,
        ctx: &Ctx<'_>,
        label: &str,
        diff: &[(usize, u32)],
        tracked: &[usize],
        strong: bool,
    ) -> Result<(), StageError> {
        let mut pending = vec![None; ctx.n()];
        for &(v, x) in diff {
            if self.coloring.is_colored(v) {
                return Err(StageError::invariant(label, format!("vertex {v} already colored")));
            }
            pending[v] = Some(x);
        }
        for &(v, x) in diff {
            for &w in ctx.graph.neighbors(v) {
                if self.coloring.get(w) == Some(x) || pending[w] == Some(x) {
                    return Err(StageError::Properness { stage: label.to_string(), u: v.min(w), v: v.max(w) });
                }
            }
        }
        self.coloring.commit(diff);
        let violations = self.ledger.record(label, diff, tracked, ctx.graph, ctx.dec, strong);
        if !violations.is_empty() {
            return Err(StageError::CcBreach { stage: label.to_string(), violations });
        }
        Ok(())
    }
}

/// Uncolored neighbors of `v` inside the mask.
pub fn uncolored_in(ctx: &Ctx<'_>, coloring: &PartialColoring, v: usize, mask: &[bool]) -> usize {
    ctx.graph.neighbors(v).iter().filter(|&&w| mask[w] && !coloring.is_colored(w)).count()
}
