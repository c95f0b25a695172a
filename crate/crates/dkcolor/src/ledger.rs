//! Color-coverage ledger.
//!
//! CC_j(i, x) counts the members of A_i that gain, in step j, a neighbor
//! outside A_i ∪ All_i ∪ Big_i⁺ colored x. A step is accepted only when every
//! count stays below the step budget.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::coloring::PartialColoring;
use crate::decomposition::{CliqueInfo, Decomposition};
use crate::graph::Graph;

fn outside(q: &CliqueInfo, w: usize) -> bool {
    !q.contains(w) && q.all.binary_search(&w).is_err() && q.big_plus.binary_search(&w).is_err()
}

/// CC counts of one clique for a set of newly colored vertices.
pub fn clique_counts<'a, I>(graph: &Graph, q: &CliqueInfo, diff: I) -> BTreeMap<u32, u32>
where
    I: IntoIterator<Item = &'a (usize, u32)>,
{
    let mut hit: BTreeMap<u32, BTreeSet<usize>> = BTreeMap::new();
    for &(w, x) in diff {
        if !outside(q, w) {
            continue;
        }
        for &m in graph.neighbors(w) {
            if q.contains(m) {
                hit.entry(x).or_default().insert(m);
            }
        }
    }
    hit.into_iter().map(|(x, s)| (x, s.len() as u32)).collect()
}

/// CC counts for every tracked clique, keyed by (clique, color).
pub fn step_counts(
    graph: &Graph,
    dec: &Decomposition,
    diff: &[(usize, u32)],
    tracked: &[usize],
) -> BTreeMap<(usize, u32), u32> {
    let tracked_set: BTreeSet<usize> = tracked.iter().copied().collect();
    let mut hit: BTreeMap<(usize, u32), BTreeSet<usize>> = BTreeMap::new();
    for &(w, x) in diff {
        for &m in graph.neighbors(w) {
            if let Some(i) = dec.clique_of(m) {
                if tracked_set.contains(&i) && outside(&dec.cliques[i], w) {
                    hit.entry((i, x)).or_default().insert(m);
                }
            }
        }
    }
    hit.into_iter().map(|(k, s)| (k, s.len() as u32)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CcStep {
    pub label: String,
    pub diff: Vec<(usize, u32)>,
    pub tracked: Vec<usize>,
    /// (clique, color, count), ascending.
    pub counts: Vec<(usize, u32, u32)>,
    pub budget: f64,
    pub strong: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CcViolation {
    pub step: usize,
    pub clique: usize,
    pub color: u32,
    pub count: u32,
    pub budget: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CcLedger {
    base_budget: f64,
    steps: Vec<CcStep>,
}

impl CcLedger {
    pub fn new(base_budget: f64) -> Self {
        Self { base_budget, steps: Vec::new() }
    }

    pub fn base_budget(&self) -> f64 {
        self.base_budget
    }

    pub fn steps(&self) -> &[CcStep] {
        &self.steps
    }

    pub fn budget(&self, strong: bool) -> f64 {
        if strong {
            2.0 * self.base_budget
        } else {
            self.base_budget
        }
    }

    /// Appends one step; returns the entries at or above budget.
    pub fn record(
        &mut self,
        label: &str,
        diff: &[(usize, u32)],
        tracked: &[usize],
        graph: &Graph,
        dec: &Decomposition,
        strong: bool,
    ) -> Vec<CcViolation> {
        let counts = step_counts(graph, dec, diff, tracked);
        let budget = self.budget(strong);
        let step = self.steps.len();
        let violations = counts
            .iter()
            .filter(|(_, &n)| n as f64 >= budget)
            .map(|(&(clique, color), &count)| CcViolation { step, clique, color, count, budget })
            .collect();
        let mut diff = diff.to_vec();
        diff.sort_unstable();
        let mut tracked = tracked.to_vec();
        tracked.sort_unstable();
        self.steps.push(CcStep {
            label: label.to_string(),
            diff,
            tracked,
            counts: counts.into_iter().map(|((i, x), n)| (i, x, n)).collect(),
            budget,
            strong,
        });
        violations
    }

    /// Recomputes every step from its diff; true iff all counts agree.
    pub fn replay(&self, graph: &Graph, dec: &Decomposition) -> bool {
        self.steps.iter().all(|s| {
            let again: Vec<(usize, u32, u32)> = step_counts(graph, dec, &s.diff, &s.tracked)
                .into_iter()
                .map(|((i, x), n)| (i, x, n))
                .collect();
            again == s.counts
        })
    }

    pub fn violations(&self) -> Vec<CcViolation> {
        let mut out = Vec::new();
        for (j, s) in self.steps.iter().enumerate() {
            for &(clique, color, count) in &s.counts {
                if count as f64 >= s.budget {
                    out.push(CcViolation { step: j, clique, color, count, budget: s.budget });
                }
            }
        }
        out
    }

    /// Largest count / budget over all recorded entries.
    pub fn max_utilization(&self) -> f64 {
        self.steps
            .iter()
            .flat_map(|s| s.counts.iter().map(move |&(_, _, n)| n as f64 / s.budget))
            .fold(0.0, f64::max)
    }
}

/// Members of A_i having a neighbor outside A_i ∪ All_i colored x before the
/// clique itself was colored. Recounted from the coloring alone; Big_i⁺
/// neighbors are included.
pub fn cumulative_cc(graph: &Graph, q: &CliqueInfo, coloring: &PartialColoring, x: u32) -> usize {
    let cutoff = q.members.iter().filter_map(|&m| coloring.colored_at(m)).min().unwrap_or(u32::MAX);
    q.members
        .iter()
        .filter(|&&m| {
            graph.neighbors(m).iter().any(|&w| {
                !q.contains(w)
                    && q.all.binary_search(&w).is_err()
                    && coloring.get(w) == Some(x)
                    && coloring.colored_at(w).is_some_and(|s| s < cutoff)
            })
        })
        .count()
}

/// Maximum of `cumulative_cc` over all colors for one clique.
pub fn max_cumulative_cc(graph: &Graph, q: &CliqueInfo, coloring: &PartialColoring) -> (u32, usize) {
    (1..=coloring.c())
        .map(|x| (x, cumulative_cc(graph, q, coloring, x)))
        .max_by_key(|&(x, n)| (n, std::cmp::Reverse(x)))
        .unwrap_or((0, 0))
}
