use serde::{Deserialize, Serialize};

use super::{compute_big_plus, Decomposition, Part, Tier};
use crate::constants::{AnalysisConstants, Thresholds};
use crate::graph::Graph;
use crate::par;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleId {
    /// (1) sparse vertices: low degree, or bounded degree with many non-edges.
    SparseDegree,
    /// (2) B_H: fewer than c − Δ^{3/4} neighbors outside the cliques.
    BhOutside,
    /// (3) H-clique external degree.
    ExtDegreeH,
    /// (4) B_L: some clique leaves at most c − √Δ + 9 outside neighbors.
    BlOutside,
    /// (5) L-clique external degree.
    ExtDegreeL,
    /// (a) A_i is a clique.
    CliqueEdge,
    /// (a) size window [c − coeff·√Δ, c].
    CliqueSize,
    /// (b) All_i adjacent to every member.
    AllAdjacent,
    /// (b) |All_i| = c − |A_i|.
    AllSize,
    /// (c) declared Big_i⁺ equals the computed set.
    BigPlusMismatch,
    /// (c) Big_i⁺ is a clique.
    BigPlusClique,
    /// (c) Big_i⁺ members have at most (3/4)Δ + coeff·√Δ neighbors in A_i.
    BigPlusDegree,
    /// Degree in F at most coeff·Δ.
    FDegree,
    /// Π(a): uncolored clique vertex with more than U neighbors in H ∖ All_i.
    PiousA,
    /// Π(b): palette smaller than deg_H + U·Δ^{0.22}.
    PiousB,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: RuleId,
    pub witness: Vec<usize>,
    pub measured: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub passed: bool,
}

impl ValidationReport {
    pub fn from_violations(mut violations: Vec<Violation>) -> Self {
        violations.sort_by(|a, b| a.rule.cmp(&b.rule).then(a.witness.cmp(&b.witness)));
        let passed = violations.is_empty();
        Self { violations, passed }
    }

    pub fn rules(&self) -> Vec<RuleId> {
        let mut r: Vec<RuleId> = self.violations.iter().map(|v| v.rule).collect();
        r.dedup();
        r
    }
}

fn nonedge_pairs(graph: &Graph, verts: &[usize]) -> usize {
    let mut missing = 0;
    for (i, &a) in verts.iter().enumerate() {
        for &b in &verts[i + 1..] {
            if !graph.has_edge(a, b) {
                missing += 1;
            }
        }
    }
    missing
}

/// Checks every decomposition rule. The caller guarantees the partition is
/// well formed (`Decomposition::new` enforces it).
pub fn validate(graph: &Graph, d: &Decomposition, c: u32, k: &AnalysisConstants) -> ValidationReport {
    let th = Thresholds::new(k, graph.delta(), c);
    let n = graph.n();
    let in_s: Vec<bool> = d.membership.iter().map(|p| *p == Part::S).collect();

    let per_vertex: Vec<Vec<Violation>> = par::map_range(n, |v| {
        let mut out = Vec::new();
        let deg = graph.degree(v) as f64;
        if deg > th.f_degree {
            out.push(Violation { rule: RuleId::FDegree, witness: vec![v], measured: deg, bound: th.f_degree });
        }
        match d.membership[v] {
            Part::S => {
                let ns: Vec<usize> = graph.neighbors(v).iter().copied().filter(|&w| in_s[w]).collect();
                let ds = ns.len() as f64;
                if ds >= th.sparse_deg {
                    let ne = nonedge_pairs(graph, &ns) as f64;
                    if ds > th.delta || ne < th.sparse_nonedges {
                        out.push(Violation {
                            rule: RuleId::SparseDegree,
                            witness: vec![v],
                            measured: ne,
                            bound: th.sparse_nonedges,
                        });
                    }
                }
            }
            Part::BH => {
                let outside =
                    graph.neighbors(v).iter().filter(|&&w| d.clique_of(w).is_none()).count() as f64;
                if outside >= th.bh_outside {
                    out.push(Violation { rule: RuleId::BhOutside, witness: vec![v], measured: outside, bound: th.bh_outside });
                }
            }
            Part::BL => {
                let mut best = f64::INFINITY;
                let mut cands: Vec<usize> = graph.neighbors(v).iter().filter_map(|&w| d.clique_of(w)).collect();
                cands.sort_unstable();
                cands.dedup();
                for i in cands {
                    let outside = graph.neighbors(v).iter().filter(|&&w| d.clique_of(w) != Some(i)).count() as f64;
                    best = best.min(outside);
                }
                if best > th.bl_outside {
                    out.push(Violation { rule: RuleId::BlOutside, witness: vec![v], measured: best, bound: th.bl_outside });
                }
            }
            Part::Clique(_) => {}
        }
        out
    });
    let mut violations: Vec<Violation> = per_vertex.into_iter().flatten().collect();

    let per_clique: Vec<Vec<Violation>> = par::map(&d.cliques, |q| {
        let mut out = Vec::new();
        let size = q.members.len() as f64;
        if size < th.clique_min || size > c as f64 {
            out.push(Violation {
                rule: RuleId::CliqueSize,
                witness: vec![q.id],
                measured: size,
                bound: if size > c as f64 { c as f64 } else { th.clique_min },
            });
        }
        for (a_idx, &a) in q.members.iter().enumerate() {
            for &b in &q.members[a_idx + 1..] {
                if !graph.has_edge(a, b) {
                    out.push(Violation { rule: RuleId::CliqueEdge, witness: vec![a, b], measured: 0.0, bound: 1.0 });
                }
            }
        }
        let want_all = c as f64 - size;
        if q.all.len() as f64 != want_all {
            out.push(Violation { rule: RuleId::AllSize, witness: vec![q.id], measured: q.all.len() as f64, bound: want_all });
        }
        for &w in &q.all {
            let hits = q.members.iter().filter(|&&m| graph.has_edge(w, m)).count();
            if hits != q.members.len() {
                let miss = q.members.iter().copied().find(|&m| !graph.has_edge(w, m)).unwrap();
                out.push(Violation {
                    rule: RuleId::AllAdjacent,
                    witness: vec![w, miss],
                    measured: hits as f64,
                    bound: size,
                });
            }
        }
        let (rule, bound) = match q.tier {
            Tier::H => (RuleId::ExtDegreeH, th.ext_h),
            Tier::L => (RuleId::ExtDegreeL, th.ext_l),
        };
        for &v in &q.members {
            let ext = graph
                .neighbors(v)
                .iter()
                .filter(|&&w| !q.contains(w) && q.all.binary_search(&w).is_err())
                .count() as f64;
            if ext > bound {
                out.push(Violation { rule, witness: vec![v], measured: ext, bound });
            }
        }
        let computed = compute_big_plus(graph, q, &th);
        if computed != q.big_plus {
            let mut diff: Vec<usize> = computed
                .iter()
                .filter(|w| q.big_plus.binary_search(w).is_err())
                .chain(q.big_plus.iter().filter(|w| computed.binary_search(w).is_err()))
                .copied()
                .collect();
            diff.sort_unstable();
            out.push(Violation {
                rule: RuleId::BigPlusMismatch,
                witness: diff,
                measured: q.big_plus.len() as f64,
                bound: computed.len() as f64,
            });
        }
        for (i, &a) in q.big_plus.iter().enumerate() {
            for &b in &q.big_plus[i + 1..] {
                if !graph.has_edge(a, b) {
                    out.push(Violation { rule: RuleId::BigPlusClique, witness: vec![a, b], measured: 0.0, bound: 1.0 });
                }
            }
            let into = q.members.iter().filter(|&&m| graph.has_edge(a, m)).count() as f64;
            if into > th.big_plus_max {
                out.push(Violation { rule: RuleId::BigPlusDegree, witness: vec![a], measured: into, bound: th.big_plus_max });
            }
        }
        out
    });
    violations.extend(per_clique.into_iter().flatten());
    ValidationReport::from_violations(violations)
}
