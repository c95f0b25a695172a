//! Single-fault injection for the validator's mutation suite.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Decomposition, Part, RuleId, Tier};
use crate::constants::{AnalysisConstants, Thresholds};
use crate::graph::Graph;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FaultKind {
    CliqueEdgeRemoval,
    AllDetach,
    AllSizeMismatch,
    SparsityDestruction,
    ExtInflationH,
    ExtInflationL,
    BhOverload,
    BlOverload,
    BigPlusUndeclared,
    CliqueUndersize,
}

pub const ALL_FAULTS: [FaultKind; 10] = [
    FaultKind::CliqueEdgeRemoval,
    FaultKind::AllDetach,
    FaultKind::AllSizeMismatch,
    FaultKind::SparsityDestruction,
    FaultKind::ExtInflationH,
    FaultKind::ExtInflationL,
    FaultKind::BhOverload,
    FaultKind::BlOverload,
    FaultKind::BigPlusUndeclared,
    FaultKind::CliqueUndersize,
];

impl FaultKind {
    pub fn expected_rule(self) -> RuleId {
        match self {
            FaultKind::CliqueEdgeRemoval => RuleId::CliqueEdge,
            FaultKind::AllDetach => RuleId::AllAdjacent,
            FaultKind::AllSizeMismatch => RuleId::AllSize,
            FaultKind::SparsityDestruction => RuleId::SparseDegree,
            FaultKind::ExtInflationH => RuleId::ExtDegreeH,
            FaultKind::ExtInflationL => RuleId::ExtDegreeL,
            FaultKind::BhOverload => RuleId::BhOutside,
            FaultKind::BlOverload => RuleId::BlOutside,
            FaultKind::BigPlusUndeclared => RuleId::BigPlusMismatch,
            FaultKind::CliqueUndersize => RuleId::CliqueSize,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Mutation {
    pub kind: FaultKind,
    pub graph: Graph,
    pub dec: Decomposition,
    pub expected: RuleId,
    pub witness: Vec<usize>,
}

fn rebuild(graph: &Graph, add: &[(usize, usize)], remove: &[(usize, usize)]) -> Graph {
    let mut edges = graph.edges();
    let drop: std::collections::HashSet<(usize, usize)> =
        remove.iter().map(|&(u, v)| (u.min(v), u.max(v))).collect();
    edges.retain(|e| !drop.contains(e));
    edges.extend(add.iter().filter(|(u, v)| u != v));
    Graph::from_edges(graph.n(), graph.delta(), &edges).expect("mutation keeps ids in range")
}

/// Fresh S-neighbors for `v` until it has `want` more non-members of `avoid`.
fn extra_s_edges(graph: &Graph, dec: &Decomposition, v: usize, want: usize, rng: &mut ChaCha8Rng) -> Option<Vec<(usize, usize)>> {
    let mut pool: Vec<usize> = dec.s.iter().copied().filter(|&w| w != v && !graph.has_edge(v, w)).collect();
    if pool.len() < want {
        return None;
    }
    pool.shuffle(rng);
    Some(pool[..want].iter().map(|&w| (v, w)).collect())
}

/// Applies one fault of `kind`. `None` when the instance has no site for it
/// (e.g. no L clique) or the constants make it unreachable.
pub fn inject(
    graph: &Graph,
    dec: &Decomposition,
    kind: FaultKind,
    c: u32,
    k: &AnalysisConstants,
    seed: u64,
) -> Option<Mutation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let th = Thresholds::new(k, graph.delta(), c);
    let pick_clique = |rng: &mut ChaCha8Rng, f: &dyn Fn(&super::CliqueInfo) -> bool| {
        let ids: Vec<usize> = dec.cliques.iter().filter(|q| f(q)).map(|q| q.id).collect();
        ids.choose(rng).copied()
    };
    let mut new_dec = dec.clone();
    let (g, witness) = match kind {
        FaultKind::CliqueEdgeRemoval => {
            let i = pick_clique(&mut rng, &|q| q.members.len() >= 2)?;
            let m = &dec.cliques[i].members;
            let a = rng.gen_range(0..m.len());
            let mut b = rng.gen_range(0..m.len() - 1);
            if b >= a {
                b += 1;
            }
            let (u, v) = (m[a].min(m[b]), m[a].max(m[b]));
            (rebuild(graph, &[], &[(u, v)]), vec![u, v])
        }
        FaultKind::AllDetach => {
            let i = pick_clique(&mut rng, &|q| !q.all.is_empty())?;
            let q = &dec.cliques[i];
            let w = *q.all.choose(&mut rng)?;
            let m = *q.members.choose(&mut rng)?;
            (rebuild(graph, &[], &[(w, m)]), vec![w, m])
        }
        FaultKind::AllSizeMismatch => {
            let i = pick_clique(&mut rng, &|q| !q.all.is_empty())?;
            let w = new_dec.cliques[i].all.pop()?;
            (graph.clone(), vec![i, w])
        }
        FaultKind::SparsityDestruction => {
            let delta = graph.delta() as usize;
            if dec.s.len() <= delta {
                return None;
            }
            let v = *dec.s.choose(&mut rng)?;
            let mut pool: Vec<usize> = dec.s.iter().copied().filter(|&w| w != v).collect();
            pool.shuffle(&mut rng);
            let nb = &pool[..delta];
            // keep only S-neighbors from nb so deg_S(v) = Δ and all pairs adjacent
            let remove: Vec<(usize, usize)> = graph
                .neighbors(v)
                .iter()
                .filter(|&&w| dec.membership[w] == Part::S && !nb.contains(&w))
                .map(|&w| (v, w))
                .collect();
            let mut add: Vec<(usize, usize)> = nb.iter().map(|&w| (v, w)).collect();
            for (i, &a) in nb.iter().enumerate() {
                for &b in &nb[i + 1..] {
                    add.push((a, b));
                }
            }
            (rebuild(graph, &add, &remove), vec![v])
        }
        FaultKind::ExtInflationH | FaultKind::ExtInflationL => {
            let (tier, bound) = if kind == FaultKind::ExtInflationH { (Tier::H, th.ext_h) } else { (Tier::L, th.ext_l) };
            let i = pick_clique(&mut rng, &|q| q.tier == tier)?;
            let v = *dec.cliques[i].members.choose(&mut rng)?;
            let q = &dec.cliques[i];
            let ext = graph.neighbors(v).iter().filter(|&&w| !q.contains(w) && q.all.binary_search(&w).is_err()).count();
            let want = (bound.floor() as usize + 1).saturating_sub(ext);
            let add = extra_s_edges(graph, dec, v, want, &mut rng)?;
            (rebuild(graph, &add, &[]), vec![v])
        }
        FaultKind::BhOverload => {
            let v = *dec.b_h.choose(&mut rng)?;
            let outside = graph.neighbors(v).iter().filter(|&&w| dec.clique_of(w).is_none()).count();
            let want = (th.bh_outside.ceil().max(0.0) as usize).saturating_sub(outside);
            let add = extra_s_edges(graph, dec, v, want, &mut rng)?;
            (rebuild(graph, &add, &[]), vec![v])
        }
        FaultKind::BlOverload => {
            let v = *dec.b_l.choose(&mut rng)?;
            let want = th.bl_outside.floor().max(0.0) as usize + 1;
            let add = extra_s_edges(graph, dec, v, want, &mut rng)?;
            (rebuild(graph, &add, &[]), vec![v])
        }
        FaultKind::BigPlusUndeclared => {
            let need = th.big_plus_min.ceil().max(1.0) as usize;
            let i = pick_clique(&mut rng, &|q| q.members.len() >= need)?;
            let w = *dec.s.choose(&mut rng)?;
            let add: Vec<(usize, usize)> = dec.cliques[i].members[..need].iter().map(|&m| (w, m)).collect();
            (rebuild(graph, &add, &[]), vec![w])
        }
        FaultKind::CliqueUndersize => {
            let i = pick_clique(&mut rng, &|_| true)?;
            let drop = (c as f64 - th.clique_min).floor().max(0.0) as usize + 1;
            let q = &mut new_dec.cliques[i];
            if q.members.len() <= drop {
                return None;
            }
            let moved: Vec<usize> = q.members.split_off(q.members.len() - drop);
            new_dec.s.extend(&moved);
            new_dec = Decomposition::new(
                dec.n(),
                new_dec.s.clone(),
                new_dec.b_h.clone(),
                new_dec.b_l.clone(),
                new_dec.cliques.clone(),
            )
            .ok()?;
            (graph.clone(), vec![i])
        }
    };
    Some(Mutation { kind, graph: g, dec: new_dec, expected: kind.expected_rule(), witness })
}
