//! Single-color trials with the lower-id retention rule, shared by the RCT
//! stages and slack generation.

use std::collections::BTreeMap;

use crate::coloring::PartialColoring;
use crate::decomposition::{CliqueInfo, Decomposition};
use crate::graph::Graph;
use crate::ledger::clique_counts;
use crate::rng::{coin, pick, round_id, NodeRng};

/// One synchronous trial. `part[v]` marks participants; an active
/// participant proposes a uniform color of its palette.
pub struct Trial<'g> {
    pub graph: &'g Graph,
    pub rng: NodeRng,
    pub stage: u32,
    pub round: u32,
    pub phase: u32,
    pub part: Vec<bool>,
    pub palettes: Vec<Vec<u32>>,
    pub activation: f64,
}

impl<'g> Trial<'g> {
    /// Palettes of the participants from `coloring`, kept inside `range`.
    pub fn new(
        graph: &'g Graph,
        coloring: &PartialColoring,
        participants: &[usize],
        range: (u32, u32),
        activation: f64,
        rng: NodeRng,
        key: (u32, u32, u32),
    ) -> Self {
        let n = graph.n();
        let part = crate::graph::mask(n, participants);
        let pals = crate::par::map(participants, |&v| {
            coloring.palette(v, graph).into_iter().filter(|&x| x >= range.0 && x <= range.1).collect::<Vec<u32>>()
        });
        let mut palettes = vec![Vec::new(); n];
        for (&v, p) in participants.iter().zip(pals) {
            palettes[v] = p;
        }
        Self { graph, rng, stage: key.0, round: key.1, phase: key.2, part, palettes, activation }
    }

    pub fn draw(&self, v: usize, attempt: u32) -> Option<u32> {
        let mut r = self.rng.stream(v, self.stage, round_id(self.round, self.phase, attempt));
        if coin(&mut r, self.activation) {
            pick(&mut r, &self.palettes[v])
        } else {
            None
        }
    }

    /// Active participant with an empty palette, if any.
    pub fn empty_palette(&self) -> Option<usize> {
        (0..self.part.len()).find(|&v| self.part[v] && self.palettes[v].is_empty())
    }

    pub fn lower(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.graph.neighbors(v).iter().copied().take_while(move |&u| u < v).filter(|&u| self.part[u])
    }

    /// v keeps its proposal iff no lower-id participating neighbor proposed
    /// the same color.
    pub fn retained<F: Fn(usize) -> Option<u32>>(&self, v: usize, get: &F) -> Option<u32> {
        if !self.part[v] {
            return None;
        }
        let x = get(v)?;
        if self.lower(v).any(|u| get(u) == Some(x)) {
            None
        } else {
            Some(x)
        }
    }

    /// Variables deciding the retention of `verts`.
    pub fn decide_vbl<I: IntoIterator<Item = usize>>(&self, verts: I) -> Vec<usize> {
        let mut out = Vec::new();
        for w in verts {
            if self.part[w] {
                out.push(w);
                out.extend(self.lower(w));
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Retained colors of every participant, ascending by vertex.
    pub fn retained_all(&self, assign: &[Option<Option<u32>>]) -> Vec<(usize, u32)> {
        let get = |u: usize| assign[u].flatten();
        (0..self.part.len()).filter_map(|v| self.retained(v, &get).map(|x| (v, x))).collect()
    }
}

/// For each listed clique, the participants adjacent to it from outside
/// A_i ∪ All_i ∪ Big_i⁺.
pub fn cc_witnesses(graph: &Graph, dec: &Decomposition, cliques: &[usize], part: &[bool]) -> BTreeMap<usize, Vec<usize>> {
    let mut out = BTreeMap::new();
    for &i in cliques {
        let q = &dec.cliques[i];
        let mut w: Vec<usize> = q
            .members
            .iter()
            .flat_map(|&m| graph.neighbors(m).iter().copied())
            .filter(|&x| part[x] && outside(q, x))
            .collect();
        w.sort_unstable();
        w.dedup();
        out.insert(i, w);
    }
    out
}

pub fn outside(q: &CliqueInfo, w: usize) -> bool {
    !q.contains(w) && q.all.binary_search(&w).is_err() && q.big_plus.binary_search(&w).is_err()
}

/// Largest CC count of clique `q` over a candidate diff.
pub fn max_cc(graph: &Graph, q: &CliqueInfo, diff: &[(usize, u32)]) -> u32 {
    clique_counts(graph, q, diff).values().copied().max().unwrap_or(0)
}
