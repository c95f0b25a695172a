//! Planted-structure instances already in decomposed form.
//!
//! Construction, per draw:
//! - each clique gets a size in [c − ⌊√Δ/2⌋, c]; its All_i is c − |A_i|
//!   dedicated B vertices (B_H for H cliques, B_L for L cliques) forming a
//!   clique that is complete to A_i;
//! - every clique member receives at most `ext_budget` external neighbors:
//!   at most one in its partner clique (cliques 2t and 2t+1 of a tier are
//!   partners), at most two in S, the rest in the free B_H vertices;
//! - free B_H vertices get S-degree in [Δ/4, ⌈c − Δ^{3/4}⌉ − 4] and at most
//!   three B_H neighbors;
//! - S is a stub-matched random graph with degrees in
//!   [s_degree_lo·Δ, ⌈Δ − 3√Δ⌉ − 1].
//!
//! Every vertex ends with degree ≤ Δ. Big_i⁺ is computed; a draw whose Big_i⁺
//! is not a clique is rejected and redrawn.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{compute_big_plus, validate, CliqueInfo, Decomposition, Tier, ValidationReport};
use crate::constants::{AnalysisConstants, Thresholds};
use crate::graph::{min_colors, Graph};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub n: usize,
    pub delta: u64,
    pub c: u32,
    pub h_cliques: usize,
    pub l_cliques: usize,
    pub free_bh: usize,
    /// Lower end of the S-degree window as a fraction of Δ.
    pub s_degree_lo: f64,
    /// Cross edges between partner cliques.
    pub cross_edges: usize,
    pub seed: u64,
}

impl GenParams {
    /// Pure sparse instance with c = Δ − k_Δ + 1.
    pub fn sparse(n: usize, delta: u64, seed: u64) -> Self {
        let c = min_colors(delta.max(2)).unwrap_or(1);
        Self { n, delta, c, h_cliques: 0, l_cliques: 0, free_bh: 0, s_degree_lo: 0.4, cross_edges: 0, seed }
    }

    /// Mixed instance: roughly 30% of n in H cliques, 18% in L cliques and
    /// 8% free B_H.
    pub fn mixed(n: usize, delta: u64, seed: u64) -> Self {
        let mut p = Self::sparse(n, delta, seed);
        let c = p.c as usize;
        p.h_cliques = (3 * n / 10) / c.max(1);
        p.l_cliques = (18 * n / 100) / c.max(1);
        p.free_bh = 8 * n / 100;
        p.cross_edges = ((delta as f64).sqrt() / 4.0).floor() as usize;
        p
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
    #[error("generated instance failed validation: {0:?}")]
    Invalid(Box<ValidationReport>),
    #[error("Big+ not a clique after {0} redraws")]
    BigPlusRejected(usize),
}

const MAX_REDRAWS: usize = 16;

struct Builder {
    delta: usize,
    adj: Vec<Vec<usize>>,
    edges: HashSet<(usize, usize)>,
}

impl Builder {
    fn new(n: usize, delta: usize) -> Self {
        Self { delta, adj: vec![Vec::new(); n], edges: HashSet::new() }
    }

    fn has(&self, u: usize, v: usize) -> bool {
        self.edges.contains(&(u.min(v), u.max(v)))
    }

    fn room(&self, v: usize) -> usize {
        self.delta - self.adj[v].len()
    }

    fn add(&mut self, u: usize, v: usize) -> bool {
        if u == v || self.has(u, v) || self.room(u) == 0 || self.room(v) == 0 {
            return false;
        }
        self.edges.insert((u.min(v), u.max(v)));
        self.adj[u].push(v);
        self.adj[v].push(u);
        true
    }
}

fn check_feasible(p: &GenParams) -> Result<(), GenError> {
    if p.delta < 4 {
        return Err(GenError::Infeasible(format!("delta = {} < 4", p.delta)));
    }
    let lo = min_colors(p.delta).map_err(|e| GenError::Infeasible(e.to_string()))?;
    if p.c < lo {
        return Err(GenError::Infeasible(format!("c = {} < Δ − k_Δ + 1 = {lo}", p.c)));
    }
    if p.c as u64 > p.delta + 1 {
        return Err(GenError::Infeasible(format!("c = {} > Δ + 1", p.c)));
    }
    let cliques = p.h_cliques + p.l_cliques;
    let need = cliques * p.c as usize + p.free_bh;
    if need > p.n {
        return Err(GenError::Infeasible(format!(
            "cliques and their All sets need up to {need} vertices, n = {}",
            p.n
        )));
    }
    if !(0.0..=1.0).contains(&p.s_degree_lo) {
        return Err(GenError::Infeasible(format!("s_degree_lo = {} outside [0, 1]", p.s_degree_lo)));
    }
    let s_count = p.n - need;
    let bh_outside = p.c as f64 - (p.delta as f64).powf(0.75);
    if p.free_bh > 0 && bh_outside <= 1.0 {
        return Err(GenError::Infeasible(format!("free B_H vertices need c − Δ^(3/4) > 1, got {bh_outside:.2}")));
    }
    if p.free_bh > 0 && s_count < (p.delta as usize) / 4 {
        return Err(GenError::Infeasible(format!(
            "free B_H vertices need at least Δ/4 = {} sparse vertices, have at least {s_count}",
            p.delta / 4
        )));
    }
    Ok(())
}

/// Draws an instance and checks it with `validate`.
pub fn generate(p: &GenParams, k: &AnalysisConstants) -> Result<(Graph, Decomposition), GenError> {
    check_feasible(p)?;
    let th = Thresholds::new(k, p.delta, p.c);
    for attempt in 0..MAX_REDRAWS {
        let seed = p.seed.wrapping_add((attempt as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let (graph, dec) = draw(p, seed, &th)?;
        let bigplus_ok = dec.cliques.iter().all(|q| {
            q.big_plus
                .iter()
                .enumerate()
                .all(|(i, &a)| q.big_plus[i + 1..].iter().all(|&b| graph.has_edge(a, b)))
        });
        if !bigplus_ok {
            continue;
        }
        let report = validate(&graph, &dec, p.c, k);
        if !report.passed {
            return Err(GenError::Invalid(Box::new(report)));
        }
        return Ok((graph, dec));
    }
    Err(GenError::BigPlusRejected(MAX_REDRAWS))
}

fn draw(p: &GenParams, seed: u64, th: &Thresholds) -> Result<(Graph, Decomposition), GenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let delta = p.delta as usize;
    let c = p.c as usize;
    let sq = (p.delta as f64).sqrt();
    let half_sq = (sq / 2.0).floor() as usize;
    let ext_budget = half_sq.min(delta + 1 - c);

    let mut next = 0usize;
    let mut take = |k: usize| {
        let r: Vec<usize> = (next..next + k).collect();
        next += k;
        r
    };

    let n_cliques = p.h_cliques + p.l_cliques;
    let mut cliques = Vec::with_capacity(n_cliques);
    let (mut b_h, mut b_l) = (Vec::new(), Vec::new());
    for i in 0..n_cliques {
        let tier = if i < p.h_cliques { Tier::H } else { Tier::L };
        let size = rng.gen_range(c.saturating_sub(half_sq).max(1)..=c);
        let members = take(size);
        let all = take(c - size);
        match tier {
            Tier::H => b_h.extend(&all),
            Tier::L => b_l.extend(&all),
        }
        cliques.push(CliqueInfo { id: i, members, all, big_plus: Vec::new(), tier });
    }
    let free_bh = take(p.free_bh);
    b_h.extend(&free_bh);
    let s: Vec<usize> = (next..p.n).collect();

    let mut b = Builder::new(p.n, delta);
    for q in &cliques {
        let closed: Vec<usize> = q.members.iter().chain(&q.all).copied().collect();
        for (i, &u) in closed.iter().enumerate() {
            for &v in &closed[i + 1..] {
                b.add(u, v);
            }
        }
    }

    let mut ext_left: Vec<usize> = vec![0; p.n];
    for q in &cliques {
        for &v in &q.members {
            ext_left[v] = rng.gen_range(0..=ext_budget);
        }
    }

    // partner cross edges, a partial matching
    for tier_ids in [0..p.h_cliques, p.h_cliques..n_cliques] {
        let ids: Vec<usize> = tier_ids.collect();
        for pair in ids.chunks(2) {
            if pair.len() < 2 {
                continue;
            }
            let mut left: Vec<usize> =
                cliques[pair[0]].members.iter().copied().filter(|&v| ext_left[v] > 0).collect();
            let mut right: Vec<usize> =
                cliques[pair[1]].members.iter().copied().filter(|&v| ext_left[v] > 0).collect();
            left.shuffle(&mut rng);
            right.shuffle(&mut rng);
            for (&u, &v) in left.iter().zip(&right).take(p.cross_edges) {
                if b.add(u, v) {
                    ext_left[u] -= 1;
                    ext_left[v] -= 1;
                }
            }
        }
    }

    // S stub matching
    let s_hi = ((p.delta as f64 - 3.0 * sq).ceil() as usize).saturating_sub(1);
    let s_lo = ((p.s_degree_lo * p.delta as f64).ceil() as usize).min(s_hi);
    let mut s_deg = vec![0usize; p.n];
    if s.len() >= 2 {
        let mut stubs = Vec::new();
        for &v in &s {
            let t = rng.gen_range(s_lo..=s_hi).min(s.len() - 1);
            stubs.extend(std::iter::repeat(v).take(t));
        }
        stubs.shuffle(&mut rng);
        for pair in stubs.chunks(2) {
            if pair.len() == 2 && b.add(pair[0], pair[1]) {
                s_deg[pair[0]] += 1;
                s_deg[pair[1]] += 1;
            }
        }
    }

    // S neighbors of clique members (at most two each)
    let s_room = |b: &Builder, v: usize| b.room(v) > 0;
    if !s.is_empty() {
        for q in &cliques {
            for &v in &q.members {
                let want = ext_left[v].min(2).min(rng.gen_range(0..=2));
                for _ in 0..want {
                    let w = s[rng.gen_range(0..s.len())];
                    if s_room(&b, w) && b.add(v, w) {
                        ext_left[v] -= 1;
                    }
                }
            }
        }
    }

    // free B_H: S edges, a few B_H edges, then clique members; the
    // non-clique degree stays strictly below c − Δ^{3/4}
    let bh_cap = (th.bh_outside.ceil().max(0.0) as usize).saturating_sub(1);
    let mut outside_deg = vec![0usize; p.n];
    if !s.is_empty() {
        let hi = bh_cap.saturating_sub(3);
        let lo = (delta / 4).min(hi);
        for &w in &free_bh {
            let t = rng.gen_range(lo..=hi);
            let mut tries = 0;
            let mut got = 0;
            while got < t && tries < 8 * t + 8 {
                tries += 1;
                let x = s[rng.gen_range(0..s.len())];
                if b.add(w, x) {
                    got += 1;
                }
            }
            outside_deg[w] = got;
        }
    }
    let mut bh_bh = vec![0usize; p.n];
    if free_bh.len() >= 2 {
        for &w in &free_bh {
            let want = rng.gen_range(0..=3usize);
            for _ in 0..want {
                let x = free_bh[rng.gen_range(0..free_bh.len())];
                let fits = |y: usize| bh_bh[y] < 3 && outside_deg[y] < bh_cap;
                if fits(w) && fits(x) && b.add(w, x) {
                    bh_bh[w] += 1;
                    bh_bh[x] += 1;
                    outside_deg[w] += 1;
                    outside_deg[x] += 1;
                }
            }
        }
    }
    if !free_bh.is_empty() {
        for q in cliques.iter().filter(|q| q.tier == Tier::H) {
            let mut per_bh = std::collections::HashMap::<usize, usize>::new();
            for &v in &q.members {
                let mut tries = 0;
                while ext_left[v] > 0 && tries < 8 {
                    tries += 1;
                    let w = free_bh[rng.gen_range(0..free_bh.len())];
                    let used = per_bh.get(&w).copied().unwrap_or(0);
                    if used < 2 && b.add(v, w) {
                        ext_left[v] -= 1;
                        *per_bh.entry(w).or_default() += 1;
                    }
                }
            }
        }
    }

    let mut edges: Vec<(usize, usize)> = b.edges.into_iter().collect();
    edges.sort_unstable();
    let graph = Graph::from_edges(p.n, p.delta, &edges).map_err(|e| GenError::Infeasible(e.to_string()))?;
    for q in &mut cliques {
        q.big_plus = compute_big_plus(&graph, q, th);
    }
    let dec = Decomposition::new(p.n, s, b_h, b_l, cliques).map_err(|e| GenError::Infeasible(e.to_string()))?;
    Ok((graph, dec))
}
