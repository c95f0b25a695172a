//! Oracles shared by the integration tests. Written against the public data
//! only; none of them call the library routine they check.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use dkcolor::{Decomposition, Graph};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Maximum bipartite matching size by BFS augmenting paths over a residual
/// graph (Edmonds–Karp on unit capacities).
pub fn max_matching_size(cands: &BTreeMap<usize, Vec<usize>>) -> usize {
    let left: Vec<usize> = cands.keys().copied().collect();
    let right: Vec<usize> = cands.values().flatten().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let ri: BTreeMap<usize, usize> = right.iter().enumerate().map(|(i, &r)| (r, i)).collect();
    let adj: Vec<Vec<usize>> = left.iter().map(|l| cands[l].iter().map(|r| ri[r]).collect()).collect();
    let mut match_l = vec![usize::MAX; left.len()];
    let mut match_r = vec![usize::MAX; right.len()];
    let mut size = 0;
    loop {
        // BFS from every free left vertex; parent pointers on right vertices
        let mut par_r = vec![usize::MAX; right.len()];
        let mut q: VecDeque<usize> = (0..left.len()).filter(|&l| match_l[l] == usize::MAX).collect();
        let mut seen_l = vec![false; left.len()];
        for &l in &q {
            seen_l[l] = true;
        }
        let mut end = None;
        'bfs: while let Some(l) = q.pop_front() {
            for &r in &adj[l] {
                if par_r[r] != usize::MAX {
                    continue;
                }
                par_r[r] = l;
                if match_r[r] == usize::MAX {
                    end = Some(r);
                    break 'bfs;
                }
                let l2 = match_r[r];
                if !seen_l[l2] {
                    seen_l[l2] = true;
                    q.push_back(l2);
                }
            }
        }
        let Some(mut r) = end else { break };
        loop {
            let l = par_r[r];
            let prev = match_l[l];
            match_l[l] = r;
            match_r[r] = l;
            if prev == usize::MAX {
                break;
            }
            r = prev;
        }
        size += 1;
    }
    size
}

/// Random candidate system: `left` vertices with exactly `floor` candidates
/// each, no candidate in more than `ceiling` sets.
pub fn random_system(left: usize, floor: usize, ceiling: usize, seed: u64) -> BTreeMap<usize, Vec<usize>> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let right = (left * floor).div_ceil(ceiling) + floor + r.gen_range(0..=left);
    let mut load = vec![0usize; right];
    let mut out = BTreeMap::new();
    for v in 0..left {
        let mut open: Vec<usize> = (0..right).filter(|&u| load[u] < ceiling).collect();
        open.shuffle(&mut r);
        // prefer lightly loaded candidates so the quota always fits
        open.sort_by_key(|&u| load[u]);
        let t: Vec<usize> = open.into_iter().take(floor).map(|u| u + 10_000).collect();
        for &u in &t {
            load[u - 10_000] += 1;
        }
        out.insert(v, t);
    }
    out
}

/// Per-step CC recount: for every newly colored w and every member m of a
/// tracked clique adjacent to w with w outside A_i ∪ All_i ∪ Big_i⁺, the
/// pair (i, color(w)) gains m. Walks members rather than the diff.
pub fn cc_step_oracle(graph: &Graph, dec: &Decomposition, diff: &[(usize, u32)], tracked: &[usize]) -> BTreeMap<(usize, u32), u32> {
    let new: BTreeMap<usize, u32> = diff.iter().copied().collect();
    let mut out = BTreeMap::new();
    for &i in tracked {
        let q = &dec.cliques[i];
        let excluded: BTreeSet<usize> = q.members.iter().chain(&q.all).chain(&q.big_plus).copied().collect();
        for &m in &q.members {
            let seen: BTreeSet<u32> = graph
                .neighbors(m)
                .iter()
                .filter(|w| !excluded.contains(w))
                .filter_map(|w| new.get(w).copied())
                .collect();
            for x in seen {
                *out.entry((i, x)).or_insert(0) += 1;
            }
        }
    }
    out
}

/// Cumulative CC from a final coloring with step stamps: members of A_i with
/// a neighbor outside A_i ∪ All_i colored x strictly before A_i's first color.
pub fn cumulative_oracle(graph: &Graph, dec: &Decomposition, colors: &[u32], stamp: &[u32]) -> usize {
    let mut worst = 0;
    for q in &dec.cliques {
        let first = q.members.iter().map(|&m| stamp[m]).min().unwrap_or(u32::MAX);
        let skip: BTreeSet<usize> = q.members.iter().chain(&q.all).copied().collect();
        let mut per_color: BTreeMap<u32, BTreeSet<usize>> = BTreeMap::new();
        for &m in &q.members {
            for &w in graph.neighbors(m) {
                if !skip.contains(&w) && stamp[w] < first {
                    per_color.entry(colors[w]).or_default().insert(m);
                }
            }
        }
        worst = worst.max(per_color.values().map(BTreeSet::len).max().unwrap_or(0));
    }
    worst
}
