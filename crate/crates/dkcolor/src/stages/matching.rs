//! Bipartite matching between unhappy vertices and their candidates.

use std::collections::BTreeMap;

/// Matching saturating every left vertex, or a Hall violator: a set X of
/// left vertices whose joint candidate set is smaller than X.
///
/// Left vertices are processed in increasing id and candidates scanned in
/// increasing id, so the result is deterministic.
pub fn hall_matching(cands: &BTreeMap<usize, Vec<usize>>) -> Result<Vec<(usize, usize)>, Vec<usize>> {
    let mut owner: BTreeMap<usize, usize> = BTreeMap::new();
    let sorted: BTreeMap<usize, Vec<usize>> = cands
        .iter()
        .map(|(&v, t)| {
            let mut t = t.clone();
            t.sort_unstable();
            t.dedup();
            (v, t)
        })
        .collect();
    for &v in sorted.keys() {
        let mut seen = Vec::new();
        if !augment(v, &sorted, &mut owner, &mut seen) {
            return Err(violator(v, &sorted, &owner));
        }
    }
    let mut m: Vec<(usize, usize)> = owner.into_iter().map(|(u, v)| (v, u)).collect();
    m.sort_unstable();
    Ok(m)
}

fn augment(
    v: usize,
    cands: &BTreeMap<usize, Vec<usize>>,
    owner: &mut BTreeMap<usize, usize>,
    seen: &mut Vec<usize>,
) -> bool {
    for &u in &cands[&v] {
        if seen.contains(&u) {
            continue;
        }
        seen.push(u);
        let free = match owner.get(&u) {
            None => true,
            Some(&w) => augment(w, cands, owner, seen),
        };
        if free {
            owner.insert(u, v);
            return true;
        }
    }
    false
}

/// Left vertices reachable from `root` by alternating paths. Every candidate
/// they reach is matched to another reached vertex, so |N(X)| = |X| − 1.
fn violator(root: usize, cands: &BTreeMap<usize, Vec<usize>>, owner: &BTreeMap<usize, usize>) -> Vec<usize> {
    let mut left = vec![root];
    let mut stack = vec![root];
    while let Some(v) = stack.pop() {
        for u in &cands[&v] {
            if let Some(&w) = owner.get(u) {
                if !left.contains(&w) {
                    left.push(w);
                    stack.push(w);
                }
            }
        }
    }
    left.sort_unstable();
    left
}

/// Union of the candidate sets of `xs`.
pub fn neighborhood(cands: &BTreeMap<usize, Vec<usize>>, xs: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = xs.iter().flat_map(|x| cands.get(x).into_iter().flatten().copied()).collect();
    out.sort_unstable();
    out.dedup();
    out
}
