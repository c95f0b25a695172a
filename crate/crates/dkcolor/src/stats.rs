//! Statistical drivers: marking tail, repeated colors, RCT degree drop, and
//! the Wilson interval used for batch success rates.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coloring::PartialColoring;
use crate::graph::{mask, DomainError, Graph};
use crate::rng::NodeRng;
use crate::stages::slack::rct_round;
use crate::stages::sparse::anti_edges;

/// Wilson score interval for `k` successes out of `n` at normal quantile `z`.
pub fn wilson(k: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let den = 1.0 + z2 / n;
    let mid = (p + z2 / (2.0 * n)) / den;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / den;
    ((mid - half).max(0.0), (mid + half).min(1.0))
}

/// Marking experiment over a set family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkingSpec {
    pub delta: f64,
    /// Bound Q on set sizes.
    pub q: usize,
    /// Per-vertex membership cap (2Δ^{9/10}).
    pub membership_cap: f64,
    /// Marking probability.
    pub p: f64,
    /// Number of hit sets that counts as a tail event (Δ^{37/40}).
    pub threshold: f64,
}

impl MarkingSpec {
    /// Δ sets of size ≤ Q = ⌊√Δ⌋, independent marking at 1/(Q·Δ^{1/5}).
    pub fn at_bound(delta: u64) -> Self {
        let d = delta as f64;
        let q = d.sqrt().floor().max(1.0) as usize;
        Self {
            delta: d,
            q,
            membership_cap: 2.0 * d.powf(0.9),
            p: 1.0 / (q as f64 * d.powf(0.2)),
            threshold: d.powf(37.0 / 40.0),
        }
    }
}

/// Random family of ⌊Δ⌋ sets of exactly Q vertices from a pool of
/// `pool` vertices, respecting the membership cap.
pub fn random_family(spec: &MarkingSpec, pool: usize, seed: u64) -> Result<Vec<Vec<usize>>, DomainError> {
    let count = spec.delta.floor() as usize;
    let cap = spec.membership_cap.floor() as usize;
    if spec.q > pool || count * spec.q > pool * cap {
        return Err(DomainError::Infeasible(format!("{count} sets of size {} over {pool} vertices with cap {cap}", spec.q)));
    }
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut load = vec![0usize; pool];
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let open: Vec<usize> = (0..pool).filter(|&v| load[v] < cap).collect();
        let set: Vec<usize> = open.choose_multiple(&mut r, spec.q).copied().collect();
        if set.len() < spec.q {
            return Err(DomainError::Infeasible("membership cap exhausted".into()));
        }
        for &v in &set {
            load[v] += 1;
        }
        out.push(set);
    }
    Ok(out)
}

/// Fraction of trials in which at least `threshold` sets contain a marked
/// vertex, with independent marking at probability `spec.p`.
pub fn lemma32_statistic(sets: &[Vec<usize>], spec: &MarkingSpec, trials: usize, seed: u64) -> Result<f64, DomainError> {
    if sets.len() as f64 > spec.delta {
        return Err(DomainError::Infeasible(format!("{} sets exceed Δ = {}", sets.len(), spec.delta)));
    }
    if let Some(s) = sets.iter().find(|s| s.len() > spec.q) {
        return Err(DomainError::Infeasible(format!("set of size {} exceeds Q = {}", s.len(), spec.q)));
    }
    let pool = sets.iter().flatten().max().map_or(0, |&m| m + 1);
    let mut load = vec![0usize; pool];
    for &v in sets.iter().flatten() {
        load[v] += 1;
    }
    if load.iter().any(|&l| l as f64 > spec.membership_cap) {
        return Err(DomainError::Infeasible("vertex above membership cap".into()));
    }
    if !(0.0..=1.0).contains(&spec.p) {
        return Err(DomainError::Infeasible(format!("marking probability {}", spec.p)));
    }
    if trials == 0 || sets.is_empty() {
        return Ok(0.0);
    }
    let hits: usize = crate::par::map_range(trials, |t| {
        let mut r = ChaCha8Rng::seed_from_u64(seed ^ (t as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let marked: Vec<bool> = (0..pool).map(|_| r.gen_bool(spec.p)).collect();
        let k = sets.iter().filter(|s| s.iter().any(|&v| marked[v])).count();
        (k as f64 >= spec.threshold) as usize
    })
    .into_iter()
    .sum();
    Ok(hits as f64 / trials as f64)
}

/// Outcome of the repeated-colors experiment.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RepeatedStats {
    /// (vertex, trial) pairs meeting the anti-edge precondition.
    pub checked: usize,
    pub met: usize,
    pub fraction: f64,
}

/// Every vertex of `a` (sampled per trial with probability `join`) tries a
/// uniform color of [1, q] and keeps it unless an A-neighbor tried the same.
/// For each vertex of `targets` whose neighborhood inside A has at least
/// `min_anti` anti-edges, checks repeated colors ≥ (m̄/q)/(3·10⁴).
pub fn repeated_colors_experiment(
    graph: &Graph,
    verts: &[usize],
    targets: &[usize],
    q: u32,
    join: f64,
    min_anti: f64,
    trials: usize,
    seed: u64,
) -> RepeatedStats {
    let rng = NodeRng::new(seed);
    let inside = mask(graph.n(), verts);
    let per_trial = crate::par::map_range(trials, |t| {
        let mut chi = vec![0u32; graph.n()];
        let mut in_a = vec![false; graph.n()];
        for &v in verts {
            let mut r = rng.stream(v, 100, t as u64);
            if r.gen_bool(join) {
                in_a[v] = true;
                chi[v] = r.gen_range(1..=q);
            }
        }
        let kept: Vec<u32> = (0..graph.n())
            .map(|v| {
                if in_a[v] && graph.neighbors(v).iter().all(|&w| !in_a[w] || chi[w] != chi[v]) {
                    chi[v]
                } else {
                    0
                }
            })
            .collect();
        let (mut checked, mut met) = (0, 0);
        for &v in targets {
            let na: Vec<usize> = graph.neighbors(v).iter().copied().filter(|&w| inside[w] && in_a[w]).collect();
            let m = anti_edges(graph, &na) as f64;
            if m < min_anti {
                continue;
            }
            checked += 1;
            let mut freq = vec![0u32; q as usize + 1];
            for &w in graph.neighbors(v) {
                if kept[w] > 0 {
                    freq[kept[w] as usize] += 1;
                }
            }
            let rep = freq.iter().filter(|&&f| f >= 2).count() as f64;
            if rep >= (m / q as f64) / 3e4 {
                met += 1;
            }
        }
        (checked, met)
    });
    let checked = per_trial.iter().map(|p| p.0).sum();
    let met = per_trial.iter().map(|p| p.1).sum();
    RepeatedStats { checked, met, fraction: if checked == 0 { 0.0 } else { met as f64 / checked as f64 } }
}

/// Outcome of the RCT degree-drop experiment.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DropStats {
    /// (vertex, round) pairs with uncolored H-degree ≥ the floor.
    pub checked: usize,
    pub failed: usize,
    pub fraction: f64,
}

/// Runs independent single RCT rounds on the uncolored `h` and counts the
/// vertices whose uncolored H-degree did not drop below keep·old.
pub fn rct_drop_experiment(
    graph: &Graph,
    coloring: &PartialColoring,
    h: &[usize],
    activation: f64,
    keep: f64,
    floor: f64,
    rounds: usize,
    seed: u64,
) -> Result<DropStats, DomainError> {
    let rng = NodeRng::new(seed);
    let h_unc = coloring.uncolored(h);
    let region = mask(graph.n(), &h_unc);
    let before: Vec<usize> = h_unc.iter().map(|&v| coloring.uncolored_degree(v, &region, graph)).collect();
    let per_round = crate::par::map_range(rounds, |t| -> Result<(usize, usize), DomainError> {
        let round = rct_round(graph, coloring, &h_unc, activation, rng, t as u32 + 1)?;
        let mut newly = vec![false; graph.n()];
        for &(v, _) in &round.retained {
            newly[v] = true;
        }
        let (mut checked, mut failed) = (0, 0);
        for (i, &v) in h_unc.iter().enumerate() {
            let d = before[i] as f64;
            if d < floor || newly[v] {
                continue;
            }
            checked += 1;
            let after = graph.neighbors(v).iter().filter(|&&w| region[w] && !newly[w]).count() as f64;
            if after > keep * d {
                failed += 1;
            }
        }
        Ok((checked, failed))
    });
    let (mut checked, mut failed) = (0, 0);
    for r in per_round {
        let (c, f) = r?;
        checked += c;
        failed += f;
    }
    Ok(DropStats { checked, failed, fraction: if checked == 0 { 0.0 } else { failed as f64 / checked as f64 } })
}
