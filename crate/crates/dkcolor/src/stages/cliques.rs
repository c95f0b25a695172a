//! Coloring a clique collection A′: synchronized color trial, safe candidate
//! subsampling, Hall matching and simultaneous swaps.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::matching::hall_matching;
use super::trial::outside;
use super::{Ctx, StageError, State, PHASE_POST, PHASE_PRE, STAGE_SCT, STAGE_SUBSAMPLE};
use crate::audit::AuditReport;
use crate::coloring::{properness_scan, PartialColoring};
use crate::decomposition::{CliqueInfo, Decomposition};
use crate::graph::Graph;
use crate::lll::{finalize_events, run_shattered_stage, BadEvent, EventKind, EventModel, ShatterPlan, View};
use crate::rng::{coin, round_id, NodeRng};

/// Tentative clique colors with their conflict orientation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefectiveCliqueColoring {
    /// Tentative color per vertex, set on the members of A′.
    pub gamma: Vec<Option<u32>>,
    /// Cliques of A′, ascending.
    pub cliques: Vec<usize>,
    /// Cliques recolored in the post phase; monochromatic edges between a
    /// resampled and a fixed clique point into the resampled one.
    pub resampled: Vec<usize>,
    /// Directed monochromatic edges (from, to) with `to` in A′.
    pub oriented_conflicts: Vec<(usize, usize)>,
}

impl DefectiveCliqueColoring {
    /// Members of A_i with an incoming monochromatic edge.
    pub fn unhappy(&self, dec: &Decomposition, i: usize) -> Vec<usize> {
        let q = &dec.cliques[i];
        let mut u: Vec<usize> = self.oriented_conflicts.iter().map(|&(_, t)| t).filter(|&t| q.contains(t)).collect();
        u.sort_unstable();
        u.dedup();
        u
    }

    pub fn unhappy_all(&self, dec: &Decomposition) -> BTreeMap<usize, Vec<usize>> {
        self.cliques.iter().map(|&i| (i, self.unhappy(dec, i))).collect()
    }
}

/// Colors of A_i's members must be the colors All_i does not use.
fn unused_colors(q: &CliqueInfo, coloring: &PartialColoring) -> Result<Vec<u32>, StageError> {
    let mut used = vec![false; coloring.c() as usize + 1];
    for &a in &q.all {
        match coloring.get(a) {
            Some(x) => used[x as usize] = true,
            None => return Err(StageError::invariant("sct", format!("All vertex {a} of clique {} uncolored", q.id))),
        }
    }
    let free: Vec<u32> = (1..=coloring.c()).filter(|&x| !used[x as usize]).collect();
    if free.len() != q.members.len() {
        return Err(StageError::invariant(
            "sct",
            format!("clique {}: {} unused colors for {} members", q.id, free.len(), q.members.len()),
        ));
    }
    Ok(free)
}

fn permutation(rng: &NodeRng, var: usize, round: u32, phase: u32, attempt: u32, colors: &[u32]) -> Vec<u32> {
    let mut r = rng.stream(var, STAGE_SCT, round_id(round, phase, attempt));
    let mut p = colors.to_vec();
    p.shuffle(&mut r);
    p
}

/// True iff a conflict between clique i and clique j points into i.
fn points_into(i: usize, j: usize, resampled: &[bool]) -> bool {
    if resampled[i] != resampled[j] {
        resampled[i]
    } else {
        j < i
    }
}

/// Orients every monochromatic edge touching A′.
fn orient(
    graph: &Graph,
    dec: &Decomposition,
    coloring: &PartialColoring,
    gamma: &[Option<u32>],
    cliques: &[usize],
    resampled: &[bool],
) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for &i in cliques {
        for &v in &dec.cliques[i].members {
            let Some(x) = gamma[v] else { continue };
            for &w in graph.neighbors(v) {
                if coloring.get(w) == Some(x) {
                    out.push((w, v));
                } else if gamma[w] == Some(x) {
                    let j = dec.clique_of(w).unwrap_or(i);
                    if j != i && points_into(i, j, resampled) {
                        out.push((w, v));
                    }
                }
            }
        }
    }
    out.sort_unstable();
    out
}

/// Plain SCT: one uniform permutation of the unused colors per clique,
/// assigned to the members in id order.
pub fn sct(
    graph: &Graph,
    dec: &Decomposition,
    cliques: &[usize],
    coloring: &PartialColoring,
    rng: NodeRng,
    round: u32,
) -> Result<DefectiveCliqueColoring, StageError> {
    let mut gamma = vec![None; graph.n()];
    let mut ids = cliques.to_vec();
    ids.sort_unstable();
    for &i in &ids {
        let q = &dec.cliques[i];
        let free = unused_colors(q, coloring)?;
        let p = permutation(&rng, q.min_member(), round, PHASE_PRE, 0, &free);
        for (&m, &x) in q.members.iter().zip(&p) {
            gamma[m] = Some(x);
        }
    }
    let none = vec![false; dec.cliques.len()];
    let oriented_conflicts = orient(graph, dec, coloring, &gamma, &ids, &none);
    Ok(DefectiveCliqueColoring { gamma, cliques: ids, resampled: Vec::new(), oriented_conflicts })
}

struct SctModel<'g> {
    graph: &'g Graph,
    dec: &'g Decomposition,
    rng: NodeRng,
    round: u32,
    phase: u32,
    coloring: PartialColoring,
    in_ap: Vec<bool>,
    sampled: Vec<bool>,
    fixed: Vec<Option<u32>>,
    unused: HashMap<usize, Vec<u32>>,
    unhappy_bound: f64,
    cc_budget: f64,
}

impl SctModel<'_> {
    fn gamma(&self, v: usize, view: &View<'_, Vec<u32>>) -> Option<u32> {
        let i = self.dec.clique_of(v)?;
        if !self.in_ap[i] {
            return None;
        }
        if self.sampled[i] {
            let q = &self.dec.cliques[i];
            let pos = q.members.binary_search(&v).ok()?;
            view.get(q.min_member()).map(|p| p[pos])
        } else {
            self.fixed[v]
        }
    }

    fn incoming(&self, v: usize, i: usize, view: &View<'_, Vec<u32>>) -> bool {
        let Some(x) = self.gamma(v, view) else { return false };
        self.graph.neighbors(v).iter().any(|&w| {
            if self.coloring.get(w) == Some(x) {
                return true;
            }
            match self.dec.clique_of(w) {
                Some(j) if j != i && self.in_ap[j] => {
                    points_into(i, j, &self.sampled) && self.gamma(w, view) == Some(x)
                }
                _ => false,
            }
        })
    }
}

impl EventModel for SctModel<'_> {
    type Value = Vec<u32>;

    fn sample(&self, var: usize, attempt: u32) -> Vec<u32> {
        let i = self.dec.clique_of(var).expect("clique variable");
        permutation(&self.rng, var, self.round, self.phase, attempt, &self.unused[&i])
    }

    fn holds(&self, ev: &BadEvent, view: &View<'_, Vec<u32>>) -> bool {
        match ev.kind {
            EventKind::Ea => {
                let i = ev.anchor;
                let k = self.dec.cliques[i].members.iter().filter(|&&v| self.incoming(v, i, view)).count();
                k as f64 > self.unhappy_bound
            }
            EventKind::Eb => {
                let q = &self.dec.cliques[ev.anchor];
                let mut hit: BTreeMap<u32, BTreeSet<usize>> = BTreeMap::new();
                for &m in &q.members {
                    for &w in self.graph.neighbors(m) {
                        if outside(q, w) {
                            if let Some(x) = self.gamma(w, view) {
                                hit.entry(x).or_default().insert(m);
                            }
                        }
                    }
                }
                hit.values().map(|s| s.len()).max().unwrap_or(0) as f64 >= self.cc_budget
            }
            _ => false,
        }
    }

    fn var_weight(&self, var: usize) -> usize {
        self.dec.clique_of(var).map_or(1, |i| self.dec.cliques[i].members.len())
    }
}

fn clique_vars(dec: &Decomposition, ids: &[usize]) -> Vec<usize> {
    let mut v: Vec<usize> = ids.iter().map(|&i| dec.cliques[i].min_member()).collect();
    v.sort_unstable();
    v
}

/// Shattered SCT on A′ with events E_a (too many unhappy) and E_b (CC of
/// adjacent uncolored cliques).
pub fn sct_shattered(
    ctx: &Ctx<'_>,
    state: &mut State,
    a_prime: &[usize],
    tracked: &[usize],
) -> Result<DefectiveCliqueColoring, StageError> {
    let g = ctx.graph;
    let dec = ctx.dec;
    let n = ctx.n();
    let mut ids = a_prime.to_vec();
    ids.sort_unstable();
    let nq = dec.cliques.len();
    let in_ap = {
        let mut m = vec![false; nq];
        for &i in &ids {
            m[i] = true;
        }
        m
    };
    let mut unused = HashMap::new();
    for &i in &ids {
        unused.insert(i, unused_colors(&dec.cliques[i], &state.coloring)?);
    }
    let adj: HashMap<usize, Vec<usize>> = ids
        .iter()
        .chain(tracked)
        .map(|&i| (i, dec.adjacent_cliques(g, i).into_iter().filter(|&j| in_ap[j]).collect()))
        .collect();
    let round = state.next_round();
    let frozen = state.coloring.clone();
    let model = |phase, sampled: Vec<bool>, fixed: Vec<Option<u32>>| SctModel {
        graph: g,
        dec,
        rng: ctx.rng,
        round,
        phase,
        coloring: frozen.clone(),
        in_ap: in_ap.clone(),
        sampled,
        fixed,
        unused: unused.clone(),
        unhappy_bound: ctx.th.unhappy_event,
        cc_budget: ctx.th.cc_budget,
    };
    let ea = |i: usize, pool: &dyn Fn(usize) -> bool| {
        let mut cl = vec![i];
        cl.extend(adj[&i].iter().copied().filter(|&j| pool(j)));
        BadEvent::new(EventKind::Ea, i, clique_vars(dec, &cl))
    };
    let eb = |j: usize, pool: &dyn Fn(usize) -> bool| {
        let cl: Vec<usize> = adj[&j].iter().copied().filter(|&k| pool(k)).collect();
        (!cl.is_empty()).then(|| BadEvent::new(EventKind::Eb, j, clique_vars(dec, &cl)))
    };
    let all = |_: usize| true;
    let mut events: Vec<BadEvent> = ctx.schedule.order(&ids).into_iter().map(|i| ea(i, &all)).collect();
    events.extend(tracked.iter().filter_map(|&j| eb(j, &all)));
    let events = finalize_events(events);
    let pre_model = model(PHASE_PRE, in_ap.clone(), vec![None; n]);
    let vars = clique_vars(dec, &ids);
    let plan = ShatterPlan::new("sct", 1, ctx.component_cap(), ctx.k.resample_budget);
    let mut resampled = vec![false; nq];
    let (sh, _) = run_shattered_stage(&pre_model, n, &vars, &events, &plan, |pre, _occ, retracted| {
        for &v in retracted {
            if let Some(i) = dec.clique_of(v) {
                resampled[i] = true;
            }
        }
        let mut fixed = vec![None; n];
        for &i in &ids {
            if !resampled[i] {
                let q = &dec.cliques[i];
                if let Some(p) = &pre[q.min_member()] {
                    for (&m, &x) in q.members.iter().zip(p) {
                        fixed[m] = Some(x);
                    }
                }
            }
        }
        let a2: Vec<usize> = ids.iter().copied().filter(|&i| resampled[i]).collect();
        let in_a2 = |k: usize| resampled[k];
        let mut ev2: Vec<BadEvent> = a2.iter().map(|&i| ea(i, &in_a2)).collect();
        ev2.extend(
            tracked
                .iter()
                .filter(|&&j| adj[&j].iter().any(|&k| resampled[k]))
                .filter_map(|&j| eb(j, &in_a2))
                .map(BadEvent::fresh),
        );
        (model(PHASE_POST, resampled.clone(), fixed), clique_vars(dec, &a2), ev2)
    })?;
    state.absorb(sh.outcome);
    let mut gamma = vec![None; n];
    for &i in &ids {
        let q = &dec.cliques[i];
        let p = sh.merged[q.min_member()].as_ref().ok_or_else(|| StageError::invariant("sct", "missing permutation"))?;
        for (&m, &x) in q.members.iter().zip(p) {
            gamma[m] = Some(x);
        }
    }
    let oriented_conflicts = orient(g, dec, &frozen, &gamma, &ids, &resampled);
    Ok(DefectiveCliqueColoring {
        gamma,
        cliques: ids.clone(),
        resampled: ids.iter().copied().filter(|&i| resampled[i]).collect(),
        oriented_conflicts,
    })
}

/// N(v) ∖ (A_i ∪ All_i) for a member v of clique q.
fn ext<'a>(graph: &'a Graph, q: &'a CliqueInfo, v: usize) -> impl Iterator<Item = usize> + 'a {
    graph.neighbors(v).iter().copied().filter(move |&w| !q.contains(w) && q.all.binary_search(&w).is_err())
}

/// Color of w once A′ is committed: its permanent color, else its tentative one.
fn color_of(coloring: &PartialColoring, gamma: &[Option<u32>], w: usize) -> Option<u32> {
    coloring.get(w).or(gamma[w])
}

/// Members u of A_i that v can swap with: u happy, γ(u) not on v's external
/// neighbors, γ(v) not on u's external neighbors.
pub fn swappable(
    graph: &Graph,
    q: &CliqueInfo,
    v: usize,
    unhappy: &[usize],
    gamma: &[Option<u32>],
    coloring: &PartialColoring,
) -> Vec<usize> {
    let v_ext: BTreeSet<u32> = ext(graph, q, v).filter_map(|w| color_of(coloring, gamma, w)).collect();
    let gv = gamma[v];
    q.members
        .iter()
        .copied()
        .filter(|&u| u != v && unhappy.binary_search(&u).is_err())
        .filter(|&u| gamma[u].is_some_and(|x| !v_ext.contains(&x)))
        .filter(|&u| !ext(graph, q, u).any(|w| color_of(coloring, gamma, w) == gv))
        .collect()
}

/// Term-by-term lower bound |A_i| − |Unhappy_i| − extdeg(v) − m(γ(v)) on
/// |Swappable_v|, with m(x) the members having an external neighbor of color x.
pub fn swappable_lower_bound(
    graph: &Graph,
    q: &CliqueInfo,
    v: usize,
    unhappy: &[usize],
    gamma: &[Option<u32>],
    coloring: &PartialColoring,
) -> i64 {
    let extdeg = ext(graph, q, v).count() as i64;
    let gv = gamma[v];
    let m = q.members.iter().filter(|&&u| ext(graph, q, u).any(|w| color_of(coloring, gamma, w) == gv)).count() as i64;
    q.members.len() as i64 - unhappy.len() as i64 - extdeg - m
}

/// Candidate sets: unhappy vertex → T_v.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSystem {
    pub t: BTreeMap<usize, Vec<usize>>,
}

/// Lookup of the candidate sets of one clique: (unhappy list, sets aligned).
trait Sets {
    fn of(&self, clique: usize) -> Option<(&[usize], &[Vec<usize>])>;
}

struct SystemSets<'a> {
    dec: &'a Decomposition,
    by_clique: BTreeMap<usize, (Vec<usize>, Vec<Vec<usize>>)>,
}

impl<'a> SystemSets<'a> {
    fn new(dec: &'a Decomposition, sys: &CandidateSystem) -> Self {
        let mut by_clique: BTreeMap<usize, (Vec<usize>, Vec<Vec<usize>>)> = BTreeMap::new();
        for (&v, t) in &sys.t {
            if let Some(i) = dec.clique_of(v) {
                let e = by_clique.entry(i).or_default();
                e.0.push(v);
                e.1.push(t.clone());
            }
        }
        Self { dec, by_clique }
    }
}

impl Sets for SystemSets<'_> {
    fn of(&self, clique: usize) -> Option<(&[usize], &[Vec<usize>])> {
        let _ = self.dec;
        self.by_clique.get(&clique).map(|(u, s)| (u.as_slice(), s.as_slice()))
    }
}

/// Rule (i): w is unhappy and has a candidate of color x.
fn rule_i(sets: &dyn Sets, dec: &Decomposition, gamma: &[Option<u32>], w: usize, x: Option<u32>) -> bool {
    let Some(j) = dec.clique_of(w) else { return false };
    let Some((un, ss)) = sets.of(j) else { return false };
    match un.binary_search(&w) {
        Ok(k) => ss[k].iter().any(|&w2| gamma[w2] == x),
        Err(_) => false,
    }
}

/// Rule (ii)/(iii): w is a candidate for some w′ of color x.
fn candidate_for(sets: &dyn Sets, dec: &Decomposition, gamma: &[Option<u32>], w: usize, x: Option<u32>) -> bool {
    let Some(j) = dec.clique_of(w) else { return false };
    let Some((un, ss)) = sets.of(j) else { return false };
    un.iter().zip(ss).any(|(&w2, s)| gamma[w2] == x && s.contains(&w))
}

fn unsafe_in(graph: &Graph, dec: &Decomposition, gamma: &[Option<u32>], sets: &dyn Sets, u: usize, v: usize) -> bool {
    let Some(i) = dec.clique_of(v) else { return false };
    let q = &dec.cliques[i];
    let (gu, gv) = (gamma[u], gamma[v]);
    ext(graph, q, v).any(|w| rule_i(sets, dec, gamma, w, gu) || candidate_for(sets, dec, gamma, w, gu))
        || ext(graph, q, u).any(|w| candidate_for(sets, dec, gamma, w, gv))
}

/// Whether candidate u of unhappy v is unsafe with regard to `system`.
pub fn is_unsafe(
    graph: &Graph,
    dec: &Decomposition,
    gamma: &[Option<u32>],
    system: &CandidateSystem,
    u: usize,
    v: usize,
) -> bool {
    unsafe_in(graph, dec, gamma, &SystemSets::new(dec, system), u, v)
}

/// Keeps, for every v, the members of its set that are safe with regard to
/// the whole system.
pub fn prune_unsafe(graph: &Graph, dec: &Decomposition, gamma: &[Option<u32>], system: &CandidateSystem) -> CandidateSystem {
    let sets = SystemSets::new(dec, system);
    let t = system
        .t
        .iter()
        .map(|(&v, s)| (v, s.iter().copied().filter(|&u| !unsafe_in(graph, dec, gamma, &sets, u, v)).collect()))
        .collect();
    CandidateSystem { t }
}

/// Per-clique candidate information fixed before subsampling.
struct CliqueCands {
    unhappy: Vec<usize>,
    swappable: Vec<Vec<usize>>,
}

struct SubsampleModel<'g> {
    graph: &'g Graph,
    dec: &'g Decomposition,
    rng: NodeRng,
    round: u32,
    phase: u32,
    p: f64,
    gamma: Vec<Option<u32>>,
    cands: BTreeMap<usize, CliqueCands>,
    in_ap: Vec<bool>,
    sampled: Vec<bool>,
    fixed: BTreeMap<usize, Vec<Vec<usize>>>,
    floor: f64,
    load: f64,
    b1p: f64,
    b4: f64,
    cc_budget: f64,
}

struct ViewSets<'a, 'b> {
    m: &'a SubsampleModel<'b>,
    view: &'a View<'a, Vec<Vec<usize>>>,
}

impl Sets for ViewSets<'_, '_> {
    fn of(&self, clique: usize) -> Option<(&[usize], &[Vec<usize>])> {
        let c = self.m.cands.get(&clique)?;
        let s = if self.m.sampled[clique] {
            self.view.get(self.m.dec.cliques[clique].min_member())?
        } else {
            self.m.fixed.get(&clique)?
        };
        Some((c.unhappy.as_slice(), s.as_slice()))
    }
}

impl SubsampleModel<'_> {
    fn safe_count(&self, sets: &dyn Sets, i: usize, k: usize, set: &[usize]) -> usize {
        let v = self.cands[&i].unhappy[k];
        set.iter().filter(|&&u| !unsafe_in(self.graph, self.dec, &self.gamma, sets, u, v)).count()
    }

    fn own<'a>(&'a self, sets: &'a dyn Sets, i: usize) -> Option<&'a [Vec<usize>]> {
        sets.of(i).map(|p| p.1)
    }

    fn max_load(sets_i: &[Vec<usize>]) -> usize {
        let mut f: HashMap<usize, usize> = HashMap::new();
        for s in sets_i {
            for &u in s {
                *f.entry(u).or_insert(0) += 1;
            }
        }
        f.values().copied().max().unwrap_or(0)
    }

    /// Strong CC of tracked clique j: members whose outside neighbor has a
    /// candidate of color x or is a candidate for a vertex of color x.
    fn strong_cc(&self, sets: &dyn Sets, j: usize) -> usize {
        let q = &self.dec.cliques[j];
        let mut hit: BTreeMap<u32, BTreeSet<usize>> = BTreeMap::new();
        for &m in &q.members {
            for &w in self.graph.neighbors(m) {
                if !outside(q, w) {
                    continue;
                }
                let Some(k) = self.dec.clique_of(w) else { continue };
                let Some((un, ss)) = sets.of(k) else { continue };
                if let Ok(pos) = un.binary_search(&w) {
                    for &w2 in &ss[pos] {
                        if let Some(x) = self.gamma[w2] {
                            hit.entry(x).or_default().insert(m);
                        }
                    }
                }
                for (&w2, s) in un.iter().zip(ss) {
                    if s.contains(&w) {
                        if let Some(x) = self.gamma[w2] {
                            hit.entry(x).or_default().insert(m);
                        }
                    }
                }
            }
        }
        hit.values().map(|s| s.len()).max().unwrap_or(0)
    }
}

impl EventModel for SubsampleModel<'_> {
    type Value = Vec<Vec<usize>>;

    fn sample(&self, var: usize, attempt: u32) -> Vec<Vec<usize>> {
        let i = self.dec.clique_of(var).expect("clique variable");
        let c = &self.cands[&i];
        c.unhappy
            .iter()
            .zip(&c.swappable)
            .map(|(&v, sw)| {
                let mut r = self.rng.stream(v, STAGE_SUBSAMPLE, round_id(self.round, self.phase, attempt));
                sw.iter().copied().filter(|_| coin(&mut r, self.p)).collect()
            })
            .collect()
    }

    fn holds(&self, ev: &BadEvent, view: &View<'_, Vec<Vec<usize>>>) -> bool {
        let sets = ViewSets { m: self, view };
        let i = ev.anchor;
        match ev.kind {
            EventKind::B1 | EventKind::P1 => {
                let floor = if ev.kind == EventKind::B1 { self.floor } else { self.load_floor() };
                let Some(own) = self.own(&sets, i) else { return false };
                own.iter().enumerate().any(|(k, s)| (self.safe_count(&sets, i, k, s) as f64) < floor)
            }
            EventKind::B1p => {
                let Some(own) = self.own(&sets, i) else { return false };
                let q = &self.dec.cliques[i];
                own.iter().any(|s| {
                    let mut f: HashMap<usize, usize> = HashMap::new();
                    for &u in s {
                        for w in ext(self.graph, q, u) {
                            if self.dec.clique_of(w).is_some_and(|j| self.in_ap[j]) {
                                *f.entry(w).or_insert(0) += 1;
                            }
                        }
                    }
                    f.values().any(|&k| k as f64 >= self.b1p)
                })
            }
            EventKind::B2 | EventKind::P2 => {
                self.own(&sets, i).is_some_and(|own| Self::max_load(own) as f64 > self.load)
            }
            EventKind::B3 | EventKind::P3 => self.strong_cc(&sets, i) as f64 >= self.cc_budget,
            EventKind::B4 => {
                let c = &self.cands[&i];
                c.unhappy.iter().zip(&c.swappable).any(|(&v, sw)| {
                    let bad =
                        sw.iter().filter(|&&u| unsafe_in(self.graph, self.dec, &self.gamma, &sets, u, v)).count();
                    bad as f64 >= self.b4
                })
            }
            _ => false,
        }
    }

    fn var_weight(&self, var: usize) -> usize {
        self.dec.clique_of(var).map_or(1, |i| self.dec.cliques[i].members.len())
    }
}

impl SubsampleModel<'_> {
    fn load_floor(&self) -> f64 {
        self.floor
    }
}

/// Result of subsampling with per-clique statistics.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SubsampleResult {
    pub system: CandidateSystem,
    /// Cliques recomputed in the post phase.
    pub resampled: Vec<usize>,
    pub floor_violations: usize,
    pub load_violations: usize,
    pub unsafe_left: usize,
    pub strong_cc_max: usize,
}

/// Samples a safe candidate system for every unhappy vertex of A′.
pub fn subsample_candidates(
    ctx: &Ctx<'_>,
    state: &mut State,
    dcc: &DefectiveCliqueColoring,
    tracked: &[usize],
) -> Result<SubsampleResult, StageError> {
    let g = ctx.graph;
    let dec = ctx.dec;
    let n = ctx.n();
    let nq = dec.cliques.len();
    let th = &ctx.th;
    let unhappy = dcc.unhappy_all(dec);
    let mut cands = BTreeMap::new();
    for (&i, un) in &unhappy {
        if un.is_empty() {
            continue;
        }
        let q = &dec.cliques[i];
        let sw: Vec<Vec<usize>> = un.iter().map(|&v| swappable(g, q, v, un, &dcc.gamma, &state.coloring)).collect();
        cands.insert(i, CliqueCands { unhappy: un.clone(), swappable: sw });
    }
    let active: Vec<usize> = cands.keys().copied().collect();
    if active.is_empty() {
        return Ok(SubsampleResult::default());
    }
    let mut in_ap = vec![false; nq];
    for &i in &dcc.cliques {
        in_ap[i] = true;
    }
    let is_active = {
        let mut m = vec![false; nq];
        for &i in &active {
            m[i] = true;
        }
        m
    };
    let adj: HashMap<usize, Vec<usize>> = active
        .iter()
        .chain(tracked)
        .map(|&i| (i, dec.adjacent_cliques(g, i).into_iter().filter(|&j| is_active[j]).collect()))
        .collect();
    let round = state.next_round();
    let model = |phase, sampled: Vec<bool>, fixed: BTreeMap<usize, Vec<Vec<usize>>>, floor: f64| SubsampleModel {
        graph: g,
        dec,
        rng: ctx.rng,
        round,
        phase,
        p: th.sub_p,
        gamma: dcc.gamma.clone(),
        cands: cands
            .iter()
            .map(|(&i, c)| (i, CliqueCands { unhappy: c.unhappy.clone(), swappable: c.swappable.clone() }))
            .collect(),
        in_ap: in_ap.clone(),
        sampled,
        fixed,
        floor,
        load: th.cand_load,
        b1p: th.delta.powf(0.1),
        b4: th.delta / 20.0,
        cc_budget: th.cc_budget,
    };
    let with_adj = |i: usize, pool: &dyn Fn(usize) -> bool| {
        let mut cl: Vec<usize> = vec![i];
        cl.extend(adj[&i].iter().copied().filter(|&j| pool(j)));
        clique_vars(dec, &cl)
    };
    let all = |_: usize| true;
    let mut events = Vec::new();
    for i in ctx.schedule.order(&active) {
        let own = clique_vars(dec, &[i]);
        events.push(BadEvent::new(EventKind::B1, i, with_adj(i, &all)));
        events.push(BadEvent::new(EventKind::B1p, i, own.clone()));
        events.push(BadEvent::new(EventKind::B2, i, own));
        events.push(BadEvent::new(EventKind::B4, i, with_adj(i, &all)));
    }
    for &j in tracked {
        if !adj[&j].is_empty() {
            events.push(BadEvent::new(EventKind::B3, j, clique_vars(dec, &adj[&j])));
        }
    }
    let events = finalize_events(events);
    let pre_model = model(PHASE_PRE, is_active.clone(), BTreeMap::new(), th.cand_pre_floor);
    let vars = clique_vars(dec, &active);
    let plan = ShatterPlan::new("subsample", 1, ctx.component_cap(), ctx.k.resample_budget);
    let mut a2 = vec![false; nq];
    let (sh, post_model) = run_shattered_stage(&pre_model, n, &vars, &events, &plan, |pre, _occ, retracted| {
        for &v in retracted {
            if let Some(i) = dec.clique_of(v) {
                a2[i] = true;
                for &j in &adj[&i] {
                    a2[j] = true;
                }
            }
        }
        // T^pre: safe subsets of the pre sets, for cliques kept
        let pre_sets = PreSets { m: &pre_model, pre };
        let mut fixed = BTreeMap::new();
        for &i in &active {
            if a2[i] {
                continue;
            }
            let c = &cands[&i];
            let s = pre[dec.cliques[i].min_member()].as_ref().expect("pre sample");
            let t: Vec<Vec<usize>> = c
                .unhappy
                .iter()
                .zip(s)
                .map(|(&v, set)| {
                    set.iter().copied().filter(|&u| !unsafe_in(g, dec, &dcc.gamma, &pre_sets, u, v)).collect()
                })
                .collect();
            fixed.insert(i, t);
        }
        let in_a2 = |k: usize| a2[k];
        let redo: Vec<usize> = active.iter().copied().filter(|&i| a2[i]).collect();
        let mut ev2 = Vec::new();
        for &i in &active {
            let near = a2[i] || adj[&i].iter().any(|&j| a2[j]);
            if near {
                let mut cl: Vec<usize> = if a2[i] { vec![i] } else { Vec::new() };
                cl.extend(adj[&i].iter().copied().filter(|&j| in_a2(j)));
                ev2.push(BadEvent::new(EventKind::P1, i, clique_vars(dec, &cl)));
            }
            if a2[i] {
                ev2.push(BadEvent::new(EventKind::P2, i, clique_vars(dec, &[i])));
            }
        }
        for &j in tracked {
            let cl: Vec<usize> = adj[&j].iter().copied().filter(|&k| in_a2(k)).collect();
            if !cl.is_empty() {
                ev2.push(BadEvent::new(EventKind::P3, j, clique_vars(dec, &cl)).fresh());
            }
        }
        (model(PHASE_POST, a2.clone(), fixed, th.cand_floor), clique_vars(dec, &redo), ev2)
    })?;
    state.absorb(sh.outcome);

    // final system: safe subsets of T^pre or S′ with regard to their union
    let mut combined = CandidateSystem::default();
    for &i in &active {
        let c = &cands[&i];
        let sets: Vec<Vec<usize>> = if a2[i] {
            sh.post[dec.cliques[i].min_member()].clone().expect("post sample")
        } else {
            post_model.fixed[&i].clone()
        };
        for (&v, s) in c.unhappy.iter().zip(sets) {
            combined.t.insert(v, s);
        }
    }
    let system = prune_unsafe(g, dec, &dcc.gamma, &combined);
    let mut res = SubsampleResult {
        resampled: active.iter().copied().filter(|&i| a2[i]).collect(),
        ..Default::default()
    };
    let final_sets = SystemSets::new(dec, &system);
    for (&v, t) in &system.t {
        if (t.len() as f64) < th.cand_floor {
            res.floor_violations += 1;
        }
        res.unsafe_left += t.iter().filter(|&&u| unsafe_in(g, dec, &dcc.gamma, &final_sets, u, v)).count();
    }
    for &i in &active {
        if let Some((_, ss)) = final_sets.of(i) {
            if SubsampleModel::max_load(ss) as f64 > th.cand_load {
                res.load_violations += 1;
            }
        }
    }
    let checker = model(PHASE_POST, vec![false; nq], BTreeMap::new(), th.cand_floor);
    res.strong_cc_max = tracked.iter().map(|&j| checker.strong_cc(&final_sets, j)).max().unwrap_or(0);
    res.system = system;
    Ok(res)
}

/// Pre-phase sets read straight from the assignment.
struct PreSets<'a, 'b> {
    m: &'a SubsampleModel<'b>,
    pre: &'a [Option<Vec<Vec<usize>>>],
}

impl Sets for PreSets<'_, '_> {
    fn of(&self, clique: usize) -> Option<(&[usize], &[Vec<usize>])> {
        let c = self.m.cands.get(&clique)?;
        let s = self.pre[self.m.dec.cliques[clique].min_member()].as_ref()?;
        Some((c.unhappy.as_slice(), s.as_slice()))
    }
}

/// Final colors of A′ after exchanging γ along every matched pair.
pub fn execute_swaps(
    dcc: &DefectiveCliqueColoring,
    dec: &Decomposition,
    matchings: &[(usize, usize)],
) -> Result<Vec<(usize, u32)>, StageError> {
    let mut col = dcc.gamma.clone();
    let mut touched = BTreeSet::new();
    for &(v, u) in matchings {
        if !touched.insert(v) || !touched.insert(u) || dec.clique_of(v) != dec.clique_of(u) {
            return Err(StageError::invariant("swap", format!("swap ({v}, {u}) overlaps or crosses cliques")));
        }
        col.swap(v, u);
    }
    let mut diff = Vec::new();
    for &i in &dcc.cliques {
        for &m in &dec.cliques[i].members {
            let x = col[m].ok_or_else(|| StageError::invariant("swap", format!("member {m} has no color")))?;
            diff.push((m, x));
        }
    }
    Ok(diff)
}

/// Per-clique statistics of one ColorCliques call.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CliqueStat {
    pub clique: usize,
    pub unhappy: usize,
    pub min_candidates: usize,
    pub max_load: usize,
    pub matched: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CliqueTrace {
    pub label: String,
    pub cliques: Vec<CliqueStat>,
    pub resampled_sct: usize,
    pub resampled_subsample: usize,
    pub swaps: usize,
    pub strong_cc_max: usize,
    /// Tentative SCT colors of the A′ members.
    pub gamma: Vec<(usize, u32)>,
    pub unhappy: BTreeMap<usize, Vec<usize>>,
    /// (v, |Swappable_v|, lower bound) per unhappy v.
    pub swappable: Vec<(usize, usize, i64)>,
}

/// Colors every clique of A′.
pub fn color_cliques(ctx: &Ctx<'_>, state: &mut State, label: &str, a_prime: &[usize]) -> Result<CliqueTrace, StageError> {
    let g = ctx.graph;
    let dec = ctx.dec;
    let mut ids = a_prime.to_vec();
    ids.sort_unstable();
    let mut trace = CliqueTrace { label: label.to_string(), ..Default::default() };
    let stage = format!("cliques:{label}");
    if ids.is_empty() {
        let mut audit = AuditReport::new(&stage);
        audit.zero("cliques-colored", 0, "no cliques".into());
        state.audits.push(audit);
        return Ok(trace);
    }
    for &i in &ids {
        if dec.cliques[i].members.iter().any(|&m| state.coloring.is_colored(m)) {
            return Err(StageError::precondition(&stage, format!("clique {i} already partly colored")));
        }
    }
    let tracked = state.uncolored_cliques(ctx, &ids);
    let dcc = sct_shattered(ctx, state, &ids, &tracked)?;
    trace.resampled_sct = dcc.resampled.len();
    let mut audit = AuditReport::new(&stage);

    // SCT audits
    let mut bij = 0;
    for &i in &ids {
        let mut got: Vec<u32> = dec.cliques[i].members.iter().filter_map(|&m| dcc.gamma[m]).collect();
        got.sort_unstable();
        if got != unused_colors(&dec.cliques[i], &state.coloring)? {
            bij += 1;
        }
    }
    audit.zero("sct-bijection", bij, String::new());
    let in_ap: BTreeSet<usize> = ids.iter().copied().collect();
    let mut mono: usize = 0;
    let mut oriented: usize = 0;
    for &i in &ids {
        for &v in &dec.cliques[i].members {
            for &w in g.neighbors(v) {
                let wc = color_of(&state.coloring, &dcc.gamma, w);
                if wc.is_some() && wc == dcc.gamma[v] && (w > v || !dec.clique_of(w).is_some_and(|j| in_ap.contains(&j))) {
                    mono += 1;
                    oriented += dcc
                        .oriented_conflicts
                        .binary_search(&(w, v))
                        .is_ok() as usize
                        + dcc.oriented_conflicts.binary_search(&(v, w)).is_ok() as usize;
                }
            }
        }
    }
    audit.zero("orientation-total", mono.abs_diff(oriented), format!("{mono} monochromatic edges"));
    let unhappy = dcc.unhappy_all(dec);
    let worst = unhappy.values().map(Vec::len).max().unwrap_or(0);
    audit.at_most("unhappy-bound", worst as f64, ctx.th.unhappy_audit);
    trace.gamma = ids.iter().flat_map(|&i| dec.cliques[i].members.iter()).filter_map(|&m| dcc.gamma[m].map(|x| (m, x))).collect();
    trace.unhappy = unhappy.clone();

    let mut swap_lb = 0;
    for (&i, un) in &unhappy {
        let q = &dec.cliques[i];
        for &v in un {
            let sw = swappable(g, q, v, un, &dcc.gamma, &state.coloring).len();
            let lb = swappable_lower_bound(g, q, v, un, &dcc.gamma, &state.coloring);
            if lb > sw as i64 {
                swap_lb += 1;
            }
            trace.swappable.push((v, sw, lb));
        }
    }
    audit.zero("swappable-lower-bound", swap_lb, String::new());

    let sub = subsample_candidates(ctx, state, &dcc, &tracked)?;
    trace.resampled_subsample = sub.resampled.len();
    trace.strong_cc_max = sub.strong_cc_max;
    audit.zero("candidate-floor", sub.floor_violations, String::new());
    audit.zero("candidate-load", sub.load_violations, String::new());
    audit.zero("candidate-safety", sub.unsafe_left, String::new());
    audit.at_most("strong-cc", sub.strong_cc_max as f64, 2.0 * ctx.th.cc_budget);

    let mut matchings = Vec::new();
    let mut unsaturated = 0;
    let mut first_hall = None;
    for (&i, un) in &unhappy {
        if un.is_empty() {
            continue;
        }
        let cands: BTreeMap<usize, Vec<usize>> =
            un.iter().map(|&v| (v, sub.system.t.get(&v).cloned().unwrap_or_default())).collect();
        let loads = {
            let mut f: HashMap<usize, usize> = HashMap::new();
            for t in cands.values() {
                for &u in t {
                    *f.entry(u).or_insert(0) += 1;
                }
            }
            f.values().copied().max().unwrap_or(0)
        };
        let mut stat = CliqueStat {
            clique: i,
            unhappy: un.len(),
            min_candidates: cands.values().map(Vec::len).min().unwrap_or(0),
            max_load: loads,
            matched: 0,
        };
        match hall_matching(&cands) {
            Ok(m) => {
                stat.matched = m.len();
                matchings.extend(m);
            }
            Err(violator) => {
                unsaturated += 1;
                first_hall.get_or_insert((i, violator));
            }
        }
        trace.cliques.push(stat);
    }
    audit.zero("hall-saturation", unsaturated, String::new());
    if let Some((clique, violator)) = first_hall {
        state.audits.push(audit);
        return Err(StageError::Hall { clique, violator });
    }
    trace.swaps = matchings.len();
    let diff = execute_swaps(&dcc, dec, &matchings)?;
    let res = state.commit(ctx, &stage, &diff, &tracked, true);
    let scan = properness_scan(g, &state.coloring);
    audit.zero("swap-properness", scan.is_some() as usize, scan.map_or(String::new(), |e| format!("{e:?}")));
    let left = ids.iter().flat_map(|&i| dec.cliques[i].members.iter()).filter(|&&m| !state.coloring.is_colored(m)).count();
    audit.zero("cliques-colored", left, String::new());
    state.audits.push(audit);
    res?;
    Ok(trace)
}
