//! Coloring Π-ous subgraphs: random color trials with shattered degree
//! reduction, then the multi-color trial.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::trial::{cc_witnesses, max_cc, Trial};
use super::{Ctx, StageError, State, PHASE_POST, PHASE_PRE, STAGE_MCT, STAGE_RCT};
use crate::audit::AuditReport;
use crate::coloring::PartialColoring;
use crate::decomposition::{Decomposition, RuleId, ValidationReport, Violation};
use crate::graph::{mask, DomainError, Graph};
use crate::lll::{run_shattered_stage, BadEvent, EventKind, EventModel, ShatterPlan, View};
use crate::rng::{pick, round_id, NodeRng};

/// Subgraph to color together with its external-degree bound U.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiousContext {
    pub label: String,
    pub h: Vec<usize>,
    pub u: f64,
}

impl PiousContext {
    pub fn new(label: &str, mut h: Vec<usize>, u: f64) -> Self {
        h.sort_unstable();
        h.dedup();
        Self { label: label.to_string(), h, u }
    }
}

/// Reports every vertex violating Π(a) or Π(b) under the current coloring.
pub fn check_pious(ctx: &Ctx<'_>, pc: &PiousContext, coloring: &PartialColoring) -> ValidationReport {
    let g = ctx.graph;
    let h_unc = coloring.uncolored(&pc.h);
    let region = mask(ctx.n(), &h_unc);
    let surplus = ctx.th.pious_surplus(ctx.k, pc.u);
    let mut violations: Vec<Violation> = crate::par::map(&h_unc, |&v| {
        let pal = coloring.palette_size(v, g) as f64;
        let deg = coloring.uncolored_degree(v, &region, g) as f64;
        (pal < deg + surplus).then(|| Violation {
            rule: RuleId::PiousB,
            witness: vec![v],
            measured: pal - deg,
            bound: surplus,
        })
    })
    .into_iter()
    .flatten()
    .collect();
    for q in &ctx.dec.cliques {
        for &m in &q.members {
            if coloring.is_colored(m) {
                continue;
            }
            let cnt = g.neighbors(m).iter().filter(|&&w| region[w] && q.all.binary_search(&w).is_err()).count();
            if cnt as f64 > pc.u {
                violations.push(Violation { rule: RuleId::PiousA, witness: vec![m], measured: cnt as f64, bound: pc.u });
            }
        }
    }
    ValidationReport::from_violations(violations)
}

/// Proposals and retained colors of one synchronous RCT round.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RctRound {
    /// (vertex, proposal) for every participant; `None` means inactive.
    pub proposals: Vec<(usize, Option<u32>)>,
    pub retained: Vec<(usize, u32)>,
}

/// One plain RCT round on `h_prime` (no shattering, nothing committed).
pub fn rct_round(
    graph: &Graph,
    coloring: &PartialColoring,
    h_prime: &[usize],
    activation: f64,
    rng: NodeRng,
    round: u32,
) -> Result<RctRound, DomainError> {
    let mut verts = h_prime.to_vec();
    verts.sort_unstable();
    let t = Trial::new(graph, coloring, &verts, (1, coloring.c()), activation, rng, (STAGE_RCT, round, PHASE_PRE));
    let mut assign = vec![None; graph.n()];
    let mut proposals = Vec::with_capacity(verts.len());
    for &v in &verts {
        let mut r = rng.stream(v, STAGE_RCT, round_id(round, PHASE_PRE, 0));
        let p = if crate::rng::coin(&mut r, activation) {
            Some(pick(&mut r, &t.palettes[v]).ok_or(DomainError::EmptySet)?)
        } else {
            None
        };
        assign[v] = Some(p);
        proposals.push((v, p));
    }
    Ok(RctRound { proposals, retained: t.retained_all(&assign) })
}

/// Shattered RCT on a fixed region: E(v) degree-drop events and E_CC.
pub struct RctModel<'g> {
    pub trial: Trial<'g>,
    dec: &'g Decomposition,
    coloring: PartialColoring,
    region: Vec<bool>,
    bounds: HashMap<usize, f64>,
    cc_budget: f64,
}

impl<'g> RctModel<'g> {
    fn get<'a>(view: &'a View<'_, Option<u32>>) -> impl Fn(usize) -> Option<u32> + 'a {
        move |u| view.get(u).copied().flatten()
    }

    fn remaining(&self, v: usize, get: &impl Fn(usize) -> Option<u32>) -> usize {
        self.trial
            .graph
            .neighbors(v)
            .iter()
            .filter(|&&u| self.region[u] && !self.coloring.is_colored(u) && self.trial.retained(u, get).is_none())
            .count()
    }
}

impl EventModel for RctModel<'_> {
    type Value = Option<u32>;

    fn sample(&self, var: usize, attempt: u32) -> Option<u32> {
        self.trial.draw(var, attempt)
    }

    fn holds(&self, ev: &BadEvent, view: &View<'_, Option<u32>>) -> bool {
        let get = Self::get(view);
        match ev.kind {
            EventKind::E => self.remaining(ev.anchor, &get) as f64 > self.bounds[&ev.anchor],
            EventKind::ECc => {
                let q = &self.dec.cliques[ev.anchor];
                let diff: Vec<(usize, u32)> = ev
                    .vbl
                    .iter()
                    .filter(|&&w| super::trial::outside(q, w) && self.trial.graph.neighbors(w).iter().any(|&m| q.contains(m)))
                    .filter_map(|&w| self.trial.retained(w, &get).map(|x| (w, x)))
                    .collect();
                max_cc(self.trial.graph, q, &diff) as f64 >= self.cc_budget
            }
            _ => false,
        }
    }
}

fn cc_events(trial: &Trial<'_>, graph: &Graph, dec: &Decomposition, cliques: &[usize]) -> Vec<BadEvent> {
    cc_witnesses(graph, dec, cliques, &trial.part)
        .into_iter()
        .filter(|(_, w)| !w.is_empty())
        .map(|(i, w)| BadEvent::new(EventKind::ECc, i, trial.decide_vbl(w)))
        .collect()
}

/// Per-iteration trace.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub region: usize,
    pub colored_pre: usize,
    pub colored_post: usize,
    pub max_degree: usize,
    /// Tracked vertices whose final degree exceeds max{(1−1/180)·old, Δ^{1/10}}.
    pub drop_violations: usize,
}

/// Vertices whose uncolored H-degree is tracked: uncolored H plus the
/// uncolored members of uncolored cliques.
fn tracked_vertices(ctx: &Ctx<'_>, h_unc: &[usize], coloring: &PartialColoring) -> Vec<usize> {
    let mut t: Vec<usize> = h_unc.to_vec();
    for q in &ctx.dec.cliques {
        t.extend(q.members.iter().copied().filter(|&m| !coloring.is_colored(m)));
    }
    t.sort_unstable();
    t.dedup();
    t
}

/// One shattered degree-reduction iteration on the uncolored part of H.
pub fn rct_iteration(ctx: &Ctx<'_>, state: &mut State, pc: &PiousContext) -> Result<IterationTrace, StageError> {
    let g = ctx.graph;
    let n = ctx.n();
    let frozen = state.coloring.clone();
    let h_unc = frozen.uncolored(&pc.h);
    if h_unc.is_empty() {
        return Ok(IterationTrace::default());
    }
    let region = mask(n, &h_unc);
    let tracked = tracked_vertices(ctx, &h_unc, &frozen);
    let d_old: HashMap<usize, usize> =
        tracked.iter().map(|&v| (v, frozen.uncolored_degree(v, &region, g))).collect();
    let cliques = state.uncolored_cliques(ctx, &[]);
    let round = state.next_round();
    let activation = ctx.k.rct_activation;
    let floor = ctx.th.degree_floor;
    let keep = ctx.th.drop_keep;

    let trial = Trial::new(g, &frozen, &h_unc, (1, ctx.th.c), activation, ctx.rng, (STAGE_RCT, round, PHASE_PRE));
    if let Some(v) = trial.empty_palette() {
        return Err(StageError::invariant("rct", format!("vertex {v} has an empty palette")));
    }
    let mut events = Vec::new();
    let mut bounds = HashMap::new();
    for v in ctx.schedule.order(&tracked) {
        let d = d_old[&v];
        if d as f64 >= floor {
            bounds.insert(v, keep * d as f64);
            let nb = g.neighbors(v).iter().copied();
            events.push(BadEvent::new(EventKind::E, v, trial.decide_vbl(nb)));
        }
    }
    events.extend(cc_events(&trial, g, ctx.dec, &cliques));
    let events = crate::lll::finalize_events(events);
    let pre_model = RctModel {
        trial,
        dec: ctx.dec,
        coloring: frozen.clone(),
        region: region.clone(),
        bounds,
        cc_budget: ctx.th.cc_budget,
    };
    let plan = ShatterPlan::new("rct", 2, ctx.component_cap(), ctx.k.resample_budget);

    let mut pre_diff = Vec::new();
    let (sh, post_model) = run_shattered_stage(&pre_model, n, &h_unc, &events, &plan, |pre, _occ, retracted| {
        let ret_mask = mask(n, retracted);
        pre_diff = pre_model.trial.retained_all(pre).into_iter().filter(|&(v, _)| !ret_mask[v]).collect();
        let mut col2 = frozen.clone();
        for &(v, x) in &pre_diff {
            col2.set(v, x);
        }
        let part2: Vec<usize> = g.ball(retracted, 2).into_iter().filter(|&v| region[v] && !col2.is_colored(v)).collect();
        let trial2 = Trial::new(g, &col2, &part2, (1, ctx.th.c), activation, ctx.rng, (STAGE_RCT, round, PHASE_POST));
        let near = mask(n, &g.ball(retracted, 1));
        let mut ev2 = Vec::new();
        let mut bounds2 = HashMap::new();
        for &v in &tracked {
            let d = d_old[&v];
            if near[v] && d as f64 >= floor {
                bounds2.insert(v, (keep * d as f64).max(floor));
                ev2.push(BadEvent::new(EventKind::E, v, trial2.decide_vbl(g.neighbors(v).iter().copied())));
            }
        }
        ev2.extend(cc_events(&trial2, g, ctx.dec, &cliques).into_iter().map(BadEvent::fresh));
        let m2 = RctModel {
            trial: trial2,
            dec: ctx.dec,
            coloring: col2,
            region: region.clone(),
            bounds: bounds2,
            cc_budget: ctx.th.cc_budget,
        };
        (m2, part2, ev2)
    })?;
    if let Some(v) = post_model.trial.empty_palette() {
        return Err(StageError::invariant("rct", format!("vertex {v} has an empty palette after retraction")));
    }
    let post_diff = post_model.trial.retained_all(&sh.post);
    state.absorb(sh.outcome);
    state.commit(ctx, "rct", &pre_diff, &cliques, false)?;
    state.commit(ctx, "rct-post", &post_diff, &cliques, false)?;

    let h_after = state.coloring.uncolored(&pc.h);
    let region_after = mask(n, &h_after);
    let mut trace = IterationTrace {
        region: h_unc.len(),
        colored_pre: pre_diff.len(),
        colored_post: post_diff.len(),
        ..Default::default()
    };
    for &v in &tracked {
        if state.coloring.is_colored(v) {
            continue;
        }
        let d = state.coloring.uncolored_degree(v, &region_after, g);
        trace.max_degree = trace.max_degree.max(d);
        if d as f64 > (keep * d_old[&v] as f64).max(floor) {
            trace.drop_violations += 1;
        }
    }
    Ok(trace)
}

/// Multi-color trial: T samples with repetition per participant.
pub struct MctModel<'g> {
    graph: &'g Graph,
    dec: &'g Decomposition,
    rng: NodeRng,
    round: u32,
    phase: u32,
    part: Vec<bool>,
    palettes: Vec<Vec<u32>>,
    trials: usize,
    cc_budget: f64,
}

impl<'g> MctModel<'g> {
    fn new(ctx: &Ctx<'g>, coloring: &PartialColoring, part_list: &[usize], round: u32, phase: u32) -> Self {
        let n = ctx.n();
        let pals = crate::par::map(part_list, |&v| coloring.palette(v, ctx.graph));
        let mut palettes = vec![Vec::new(); n];
        for (&v, p) in part_list.iter().zip(pals) {
            palettes[v] = p;
        }
        Self {
            graph: ctx.graph,
            dec: ctx.dec,
            rng: ctx.rng,
            round,
            phase,
            part: mask(n, part_list),
            palettes,
            trials: ctx.th.mct_trials,
            cc_budget: ctx.th.cc_budget,
        }
    }

    /// Smallest color of S(v) missing from every participating neighbor's set.
    pub fn chosen<'a, F: Fn(usize) -> Option<&'a Vec<u32>>>(&self, v: usize, get: &F) -> Option<u32> {
        let own = get(v)?;
        let mut cand: Vec<u32> = own.clone();
        cand.sort_unstable();
        cand.dedup();
        cand.into_iter().find(|x| {
            self.graph.neighbors(v).iter().all(|&u| !self.part[u] || get(u).is_none_or(|s| !s.contains(x)))
        })
    }

    fn vbl_of(&self, verts: &[usize]) -> Vec<usize> {
        let mut out = Vec::new();
        for &w in verts {
            if self.part[w] {
                out.push(w);
                out.extend(self.graph.neighbors(w).iter().copied().filter(|&u| self.part[u]));
            }
        }
        out
    }

    fn chosen_all(&self, assign: &[Option<Vec<u32>>]) -> Vec<(usize, u32)> {
        let get = |u: usize| assign[u].as_ref();
        (0..self.part.len()).filter(|&v| self.part[v]).filter_map(|v| self.chosen(v, &get).map(|x| (v, x))).collect()
    }
}

impl EventModel for MctModel<'_> {
    type Value = Vec<u32>;

    fn sample(&self, var: usize, attempt: u32) -> Vec<u32> {
        let mut r = self.rng.stream(var, STAGE_MCT, round_id(self.round, self.phase, attempt));
        let pal = &self.palettes[var];
        (0..self.trials).filter_map(|_| pick(&mut r, pal)).collect()
    }

    fn holds(&self, ev: &BadEvent, view: &View<'_, Vec<u32>>) -> bool {
        let get = |u: usize| view.get(u);
        match ev.kind {
            EventKind::EPrime => self.chosen(ev.anchor, &get).is_none(),
            EventKind::ECc => {
                let q = &self.dec.cliques[ev.anchor];
                let diff: Vec<(usize, u32)> = ev
                    .vbl
                    .iter()
                    .filter(|&&w| super::trial::outside(q, w) && self.graph.neighbors(w).iter().any(|&m| q.contains(m)))
                    .filter_map(|&w| self.chosen(w, &get).map(|x| (w, x)))
                    .collect();
                max_cc(self.graph, q, &diff) as f64 >= self.cc_budget
            }
            _ => false,
        }
    }
}

fn mct_events(ctx: &Ctx<'_>, m: &MctModel<'_>, part_list: &[usize], cliques: &[usize]) -> Vec<BadEvent> {
    let mut ev: Vec<BadEvent> = ctx
        .schedule
        .order(part_list)
        .into_iter()
        .map(|v| BadEvent::new(EventKind::EPrime, v, m.vbl_of(&[v])))
        .collect();
    for (i, w) in cc_witnesses(ctx.graph, ctx.dec, cliques, &m.part) {
        if !w.is_empty() {
            ev.push(BadEvent::new(EventKind::ECc, i, m.vbl_of(&w)));
        }
    }
    ev
}

/// Colors all of H by a shattered multi-color trial.
pub fn mct_coloring(ctx: &Ctx<'_>, state: &mut State, h: &[usize]) -> Result<(), StageError> {
    let g = ctx.graph;
    let n = ctx.n();
    let frozen = state.coloring.clone();
    let h_unc = frozen.uncolored(h);
    if h_unc.is_empty() {
        return Ok(());
    }
    let region = mask(n, &h_unc);
    for &v in &h_unc {
        let s = crate::coloring::slack(v, &region, &frozen, g);
        if (s as f64) < ctx.th.mct_slack {
            return Err(StageError::precondition("mct", format!("vertex {v} has slack {s} < {:.2}", ctx.th.mct_slack)));
        }
    }
    for q in &ctx.dec.cliques {
        for &m in &q.members {
            if !frozen.is_colored(m) {
                let d = frozen.uncolored_degree(m, &region, g);
                if d as f64 > ctx.th.degree_floor {
                    return Err(StageError::precondition(
                        "mct",
                        format!("clique vertex {m} has {d} uncolored neighbors in H > {:.2}", ctx.th.degree_floor),
                    ));
                }
            }
        }
    }
    let cliques = state.uncolored_cliques(ctx, &[]);
    let round = state.next_round();
    let pre_model = MctModel::new(ctx, &frozen, &h_unc, round, PHASE_PRE);
    let events = crate::lll::finalize_events(mct_events(ctx, &pre_model, &h_unc, &cliques));
    let plan = ShatterPlan::new("mct", 0, ctx.component_cap(), ctx.k.resample_budget);
    let mut pre_diff = Vec::new();
    let (sh, post_model) = run_shattered_stage(&pre_model, n, &h_unc, &events, &plan, |pre, _occ, retracted| {
        let ret_mask = mask(n, retracted);
        pre_diff = pre_model.chosen_all(pre).into_iter().filter(|&(v, _)| !ret_mask[v]).collect();
        let mut col2 = frozen.clone();
        for &(v, x) in &pre_diff {
            col2.set(v, x);
        }
        let part2: Vec<usize> = retracted.iter().copied().filter(|&v| !col2.is_colored(v)).collect();
        let m2 = MctModel::new(ctx, &col2, &part2, round, PHASE_POST);
        let ev2 = mct_events(ctx, &m2, &part2, &cliques)
            .into_iter()
            .map(|e| if e.kind == EventKind::ECc { e.fresh() } else { e })
            .collect();
        (m2, part2, ev2)
    })?;
    let post_diff = post_model.chosen_all(&sh.post);
    state.absorb(sh.outcome);
    state.commit(ctx, "mct", &pre_diff, &cliques, false)?;
    state.commit(ctx, "mct-post", &post_diff, &cliques, false)?;
    let left = state.coloring.uncolored(h);
    if !left.is_empty() {
        return Err(StageError::invariant("mct", format!("{} vertices of H left uncolored", left.len())));
    }
    Ok(())
}

/// Summary of one ColorWithMuchSlack call.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CwmsTrace {
    pub label: String,
    pub iterations: Vec<IterationTrace>,
    pub rct_rounds: u64,
}

fn max_tracked_degree(ctx: &Ctx<'_>, state: &State, h: &[usize]) -> Vec<(usize, usize)> {
    let h_unc = state.coloring.uncolored(h);
    let region = mask(ctx.n(), &h_unc);
    let mut degs: Vec<(usize, usize)> = tracked_vertices(ctx, &h_unc, &state.coloring)
        .into_iter()
        .map(|v| (v, state.coloring.uncolored_degree(v, &region, ctx.graph)))
        .collect();
    degs.sort_by_key(|&(v, d)| (std::cmp::Reverse(d), v));
    degs
}

/// Extends the coloring to all of H: RCT iterations until uncolored degrees
/// are at most Δ^{1/10}, then MCT.
pub fn color_with_much_slack(ctx: &Ctx<'_>, state: &mut State, pc: &PiousContext) -> Result<CwmsTrace, StageError> {
    let stage = format!("cwms:{}", pc.label);
    let pious = check_pious(ctx, pc, &state.coloring);
    let mut audit = AuditReport::new(&stage);
    audit.zero("pious", pious.violations.len(), String::new());
    if !pious.passed {
        state.audits.push(audit);
        return Err(StageError::Pious { stage, report: Box::new(pious) });
    }
    let mut trace = CwmsTrace { label: pc.label.clone(), ..Default::default() };
    let rounds0 = state.rounds_simulated;
    let cap = ctx.th.iteration_cap.max(1);
    let mut it = 0u64;
    loop {
        let degs = max_tracked_degree(ctx, state, &pc.h);
        let worst = degs.first().map_or(0, |p| p.1);
        if worst as f64 <= ctx.th.degree_floor {
            break;
        }
        if it >= cap {
            state.audits.push(audit);
            return Err(StageError::CapReached { stage, cap, worst: degs.into_iter().take(10).collect() });
        }
        trace.iterations.push(rct_iteration(ctx, state, pc)?);
        it += 1;
    }
    trace.rct_rounds = state.rounds_simulated - rounds0;
    let drops: usize = trace.iterations.iter().map(|t| t.drop_violations).sum();
    audit.zero("rct-degree-drop", drops, format!("{} iterations", trace.iterations.len()));
    let res = mct_coloring(ctx, state, &pc.h);
    let left = state.coloring.uncolored(&pc.h).len();
    audit.zero("h-colored", left, String::new());
    state.audits.push(audit);
    res?;
    Ok(trace)
}

/// Degrees of the uncolored tracked vertices, for diagnostics.
pub fn degree_profile(ctx: &Ctx<'_>, state: &State, h: &[usize]) -> BTreeMap<usize, usize> {
    let mut hist = BTreeMap::new();
    for (_, d) in max_tracked_degree(ctx, state, h) {
        *hist.entry(d).or_insert(0) += 1;
    }
    hist
}
