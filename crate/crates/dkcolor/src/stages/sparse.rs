//! Coloring the sparse set: slack generation, degree splitting and the
//! two-batch driver.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::slack::{color_with_much_slack, CwmsTrace, PiousContext};
use super::trial::{cc_witnesses, max_cc, outside, Trial};
use super::{Ctx, StageError, State, PHASE_POST, PHASE_PRE, STAGE_SLACKGEN, STAGE_SPLIT};
use crate::audit::AuditReport;
use crate::coloring::{count_repeated_colors, PartialColoring};
use crate::decomposition::Decomposition;
use crate::graph::{mask, Graph};
use crate::lll::{finalize_events, run_shattered_stage, BadEvent, EventKind, EventModel, ShatterPlan, View};
use crate::rng::{coin, round_id, NodeRng};

/// Number of non-adjacent pairs in `verts`.
pub fn anti_edges(graph: &Graph, verts: &[usize]) -> usize {
    let mut k = 0;
    for (i, &a) in verts.iter().enumerate() {
        for &b in &verts[i + 1..] {
            if !graph.has_edge(a, b) {
                k += 1;
            }
        }
    }
    k
}

struct SlackGenModel<'g> {
    trial: Trial<'g>,
    dec: &'g Decomposition,
    coloring: PartialColoring,
    s: Vec<bool>,
    deg_s: Vec<usize>,
    delta: f64,
    sqrt_delta: f64,
    anti_bound: f64,
    cc_budget: f64,
}

impl SlackGenModel<'_> {
    fn g(&self) -> &Graph {
        self.trial.graph
    }

    /// Colors on N(v): frozen colors plus retained proposals.
    fn neighbor_colors(&self, v: usize, get: &impl Fn(usize) -> Option<u32>) -> Vec<u32> {
        self.g()
            .neighbors(v)
            .iter()
            .filter_map(|&u| self.coloring.get(u).or_else(|| self.trial.retained(u, get)))
            .collect()
    }

    fn repeated(&self, colors: &[u32]) -> usize {
        let mut f: HashMap<u32, u32> = HashMap::new();
        for &x in colors {
            *f.entry(x).or_insert(0) += 1;
        }
        f.values().filter(|&&k| k >= 2).count()
    }
}

impl EventModel for SlackGenModel<'_> {
    type Value = Option<u32>;

    fn sample(&self, var: usize, attempt: u32) -> Option<u32> {
        self.trial.draw(var, attempt)
    }

    fn holds(&self, ev: &BadEvent, view: &View<'_, Option<u32>>) -> bool {
        let joined = |u: usize| matches!(view.get(u), Some(Some(_)));
        let get = |u: usize| view.get(u).copied().flatten();
        let v = ev.anchor;
        let ds = self.deg_s[v] as f64;
        match ev.kind {
            EventKind::E1 => {
                let r = self.g().neighbors(v).iter().filter(|&&u| self.s[u] && joined(u)).count();
                r as f64 > (11.0 / 20.0 * ds).max(self.delta / 20.0)
            }
            EventKind::E2 => (self.repeated(&self.neighbor_colors(v, &get)) as f64) < 3.0 * self.sqrt_delta,
            EventKind::E3 => {
                let outside_r: Vec<usize> =
                    self.g().neighbors(v).iter().copied().filter(|&u| self.s[u] && !joined(u)).collect();
                (anti_edges(self.g(), &outside_r) as f64) < self.anti_bound
            }
            EventKind::E1Post => self.neighbor_colors(v, &get).len() as f64 > 19.0 * self.delta / 20.0,
            EventKind::E2Post => (self.repeated(&self.neighbor_colors(v, &get)) as f64) < 1.05 * self.sqrt_delta,
            EventKind::ECc => {
                let q = &self.dec.cliques[v];
                let diff: Vec<(usize, u32)> = ev
                    .vbl
                    .iter()
                    .filter(|&&w| outside(q, w) && self.g().neighbors(w).iter().any(|&m| q.contains(m)))
                    .filter_map(|&w| self.trial.retained(w, &get).map(|x| (w, x)))
                    .collect();
                max_cc(self.g(), q, &diff) as f64 >= self.cc_budget
            }
            _ => false,
        }
    }
}

/// Outcome of slack generation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SlackGenTrace {
    pub joined: usize,
    pub colored_pre: usize,
    pub colored_post: usize,
    pub heavy: usize,
    /// Uncolored remainder S′.
    pub remainder: usize,
    /// Smallest |palette(v)| − deg_{S′}(v) over S′.
    pub min_list_surplus: i64,
}

fn cc_events(trial: &Trial<'_>, graph: &Graph, dec: &Decomposition, cliques: &[usize]) -> Vec<BadEvent> {
    cc_witnesses(graph, dec, cliques, &trial.part)
        .into_iter()
        .filter(|(_, w)| !w.is_empty())
        .map(|(i, w)| BadEvent::new(EventKind::ECc, i, trial.decide_vbl(w)))
        .collect()
}

/// Slack generation on the uncolored set `s`.
pub fn slack_generation(ctx: &Ctx<'_>, state: &mut State, s: &[usize]) -> Result<SlackGenTrace, StageError> {
    let g = ctx.graph;
    let n = ctx.n();
    let th = &ctx.th;
    let frozen = state.coloring.clone();
    let s_unc = frozen.uncolored(s);
    if s_unc.is_empty() {
        return Ok(SlackGenTrace::default());
    }
    let s_mask = mask(n, &s_unc);
    let deg_s: Vec<usize> = (0..n).map(|v| g.neighbors(v).iter().filter(|&&u| s_mask[u]).count()).collect();
    let heavy: Vec<bool> = (0..n).map(|v| s_mask[v] && deg_s[v] as f64 >= th.sparse_deg).collect();
    let cliques = state.uncolored_cliques(ctx, &[]);
    let round = state.next_round();
    let split = th.palette_split.max(1);
    let c1 = (1, split);
    let c2 = (split + 1, th.c);

    let trial = Trial::new(g, &frozen, &s_unc, c1, ctx.k.sg_join_prob, ctx.rng, (STAGE_SLACKGEN, round, PHASE_PRE));
    let n_s = |v: usize| g.neighbors(v).iter().copied().filter(|&u| s_mask[u]).collect::<Vec<_>>();
    let mut events = Vec::new();
    for v in ctx.schedule.order(&s_unc) {
        events.push(BadEvent::new(EventKind::E1, v, n_s(v)));
        if heavy[v] {
            events.push(BadEvent::new(EventKind::E2, v, trial.decide_vbl(g.neighbors(v).iter().copied())));
            events.push(BadEvent::new(EventKind::E3, v, n_s(v)));
        }
    }
    events.extend(cc_events(&trial, g, ctx.dec, &cliques));
    let events = finalize_events(events);
    let model = |trial, coloring| SlackGenModel {
        trial,
        dec: ctx.dec,
        coloring,
        s: s_mask.clone(),
        deg_s: deg_s.clone(),
        delta: th.delta,
        sqrt_delta: th.sqrt_delta,
        anti_bound: th.sparse_nonedges / 8.0,
        cc_budget: th.cc_budget,
    };
    let pre_model = model(trial, frozen.clone());
    let plan = ShatterPlan::new("slack-generation", 3, ctx.component_cap(), ctx.k.resample_budget);

    let mut pre_diff = Vec::new();
    let mut joined = 0;
    let (sh, post_model) = run_shattered_stage(&pre_model, n, &s_unc, &events, &plan, |pre, _occ, retracted| {
        let ret = mask(n, retracted);
        let in_r: Vec<bool> = (0..n).map(|v| !ret[v] && matches!(pre[v], Some(Some(_)))).collect();
        joined = in_r.iter().filter(|&&b| b).count();
        pre_diff = pre_model.trial.retained_all(pre).into_iter().filter(|&(v, _)| !ret[v]).collect();
        let mut col2 = frozen.clone();
        for &(v, x) in &pre_diff {
            col2.set(v, x);
        }
        let part2: Vec<usize> = g.ball(retracted, 2).into_iter().filter(|&v| s_mask[v] && !in_r[v]).collect();
        let trial2 = Trial::new(g, &col2, &part2, c2, ctx.k.sg_post_prob, ctx.rng, (STAGE_SLACKGEN, round, PHASE_POST));
        let near3 = g.ball(retracted, 3);
        let near1 = mask(n, &g.ball(retracted, 1));
        let mut ev2 = Vec::new();
        for &v in &near3 {
            if !s_mask[v] {
                continue;
            }
            let vbl = trial2.decide_vbl(g.neighbors(v).iter().copied());
            if heavy[v] && near1[v] {
                ev2.push(BadEvent::new(EventKind::E2Post, v, vbl.clone()));
            }
            ev2.push(BadEvent::new(EventKind::E1Post, v, vbl));
        }
        ev2.extend(cc_events(&trial2, g, ctx.dec, &cliques).into_iter().map(BadEvent::fresh));
        (model(trial2, col2), part2, ev2)
    })?;
    let post_diff = post_model.trial.retained_all(&sh.post);
    state.absorb(sh.outcome);
    state.commit(ctx, "slack-generation", &pre_diff, &cliques, false)?;
    state.commit(ctx, "slack-generation-post", &post_diff, &cliques, false)?;

    // audits
    let col = &state.coloring;
    let mut audit = AuditReport::new("slack-generation");
    let bad_c1 = pre_diff.iter().filter(|&&(_, x)| x < c1.0 || x > c1.1).count();
    let bad_c2 = post_diff.iter().filter(|&&(_, x)| x < c2.0 || x > c2.1).count();
    audit.zero("palette-disjoint", bad_c1 + bad_c2, String::new());
    let pre_mask = {
        let mut m = vec![false; n];
        for &(v, _) in &pre_diff {
            m[v] = true;
        }
        m
    };
    let mut guard = 0;
    let mut colored_cap = 0;
    let mut rep_fail = 0;
    let all = vec![true; n];
    for &v in &s_unc {
        let pc = g.neighbors(v).iter().filter(|&&u| pre_mask[u]).count() as f64;
        if pc > (11.0 / 20.0 * deg_s[v] as f64).max(th.delta / 20.0) {
            guard += 1;
        }
        let cn = g.neighbors(v).iter().filter(|&&u| col.is_colored(u)).count() as f64;
        if cn > 19.0 * th.delta / 20.0 {
            colored_cap += 1;
        }
        if heavy[v] && (count_repeated_colors(v, &all, col, g) as f64) < 1.05 * th.sqrt_delta {
            rep_fail += 1;
        }
    }
    audit.zero("guard-e1", guard, String::new());
    audit.zero("colored-neighbors", colored_cap, String::new());
    audit.zero("repeated-colors", rep_fail, String::new());
    let (short, min_surplus, remainder) = listsize_audit(ctx, col, &s_unc);
    audit.zero("listsize", short, format!("min surplus {min_surplus}"));
    state.audits.push(audit);
    Ok(SlackGenTrace {
        joined,
        colored_pre: pre_diff.len(),
        colored_post: post_diff.len(),
        heavy: heavy.iter().filter(|&&b| b).count(),
        remainder,
        min_list_surplus: min_surplus,
    })
}

/// Counts v ∈ S′ with |palette(v)| < deg_{S′}(v) + listsize. Returns
/// (violations, smallest surplus, |S′|).
pub fn listsize_audit(ctx: &Ctx<'_>, coloring: &PartialColoring, s: &[usize]) -> (usize, i64, usize) {
    let rest = coloring.uncolored(s);
    let region = mask(ctx.n(), &rest);
    let surplus: Vec<i64> = crate::par::map(&rest, |&v| crate::coloring::slack(v, &region, coloring, ctx.graph));
    let short = surplus.iter().filter(|&&x| (x as f64) < ctx.th.listsize).count();
    (short, surplus.iter().copied().min().unwrap_or(0), rest.len())
}

/// Partition of S′.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitResult {
    pub s1: Vec<usize>,
    pub s2: Vec<usize>,
}

struct SplitModel<'g> {
    graph: &'g Graph,
    rng: NodeRng,
    round: u32,
    phase: u32,
    p: f64,
    s_prime: Vec<bool>,
    /// Fixed S₂ members outside the sampled variables.
    fixed: Vec<bool>,
    deg: Vec<usize>,
    hi: f64,
}

impl EventModel for SplitModel<'_> {
    type Value = bool;

    fn sample(&self, var: usize, attempt: u32) -> bool {
        let mut r = self.rng.stream(var, STAGE_SPLIT, round_id(self.round, self.phase, attempt));
        coin(&mut r, self.p)
    }

    fn holds(&self, ev: &BadEvent, view: &View<'_, bool>) -> bool {
        let v = ev.anchor;
        let k = self
            .graph
            .neighbors(v)
            .iter()
            .filter(|&&u| self.s_prime[u] && (self.fixed[u] || ev.vbl.binary_search(&u).is_ok() && view.get(u) == Some(&true)))
            .count() as f64;
        let d = self.deg[v] as f64;
        k < self.p / 2.0 * d || k > self.hi * d
    }
}

/// Splits S′ into S₁ and S₂ with shattered sampling.
pub fn degree_split(ctx: &Ctx<'_>, state: &mut State, s_prime: &[usize], p: f64) -> Result<SplitResult, StageError> {
    let g = ctx.graph;
    let n = ctx.n();
    let mut sp = s_prime.to_vec();
    sp.sort_unstable();
    if sp.is_empty() {
        return Ok(SplitResult::default());
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(StageError::precondition("degree-split", format!("p = {p} outside (0, 1)")));
    }
    let s_mask = mask(n, &sp);
    let deg: Vec<usize> = (0..n).map(|v| g.neighbors(v).iter().filter(|&&u| s_mask[u]).count()).collect();
    let min_deg = ctx.k.alpha / p * ctx.th.delta.ln();
    let qualifying: Vec<usize> =
        (0..n).filter(|&v| !state.coloring.is_colored(v) && deg[v] > 0 && deg[v] as f64 >= min_deg).collect();
    let round = state.next_round();
    let nbrs = |v: usize| g.neighbors(v).iter().copied().filter(|&u| s_mask[u]).collect::<Vec<_>>();
    let events = finalize_events(
        ctx.schedule.order(&qualifying).into_iter().map(|v| BadEvent::new(EventKind::Ed, v, nbrs(v))).collect(),
    );
    let pre_model = SplitModel {
        graph: g,
        rng: ctx.rng,
        round,
        phase: PHASE_PRE,
        p,
        s_prime: s_mask.clone(),
        fixed: vec![false; n],
        deg: deg.clone(),
        hi: 1.5 * p,
    };
    let plan = ShatterPlan::new("degree-split", 5, ctx.component_cap(), ctx.k.resample_budget);
    let mut kept = vec![false; n];
    let (sh, _) = run_shattered_stage(&pre_model, n, &sp, &events, &plan, |pre, _occ, retracted| {
        let dropped = mask(n, &g.ball(retracted, 1));
        for &v in &sp {
            kept[v] = pre[v] == Some(true) && !dropped[v];
        }
        let zone = g.ball(retracted, 4);
        let part2: Vec<usize> = zone.into_iter().filter(|&v| s_mask[v] && !kept[v]).collect();
        let part_mask = mask(n, &part2);
        let near5 = mask(n, &g.ball(retracted, 5));
        let ev2: Vec<BadEvent> = qualifying
            .iter()
            .filter(|&&v| near5[v])
            .map(|&v| BadEvent::new(EventKind::EdPost, v, nbrs(v).into_iter().filter(|&u| part_mask[u]).collect()))
            .collect();
        let m2 = SplitModel {
            graph: g,
            rng: ctx.rng,
            round,
            phase: PHASE_POST,
            p,
            s_prime: s_mask.clone(),
            fixed: kept.clone(),
            deg: deg.clone(),
            hi: 4.0 * p,
        };
        (m2, part2, ev2)
    })?;
    let mut in_s2 = kept;
    for v in 0..n {
        if sh.post[v] == Some(true) {
            in_s2[v] = true;
        }
    }
    state.absorb(sh.outcome);
    let (s2, s1): (Vec<usize>, Vec<usize>) = sp.iter().partition(|&&v| in_s2[v]);

    let mut audit = AuditReport::new("degree-split");
    audit.zero("split-partition", sp.len() - s1.len() - s2.len(), String::new());
    let bad = qualifying
        .iter()
        .filter(|&&v| {
            let k = g.neighbors(v).iter().filter(|&&u| in_s2[u]).count() as f64;
            let d = deg[v] as f64;
            k < p / 2.0 * d || k > 4.0 * p * d
        })
        .count();
    audit.zero("split-degrees", bad, format!("{} qualifying", qualifying.len()));
    state.audits.push(audit);
    Ok(SplitResult { s1, s2 })
}

/// Summary of ColorSparse.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseTrace {
    pub slack: SlackGenTrace,
    pub s1: usize,
    pub s2: usize,
    pub batches: Vec<CwmsTrace>,
}

/// Colors all of `s`.
pub fn color_sparse(ctx: &Ctx<'_>, state: &mut State, s: &[usize]) -> Result<SparseTrace, StageError> {
    let mut trace = SparseTrace { slack: slack_generation(ctx, state, s)?, ..Default::default() };
    let (short, min_surplus, _) = listsize_audit(ctx, &state.coloring, s);
    if short > 0 {
        return Err(StageError::precondition(
            "color-sparse",
            format!("{short} vertices of S′ below list size {:.2} (min surplus {min_surplus})", ctx.th.listsize),
        ));
    }
    let rest = state.coloring.uncolored(s);
    let split = degree_split(ctx, state, &rest, ctx.th.split_p)?;
    trace.s1 = split.s1.len();
    trace.s2 = split.s2.len();
    let pc1 = PiousContext::new("S1", split.s1, ctx.th.u_1);
    trace.batches.push(color_with_much_slack(ctx, state, &pc1)?);
    let need = ctx.th.pious_surplus(ctx.k, ctx.th.u_2);
    if ctx.th.listsize < need {
        return Err(StageError::precondition(
            "color-sparse",
            format!("list size {:.2} < U₂·Δ^0.22 = {need:.2}", ctx.th.listsize),
        ));
    }
    let pc2 = PiousContext::new("S2", split.s2, ctx.th.u_2);
    trace.batches.push(color_with_much_slack(ctx, state, &pc2)?);
    Ok(trace)
}
