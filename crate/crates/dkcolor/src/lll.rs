//! Shattering executor: sample, evaluate bad events, retract, then repair the
//! post-shattering dependency components by Moser–Tardos resampling.
//!
//! Variables are dense integer ids (vertex ids, or the minimum member id for
//! per-clique variables). A model supplies the sampler and the predicates;
//! everything frozen by earlier stages lives inside the model, so an event's
//! `vbl` lists only the random variables it reads.

use std::cell::Cell;
use std::collections::{BTreeMap, HashMap};
use std::fmt::Debug;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Graph;
use crate::par;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventKind {
    E,
    ECc,
    EPrime,
    E1,
    E2,
    E3,
    E1Post,
    E2Post,
    Ed,
    EdPost,
    Ea,
    Eb,
    B1,
    B1p,
    B2,
    B3,
    B4,
    P1,
    P2,
    P3,
    Custom(u32),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BadEvent {
    pub id: usize,
    pub kind: EventKind,
    /// Vertex or clique the event is about.
    pub anchor: usize,
    pub vbl: Vec<usize>,
    pub fresh_budget: bool,
}

impl BadEvent {
    pub fn new(kind: EventKind, anchor: usize, mut vbl: Vec<usize>) -> Self {
        vbl.sort_unstable();
        vbl.dedup();
        Self { id: 0, kind, anchor, vbl, fresh_budget: false }
    }

    pub fn fresh(mut self) -> Self {
        self.fresh_budget = true;
        self
    }
}

/// Sorts by (kind, anchor) and assigns ids in that order.
pub fn finalize_events(mut events: Vec<BadEvent>) -> Vec<BadEvent> {
    events.sort_by(|a, b| (a.kind, a.anchor).cmp(&(b.kind, b.anchor)).then(a.vbl.cmp(&b.vbl)));
    for (i, e) in events.iter_mut().enumerate() {
        e.id = i;
    }
    events
}

pub type Assignment<V> = Vec<Option<V>>;

/// Read access for one predicate. In debug builds every read is checked
/// against the event's `vbl`.
pub struct View<'a, V> {
    base: &'a [Option<V>],
    overlay: Option<&'a HashMap<usize, V>>,
    vbl: &'a [usize],
    stray: Cell<Option<usize>>,
}

impl<'a, V> View<'a, V> {
    pub fn new(base: &'a [Option<V>], overlay: Option<&'a HashMap<usize, V>>, vbl: &'a [usize]) -> Self {
        Self { base, overlay, vbl, stray: Cell::new(None) }
    }

    pub fn get(&self, var: usize) -> Option<&V> {
        if cfg!(debug_assertions) && self.vbl.binary_search(&var).is_err() && self.stray.get().is_none() {
            self.stray.set(Some(var));
        }
        if let Some(o) = self.overlay {
            if let Some(v) = o.get(&var) {
                return Some(v);
            }
        }
        self.base.get(var).and_then(Option::as_ref)
    }

    pub fn vbl(&self) -> &[usize] {
        self.vbl
    }

    fn stray(&self) -> Option<usize> {
        self.stray.get()
    }
}

pub trait EventModel: Sync {
    type Value: Clone + Send + Sync + Debug;

    /// Draw for `var`; `attempt` 0 is the first sample, resamples count up.
    fn sample(&self, var: usize, attempt: u32) -> Self::Value;

    fn holds(&self, event: &BadEvent, view: &View<'_, Self::Value>) -> bool;

    /// Vertices represented by a variable, for component-size accounting.
    fn var_weight(&self, _var: usize) -> usize {
        1
    }
}

#[derive(Debug, Error, Clone, PartialEq, Serialize, Deserialize)]
pub enum LllError {
    #[error("event {event} read variable {var} outside its vbl")]
    ContractViolation { event: usize, var: usize },
    #[error("{stage}: resample budget {budget} exhausted on a component of {size} events; surviving {surviving:?}")]
    ResampleFailure { stage: String, budget: u64, size: usize, surviving: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShatterPlan {
    pub stage: String,
    pub retraction_radius: usize,
    pub component_size_cap: usize,
    pub resample_budget: u64,
}

impl ShatterPlan {
    pub fn new(stage: &str, retraction_radius: usize, component_size_cap: usize, resample_budget: u64) -> Self {
        assert!(component_size_cap > 0 && resample_budget > 0, "caps must be positive");
        Self { stage: stage.to_string(), retraction_radius, component_size_cap, resample_budget }
    }
}

fn check<M: EventModel>(model: &M, ev: &BadEvent, view: &View<'_, M::Value>) -> Result<bool, LllError> {
    let r = model.holds(ev, view);
    match view.stray() {
        Some(var) => Err(LllError::ContractViolation { event: ev.id, var }),
        None => Ok(r),
    }
}

/// Ids of the events whose predicate holds, ascending.
pub fn evaluate_events<M: EventModel>(
    model: &M,
    events: &[BadEvent],
    assignment: &[Option<M::Value>],
) -> Result<Vec<usize>, LllError> {
    let flags = par::map(events, |ev| {
        let view = View::new(assignment, None, &ev.vbl);
        check(model, ev, &view).map(|b| b.then_some(ev.id))
    });
    let mut out = Vec::new();
    for f in flags {
        if let Some(id) = f? {
            out.push(id);
        }
    }
    out.sort_unstable();
    Ok(out)
}

/// Samples every listed variable with attempt 0.
pub fn sample_all<M: EventModel>(model: &M, n_vars: usize, vars: &[usize]) -> Assignment<M::Value> {
    let vals = par::map(vars, |&v| model.sample(v, 0));
    let mut a: Assignment<M::Value> = vec![None; n_vars];
    for (&v, x) in vars.iter().zip(vals) {
        a[v] = Some(x);
    }
    a
}

struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut y = x;
        while self.parent[y] != r {
            let nx = self.parent[y];
            self.parent[y] = r;
            y = nx;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    /// Indices into the event slice, ascending.
    pub events: Vec<usize>,
    /// Union of the members' vbl, ascending.
    pub vars: Vec<usize>,
}

/// Connected components of the graph on `events` with an edge whenever two
/// variable sets intersect. Ordered by smallest event index.
pub fn dependency_components(events: &[BadEvent]) -> Vec<Component> {
    let mut dsu = Dsu::new(events.len());
    let mut owner: HashMap<usize, usize> = HashMap::new();
    for (i, e) in events.iter().enumerate() {
        for &x in &e.vbl {
            match owner.get(&x) {
                Some(&j) => dsu.union(i, j),
                None => {
                    owner.insert(x, i);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Component> = BTreeMap::new();
    for i in 0..events.len() {
        let r = dsu.find(i);
        let c = groups.entry(r).or_insert_with(|| Component { events: Vec::new(), vars: Vec::new() });
        c.events.push(i);
        c.vars.extend(&events[i].vbl);
    }
    groups
        .into_values()
        .map(|mut c| {
            c.vars.sort_unstable();
            c.vars.dedup();
            c
        })
        .collect()
}

/// Events with a variable within `radius` hops of `retracted` in `graph`.
pub fn select_post_events(events: &[BadEvent], retracted: &[usize], radius: usize, graph: &Graph) -> Vec<BadEvent> {
    if retracted.is_empty() {
        return Vec::new();
    }
    let ball = crate::graph::mask(graph.n(), &graph.ball(retracted, radius));
    events.iter().filter(|e| e.vbl.iter().any(|&x| ball[x])).cloned().collect()
}

/// Moser–Tardos on one component. `values` holds the current values of the
/// component variables and is updated in place; `attempts` tracks how often
/// each variable has been drawn. Returns the number of resamplings.
pub fn resample_solve<M: EventModel>(
    model: &M,
    events: &[&BadEvent],
    base: &[Option<M::Value>],
    values: &mut HashMap<usize, M::Value>,
    attempts: &mut HashMap<usize, u32>,
    plan: &ShatterPlan,
) -> Result<u64, LllError> {
    let mut by_var: HashMap<usize, Vec<usize>> = HashMap::new();
    for (i, e) in events.iter().enumerate() {
        for &x in &e.vbl {
            by_var.entry(x).or_default().push(i);
        }
    }
    let mut violated = std::collections::BTreeSet::new();
    for (i, e) in events.iter().enumerate() {
        let view = View::new(base, Some(values), &e.vbl);
        if check(model, e, &view)? {
            violated.insert((e.id, i));
        }
    }
    let mut count = 0u64;
    while let Some(&(_, i)) = violated.iter().next() {
        if count >= plan.resample_budget {
            return Err(LllError::ResampleFailure {
                stage: plan.stage.clone(),
                budget: plan.resample_budget,
                size: events.len(),
                surviving: violated.iter().map(|p| p.0).collect(),
            });
        }
        count += 1;
        let mut touched = Vec::new();
        for &x in &events[i].vbl {
            let a = attempts.entry(x).or_insert(0);
            *a += 1;
            values.insert(x, model.sample(x, *a));
            touched.extend(by_var.get(&x).into_iter().flatten().copied());
        }
        touched.sort_unstable();
        touched.dedup();
        for j in touched {
            let e = events[j];
            let view = View::new(base, Some(values), &e.vbl);
            if check(model, e, &view)? {
                violated.insert((e.id, j));
            } else {
                violated.remove(&(e.id, j));
            }
        }
    }
    Ok(count)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ShatterOutcome {
    pub stage: String,
    pub occurred_pre: Vec<usize>,
    pub occurred_kinds: BTreeMap<String, usize>,
    pub retracted: usize,
    pub post_vars: usize,
    pub post_events: usize,
    pub components: usize,
    /// Component size (vertex span) → count.
    pub component_hist: BTreeMap<usize, usize>,
    pub largest_component: usize,
    pub over_cap: usize,
    pub resample_counts: Vec<u64>,
    pub rounds: u64,
}

/// Result of one shattered stage: the pre values, the post values and the
/// merged view (post over pre).
pub struct Shattered<V> {
    pub pre: Assignment<V>,
    pub post: Assignment<V>,
    pub merged: Assignment<V>,
    pub retracted: Vec<usize>,
    pub occurred: Vec<BadEvent>,
    pub outcome: ShatterOutcome,
}

fn kind_name(k: EventKind) -> String {
    match k {
        EventKind::Custom(x) => format!("Custom{x}"),
        other => format!("{other:?}"),
    }
}

/// Runs phases I–III. `post` receives the pre assignment, the occurred pre
/// events and the retracted variables, and returns the post model, the post
/// variables and the post events (whose vbl must lie in the post variables).
pub fn run_shattered_stage<M1, M2, F>(
    pre_model: &M1,
    n_vars: usize,
    pre_vars: &[usize],
    pre_events: &[BadEvent],
    plan: &ShatterPlan,
    post: F,
) -> Result<(Shattered<M1::Value>, M2), LllError>
where
    M1: EventModel,
    M2: EventModel<Value = M1::Value>,
    F: FnOnce(&Assignment<M1::Value>, &[BadEvent], &[usize]) -> (M2, Vec<usize>, Vec<BadEvent>),
{
    let pre = sample_all(pre_model, n_vars, pre_vars);
    let occurred_ids = evaluate_events(pre_model, pre_events, &pre)?;
    let occurred: Vec<BadEvent> = occurred_ids.iter().map(|&i| pre_events[i].clone()).collect();
    let mut retracted: Vec<usize> = occurred.iter().flat_map(|e| e.vbl.iter().copied()).collect();
    retracted.sort_unstable();
    retracted.dedup();
    let mut kinds = BTreeMap::new();
    for e in &occurred {
        *kinds.entry(kind_name(e.kind)).or_insert(0) += 1;
    }

    let (post_model, post_vars, post_events) = post(&pre, &occurred, &retracted);
    let post_events = finalize_events(post_events);
    let mut post_assign = sample_all(&post_model, n_vars, &post_vars);
    let comps = dependency_components(&post_events);

    let solved = par::map(&comps, |comp| {
        let evs: Vec<&BadEvent> = comp.events.iter().map(|&i| &post_events[i]).collect();
        let mut values: HashMap<usize, M1::Value> = HashMap::new();
        for &x in &comp.vars {
            if let Some(v) = &post_assign[x] {
                values.insert(x, v.clone());
            }
        }
        let mut attempts = HashMap::new();
        let count = resample_solve(&post_model, &evs, &post_assign, &mut values, &mut attempts, plan)?;
        Ok::<_, LllError>((values, count))
    });

    let mut outcome = ShatterOutcome {
        stage: plan.stage.clone(),
        occurred_pre: occurred_ids,
        occurred_kinds: kinds,
        retracted: retracted.len(),
        post_vars: post_vars.len(),
        post_events: post_events.len(),
        components: comps.len(),
        ..Default::default()
    };
    let mut max_resamples = 0;
    let mut updates = Vec::new();
    for (comp, res) in comps.iter().zip(solved) {
        let (values, count) = res?;
        let span: usize = comp.vars.iter().map(|&x| post_model.var_weight(x)).sum();
        *outcome.component_hist.entry(span).or_insert(0) += 1;
        outcome.largest_component = outcome.largest_component.max(span);
        if span > plan.component_size_cap {
            outcome.over_cap += 1;
        }
        if count > 0 {
            outcome.resample_counts.push(count);
        }
        max_resamples = max_resamples.max(count);
        updates.push(values);
    }
    for values in updates {
        for (x, v) in values {
            post_assign[x] = Some(v);
        }
    }
    outcome.rounds = 2 + max_resamples;

    let merged: Assignment<M1::Value> =
        pre.iter().zip(&post_assign).map(|(a, b)| b.clone().or_else(|| a.clone())).collect();
    Ok((Shattered { pre, post: post_assign, merged, retracted, occurred, outcome }, post_model))
}
