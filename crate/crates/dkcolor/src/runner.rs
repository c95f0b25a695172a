//! Configuration, pipeline orchestration, batches and reports.

use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audit::{AuditReport, CheckKind};
use crate::coloring::properness_scan;
use crate::constants::{AnalysisConstants, ConstantsError};
use crate::decomposition::{certificate_check, generate, GenParams};
use crate::decomposition::{validate, Decomposition, Tier, ValidationReport};
use crate::graph::{min_colors, Graph};
use crate::ledger::max_cumulative_cc;
use crate::lll::ShatterOutcome;
use crate::stages::cliques::{color_cliques, CliqueTrace};
use crate::stages::slack::{color_with_much_slack, CwmsTrace, PiousContext};
use crate::stages::sparse::{color_sparse, SparseTrace};
use crate::stages::{Ctx, Schedule, StageError, State};
use crate::stats::wilson;

/// Stage labels in pipeline order.
pub const STAGE_ORDER: [&str; 5] = ["color-sparse", "cwms:B_H", "cliques:A_H", "cwms:B_L", "cliques:A_L"];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AuditMode {
    /// Statistical failures reject the run.
    #[default]
    Strict,
    /// Only deterministic failures reject the run.
    Lenient,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Input {
    Generate(GenParams),
    Files { graph: PathBuf, decomposition: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: Input,
    /// Defaults to Δ − k_Δ + 1.
    pub c: Option<u32>,
    pub seed: u64,
    pub constants: AnalysisConstants,
    pub audit: AuditMode,
    pub certificate_check: bool,
    /// Seed of a permuted vertex iteration order; `None` keeps id order.
    pub schedule_seed: Option<u64>,
    pub batch: usize,
    pub seed_stride: u64,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn generated(params: GenParams, seed: u64) -> Self {
        Self {
            input: Input::Generate(params),
            c: None,
            seed,
            constants: AnalysisConstants::desk(),
            audit: AuditMode::Strict,
            certificate_check: false,
            schedule_seed: None,
            batch: 1,
            seed_stride: 1,
            out: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum InputError {
    #[error(transparent)]
    Constants(#[from] ConstantsError),
    #[error("c = {c} below Δ − k_Δ + 1 = {min}")]
    TooFewColors { c: u32, min: u32 },
    #[error("{0}")]
    Load(String),
    #[error("decomposition invalid: {} violations", .0.violations.len())]
    Invalid(Box<ValidationReport>),
}

impl InputError {
    pub fn exit_code(&self) -> i32 {
        4
    }
}

/// Loaded, validated input.
#[derive(Clone, Debug)]
pub struct Instance {
    pub graph: Graph,
    pub dec: Decomposition,
    pub c: u32,
    pub constants: AnalysisConstants,
    pub validation: ValidationReport,
}

/// Resolves the input, the color count and the effective constants, and
/// validates the decomposition.
pub fn load(cfg: &RunConfig) -> Result<Instance, InputError> {
    let k = cfg.constants.effective()?;
    let (graph, dec, file_c) = match &cfg.input {
        Input::Generate(p) => {
            let (g, d) = generate(p, &k).map_err(|e| InputError::Load(e.to_string()))?;
            (g, d, p.c)
        }
        Input::Files { graph, decomposition } => {
            let gt = std::fs::read_to_string(graph).map_err(|e| InputError::Load(format!("{}: {e}", graph.display())))?;
            let (g, c) = Graph::from_text(&gt).map_err(|e| InputError::Load(e.to_string()))?;
            let dt = std::fs::read_to_string(decomposition)
                .map_err(|e| InputError::Load(format!("{}: {e}", decomposition.display())))?;
            let d = Decomposition::from_text(g.n(), &dt).map_err(|e| InputError::Load(e.to_string()))?;
            (g, d, c)
        }
    };
    let min = min_colors(graph.delta()).map_err(|e| InputError::Load(e.to_string()))?;
    let c = cfg.c.unwrap_or(file_c);
    if c < min {
        return Err(InputError::TooFewColors { c, min });
    }
    let validation = validate(&graph, &dec, c, &k);
    if !validation.passed {
        return Err(InputError::Invalid(Box::new(validation)));
    }
    Ok(Instance { graph, dec, c, constants: k, validation })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunStatus {
    Success,
    StageAbort { stage: String, error: String },
    AuditFailure { failed: Vec<String> },
    InputInvalid { error: String },
}

impl RunStatus {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunStatus::Success => 0,
            RunStatus::StageAbort { .. } => 2,
            RunStatus::AuditFailure { .. } => 3,
            RunStatus::InputInvalid { .. } => 4,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LedgerSummary {
    pub steps: usize,
    pub base_budget: f64,
    pub max_utilization: f64,
    pub violations: usize,
    pub replay_ok: bool,
    /// Largest cumulative CC over all (clique, color).
    pub max_cumulative: usize,
    pub cumulative_bound: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Traces {
    pub sparse: Option<SparseTrace>,
    pub b_h: Option<CwmsTrace>,
    pub a_h: Option<CliqueTrace>,
    pub b_l: Option<CwmsTrace>,
    pub a_l: Option<CliqueTrace>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub status: RunStatus,
    pub success: bool,
    pub n: usize,
    pub delta: u64,
    pub c: u32,
    pub seed: u64,
    pub constants: AnalysisConstants,
    /// `None` when Δ₀ is not configured.
    pub below_delta0: Option<bool>,
    pub certificate: Option<usize>,
    pub stage_sequence: Vec<String>,
    pub stage_rounds: Vec<(String, u64)>,
    pub rounds_simulated: u64,
    pub largest_component: usize,
    pub component_hist: std::collections::BTreeMap<usize, usize>,
    pub outcomes: Vec<ShatterOutcome>,
    pub ledger: LedgerSummary,
    pub audits: Vec<AuditReport>,
    pub traces: Traces,
    pub wall_ms: u128,
    /// Final colors, only when the coloring is complete and proper.
    pub coloring: Option<Vec<u32>>,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        self.status.exit_code()
    }

    /// All checks of one claim across stages.
    pub fn checks(&self, claim: &str) -> Vec<&crate::audit::Check> {
        self.audits.iter().flat_map(|a| a.find(claim)).collect()
    }
}

fn stage_name(e: &StageError) -> String {
    match e {
        StageError::Precondition { stage, .. }
        | StageError::Invariant { stage, .. }
        | StageError::Pious { stage, .. }
        | StageError::CapReached { stage, .. }
        | StageError::Properness { stage, .. }
        | StageError::CcBreach { stage, .. } => stage.clone(),
        StageError::Hall { .. } => "hall-matching".into(),
        StageError::Lll(_) => "lll".into(),
    }
}

#[derive(Default)]
struct Recorder {
    sequence: Vec<String>,
    rounds: Vec<(String, u64)>,
    mark: u64,
}

impl Recorder {
    fn enter(&mut self, name: &str, state: &State) {
        self.sequence.push(name.to_string());
        self.mark = state.rounds_simulated;
    }

    fn leave(&mut self, state: &State) {
        let name = self.sequence.last().cloned().unwrap_or_default();
        self.rounds.push((name, state.rounds_simulated - self.mark));
    }
}

fn run_stages(ctx: &Ctx<'_>, state: &mut State, traces: &mut Traces, rec: &mut Recorder) -> Result<(), StageError> {
    let dec = ctx.dec;
    let th = &ctx.th;
    rec.enter(STAGE_ORDER[0], state);
    traces.sparse = Some(color_sparse(ctx, state, &dec.s)?);
    rec.leave(state);
    rec.enter(STAGE_ORDER[1], state);
    traces.b_h = Some(color_with_much_slack(ctx, state, &PiousContext::new("B_H", dec.b_h.clone(), th.u_h))?);
    rec.leave(state);
    rec.enter(STAGE_ORDER[2], state);
    traces.a_h = Some(color_cliques(ctx, state, "A_H", &dec.tier_cliques(Tier::H))?);
    rec.leave(state);
    rec.enter(STAGE_ORDER[3], state);
    traces.b_l = Some(color_with_much_slack(ctx, state, &PiousContext::new("B_L", dec.b_l.clone(), th.u_l))?);
    rec.leave(state);
    rec.enter(STAGE_ORDER[4], state);
    traces.a_l = Some(color_cliques(ctx, state, "A_L", &dec.tier_cliques(Tier::L))?);
    rec.leave(state);
    Ok(())
}

/// Runs the pipeline on a loaded instance.
pub fn run_instance(inst: &Instance, cfg: &RunConfig) -> RunReport {
    run_instance_with_state(inst, cfg).0
}

/// Like `run_instance`, also returning the final pipeline state (coloring
/// with step stamps and the full CC ledger).
pub fn run_instance_with_state(inst: &Instance, cfg: &RunConfig) -> (RunReport, State) {
    let start = Instant::now();
    let g = &inst.graph;
    let dec = &inst.dec;
    let k = &inst.constants;
    let mut ctx = Ctx::new(g, dec, k, inst.c, cfg.seed);
    if let Some(s) = cfg.schedule_seed {
        ctx = ctx.with_schedule(Schedule::shuffled(g.n(), s));
    }
    let mut state = State::new(&ctx);
    let mut report = RunReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        status: RunStatus::Success,
        success: false,
        n: g.n(),
        delta: g.delta(),
        c: inst.c,
        seed: cfg.seed,
        constants: k.clone(),
        below_delta0: k.delta0.map(|d0| g.delta() < d0),
        certificate: None,
        stage_sequence: Vec::new(),
        stage_rounds: Vec::new(),
        rounds_simulated: 0,
        largest_component: 0,
        component_hist: Default::default(),
        outcomes: Vec::new(),
        ledger: LedgerSummary::default(),
        audits: Vec::new(),
        traces: Traces::default(),
        wall_ms: 0,
        coloring: None,
    };
    if cfg.certificate_check {
        if let Ok(Some(v)) = certificate_check(g, inst.c, k.certificate_cap) {
            report.certificate = Some(v);
        }
    }

    let mut rec = Recorder::default();
    let result = run_stages(&ctx, &mut state, &mut report.traces, &mut rec);
    report.stage_sequence = rec.sequence;
    report.stage_rounds = rec.rounds;

    let mut final_audit = AuditReport::new("final");
    let expected: Vec<String> = STAGE_ORDER.iter().map(|s| s.to_string()).collect();
    let seq_ok = report.stage_sequence.iter().zip(&expected).all(|(a, b)| a == b);
    final_audit.zero("stage-order", (!seq_ok) as usize, report.stage_sequence.join(","));

    match &result {
        Err(e) => {
            report.status = RunStatus::StageAbort { stage: stage_name(e), error: e.to_string() };
        }
        Ok(()) => {
            let scan = properness_scan(g, &state.coloring);
            final_audit.zero("properness", scan.is_some() as usize, scan.map_or(String::new(), |e| format!("{e:?}")));
            let left = g.n() - state.coloring.count_colored();
            final_audit.zero("all-colored", left, String::new());
            let replay = state.ledger.replay(g, dec);
            final_audit.zero("ledger-replay", (!replay) as usize, String::new());
            final_audit.zero("cc-per-step", state.ledger.violations().len(), String::new());
            let cum = dec.cliques.iter().map(|q| max_cumulative_cc(g, q, &state.coloring).1).max().unwrap_or(0);
            final_audit.at_most("cc-cumulative", cum as f64, ctx.th.cumulative_cc);
            let colors_ok = state.coloring.colors().iter().flatten().all(|&x| x >= 1 && x <= inst.c);
            final_audit.zero("color-range", (!colors_ok) as usize, String::new());
            report.ledger = LedgerSummary {
                steps: state.ledger.steps().len(),
                base_budget: state.ledger.base_budget(),
                max_utilization: state.ledger.max_utilization(),
                violations: state.ledger.violations().len(),
                replay_ok: replay,
                max_cumulative: cum,
                cumulative_bound: ctx.th.cumulative_cc,
            };
        }
    }
    // anti-rot: every stage that ran registered at least one claim
    let silent: Vec<&str> = STAGE_ORDER
        .iter()
        .copied()
        .filter(|s| report.stage_sequence.iter().any(|x| x == s) && result.is_ok())
        .filter(|s| {
            let prefix = match *s {
                "color-sparse" => "slack-generation",
                other => other,
            };
            !state.audits.iter().any(|a| a.stage.starts_with(prefix) && a.registered() > 0)
        })
        .collect();
    final_audit.zero("audit-registered", silent.len(), silent.join(","));
    state.audits.push(final_audit);

    for o in &state.outcomes {
        report.largest_component = report.largest_component.max(o.largest_component);
        for (&s, &c) in &o.component_hist {
            *report.component_hist.entry(s).or_insert(0) += c;
        }
    }
    report.rounds_simulated = state.rounds_simulated;
    report.outcomes = std::mem::take(&mut state.outcomes);
    report.audits = std::mem::take(&mut state.audits);

    if result.is_ok() {
        let failed: Vec<String> = report
            .audits
            .iter()
            .flat_map(|a| a.checks.iter().map(move |c| (a, c)))
            .filter(|(_, c)| !c.passed)
            .filter(|(_, c)| match c.kind {
                CheckKind::Deterministic => true,
                CheckKind::Statistical => cfg.audit == AuditMode::Strict,
                CheckKind::Analytic => false,
            })
            .map(|(a, c)| format!("{}:{}", a.stage, c.claim))
            .collect();
        if failed.is_empty() {
            report.success = true;
            report.coloring = Some(state.coloring.to_vec());
        } else {
            report.status = RunStatus::AuditFailure { failed };
        }
    }
    report.wall_ms = start.elapsed().as_millis();
    (report, state)
}

/// Loads and runs; input failures become an `InputInvalid` report.
pub fn run_pipeline(cfg: &RunConfig) -> RunReport {
    match load(cfg) {
        Ok(inst) => run_instance(&inst, cfg),
        Err(e) => invalid_report(cfg, e),
    }
}

fn invalid_report(cfg: &RunConfig, e: InputError) -> RunReport {
    RunReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        status: RunStatus::InputInvalid { error: e.to_string() },
        success: false,
        n: 0,
        delta: 0,
        c: cfg.c.unwrap_or(0),
        seed: cfg.seed,
        constants: cfg.constants.clone(),
        below_delta0: None,
        certificate: None,
        stage_sequence: Vec::new(),
        stage_rounds: Vec::new(),
        rounds_simulated: 0,
        largest_component: 0,
        component_hist: Default::default(),
        outcomes: Vec::new(),
        ledger: LedgerSummary::default(),
        audits: Vec::new(),
        traces: Traces::default(),
        wall_ms: 0,
        coloring: None,
    }
}

/// One row of a batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub n: usize,
    pub status: RunStatus,
    pub largest_component: usize,
    pub max_utilization: f64,
    pub max_cumulative: usize,
    pub rounds_simulated: u64,
    pub wall_ms: u128,
}

impl From<&RunReport> for RunSummary {
    fn from(r: &RunReport) -> Self {
        Self {
            seed: r.seed,
            n: r.n,
            status: r.status.clone(),
            largest_component: r.largest_component,
            max_utilization: r.ledger.max_utilization,
            max_cumulative: r.ledger.max_cumulative,
            rounds_simulated: r.rounds_simulated,
            wall_ms: r.wall_ms,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub runs: Vec<RunSummary>,
    pub successes: usize,
    pub success_rate: f64,
    /// 95% Wilson interval of the success rate.
    pub wilson: (f64, f64),
    pub largest_component_median: f64,
    pub largest_component_max: usize,
    pub max_utilization: f64,
    pub mean_rounds: f64,
    pub stage_rounds_mean: Vec<(String, f64)>,
}

/// Seeds of a batch: seed, seed + stride, …
pub fn batch_seeds(cfg: &RunConfig) -> Vec<u64> {
    (0..cfg.batch.max(1) as u64).map(|i| cfg.seed.wrapping_add(i * cfg.seed_stride)).collect()
}

/// Config of the i-th batch member: the run seed and, for generated input,
/// the instance seed advance together.
pub fn batch_member(cfg: &RunConfig, seed: u64) -> RunConfig {
    let mut c = cfg.clone();
    c.seed = seed;
    c.batch = 1;
    if let Input::Generate(p) = &mut c.input {
        p.seed = seed;
    }
    c
}

pub fn run_batch(cfg: &RunConfig) -> (BatchReport, Vec<RunReport>) {
    let seeds = batch_seeds(cfg);
    let reports = crate::par::map(&seeds, |&s| run_pipeline(&batch_member(cfg, s)));
    (aggregate(&reports), reports)
}

pub fn aggregate(reports: &[RunReport]) -> BatchReport {
    let n = reports.len();
    let successes = reports.iter().filter(|r| r.success).count();
    let mut comps: Vec<usize> = reports.iter().map(|r| r.largest_component).collect();
    comps.sort_unstable();
    let median = match n {
        0 => 0.0,
        _ if n % 2 == 1 => comps[n / 2] as f64,
        _ => (comps[n / 2 - 1] + comps[n / 2]) as f64 / 2.0,
    };
    let mut stage_rounds_mean: Vec<(String, f64)> = STAGE_ORDER.iter().map(|s| (s.to_string(), 0.0)).collect();
    for r in reports {
        for (name, rounds) in &r.stage_rounds {
            if let Some(e) = stage_rounds_mean.iter_mut().find(|(s, _)| s == name) {
                e.1 += *rounds as f64 / n.max(1) as f64;
            }
        }
    }
    BatchReport {
        runs: reports.iter().map(RunSummary::from).collect(),
        successes,
        success_rate: if n == 0 { 0.0 } else { successes as f64 / n as f64 },
        wilson: wilson(successes, n, 1.96),
        largest_component_median: median,
        largest_component_max: comps.last().copied().unwrap_or(0),
        max_utilization: reports.iter().map(|r| r.ledger.max_utilization).fold(0.0, f64::max),
        mean_rounds: reports.iter().map(|r| r.rounds_simulated as f64).sum::<f64>() / n.max(1) as f64,
        stage_rounds_mean,
    }
}

/// Flat CSV of a batch, one line per run.
pub fn batch_csv(b: &BatchReport) -> String {
    let mut out = String::from("seed,n,status,largest_component,max_utilization,max_cumulative,rounds,wall_ms\n");
    for r in &b.runs {
        let status = match &r.status {
            RunStatus::Success => "success",
            RunStatus::StageAbort { .. } => "stage-abort",
            RunStatus::AuditFailure { .. } => "audit-failure",
            RunStatus::InputInvalid { .. } => "input-invalid",
        };
        out.push_str(&format!(
            "{},{},{},{},{:.4},{},{},{}\n",
            r.seed, r.n, status, r.largest_component, r.max_utilization, r.max_cumulative, r.rounds_simulated, r.wall_ms
        ));
    }
    out
}

/// Re-validates a saved report against its input: the embedded coloring
/// must be complete, proper and within [1, c].
pub fn replay(report: &RunReport, graph: &Graph) -> Result<(), String> {
    let colors = report.coloring.as_ref().ok_or("report carries no coloring")?;
    if colors.len() != graph.n() {
        return Err(format!("coloring has {} entries, graph has {} vertices", colors.len(), graph.n()));
    }
    for (u, &x) in colors.iter().enumerate() {
        if x == 0 || x > report.c {
            return Err(format!("vertex {u} has color {x} outside [1, {}]", report.c));
        }
        for &v in graph.neighbors(u) {
            if u < v && colors[v] == x {
                return Err(format!("monochromatic edge ({u}, {v})"));
            }
        }
    }
    Ok(())
}
