//! Machine-readable audit reports.

use serde::{Deserialize, Serialize};

pub const AUDIT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CheckKind {
    /// Exact recount; a failure rejects the run.
    Deterministic,
    /// Empirical frequency against a loose threshold.
    Statistical,
    /// Inequality between constants, reported for information.
    Analytic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub claim: String,
    pub kind: CheckKind,
    pub passed: bool,
    pub measured: f64,
    pub bound: f64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub schema_version: u32,
    pub stage: String,
    pub checks: Vec<Check>,
}

impl AuditReport {
    pub fn new(stage: &str) -> Self {
        Self { schema_version: AUDIT_SCHEMA_VERSION, stage: stage.to_string(), checks: Vec::new() }
    }

    /// Records `measured ≤ bound`.
    pub fn at_most(&mut self, claim: &str, measured: f64, bound: f64) -> bool {
        self.push(claim, CheckKind::Deterministic, measured <= bound, measured, bound, String::new())
    }

    /// Records `measured ≥ bound`.
    pub fn at_least(&mut self, claim: &str, measured: f64, bound: f64) -> bool {
        self.push(claim, CheckKind::Deterministic, measured >= bound, measured, bound, String::new())
    }

    /// Records a violation count that must be zero.
    pub fn zero(&mut self, claim: &str, violations: usize, detail: String) -> bool {
        self.push(claim, CheckKind::Deterministic, violations == 0, violations as f64, 0.0, detail)
    }

    pub fn push(&mut self, claim: &str, kind: CheckKind, passed: bool, measured: f64, bound: f64, detail: String) -> bool {
        self.checks.push(Check { claim: claim.to_string(), kind, passed, measured, bound, detail });
        passed
    }

    pub fn merge(&mut self, other: AuditReport) {
        self.checks.extend(other.checks);
    }

    pub fn deterministic_passed(&self) -> bool {
        self.checks.iter().filter(|c| c.kind == CheckKind::Deterministic).all(|c| c.passed)
    }

    pub fn statistical_passed(&self) -> bool {
        self.checks.iter().filter(|c| c.kind == CheckKind::Statistical).all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed && c.kind != CheckKind::Analytic).collect()
    }

    pub fn find(&self, claim: &str) -> Vec<&Check> {
        self.checks.iter().filter(|c| c.claim == claim).collect()
    }

    pub fn registered(&self) -> usize {
        self.checks.len()
    }
}
