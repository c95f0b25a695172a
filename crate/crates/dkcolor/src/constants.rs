//! Analysis constants and the thresholds derived from them for a given Δ.
//!
//! The defaults are the asymptotic values. They make every desk-sized graph
//! either trivially valid or hopeless, so `desk()` ships a set of
//! `scale_overrides` that shrink coefficients while keeping the exponents.
//! Reports always echo the effective values.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConstantsError {
    #[error("unknown constant `{0}`")]
    Unknown(String),
    #[error("constant `{name}` = {value} violates {rule}")]
    Invalid { name: String, value: f64, rule: &'static str },
    #[error("malformed override `{0}`, expected name=value")]
    Malformed(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConstants {
    /// Per-step color coverage budget Δ^e.
    pub cc_budget_exponent: f64,
    /// Marking probability 1/(Q·Δ^e) in the set-marking model.
    pub marking_exponent: f64,
    /// Degree floor Δ^e below which the degree-drop events are not tracked.
    pub degree_floor_exponent: f64,
    /// Trials per vertex in the multi-color trial, ⌈Δ^e⌉.
    pub mct_trials_exponent: f64,
    /// Slack exponent in the Π property, U·Δ^e.
    pub slack_exponent: f64,
    /// MCT slack precondition Δ^e.
    pub mct_slack_exponent: f64,
    /// Candidate subsampling probability Δ^e.
    pub subsample_exponent: f64,
    pub candidate_pre_floor_divisor: f64,
    pub candidate_floor_divisor: f64,
    pub candidate_load_divisor: f64,
    pub rct_activation: f64,
    pub drop_factor: f64,
    pub split_p_coeff: f64,
    pub split_p_exponent: f64,
    pub big_plus_coeff: f64,
    pub big_plus_exponent: f64,
    /// Coefficient of the 10⁸·√Δ family: H external degree, clique size
    /// slack, U_H and the unhappy bound.
    pub ext_degree_coeff_h: f64,
    pub ext_degree_exp_h: f64,
    pub ext_degree_coeff_l: f64,
    pub ext_degree_exp_l: f64,
    /// Non-edge quota coefficient for dense sparse-part vertices.
    pub sparse_nonedge_coeff: f64,
    pub f_degree_coeff: f64,
    /// List-size surplus after slack generation, coefficient of √Δ.
    pub listsize_coeff: f64,
    /// Degree splitting constant α.
    pub alpha: f64,
    pub sg_join_prob: f64,
    pub sg_post_prob: f64,
    /// Coefficient inside the iteration cap ⌈180·ln(coeff·Δ^{9/10})⌉.
    pub iteration_cap_coeff: f64,
    pub resample_budget: u64,
    pub certificate_cap: usize,
    /// Below this Δ the analysis makes no promise; reported, never guessed.
    pub delta0: Option<u64>,
    pub scale_overrides: BTreeMap<String, f64>,
}

impl Default for AnalysisConstants {
    fn default() -> Self {
        Self {
            cc_budget_exponent: 37.0 / 40.0,
            marking_exponent: 1.0 / 5.0,
            degree_floor_exponent: 1.0 / 10.0,
            mct_trials_exponent: 1.0 / 10.0,
            slack_exponent: 0.22,
            mct_slack_exponent: 9.0 / 20.0,
            subsample_exponent: -23.0 / 40.0,
            candidate_pre_floor_divisor: 20.0,
            candidate_floor_divisor: 40.0,
            candidate_load_divisor: 80.0,
            rct_activation: 0.25,
            drop_factor: 1.0 / 180.0,
            split_p_coeff: 2.0,
            split_p_exponent: -0.25,
            big_plus_coeff: 2.0,
            big_plus_exponent: 0.9,
            ext_degree_coeff_h: 1e8,
            ext_degree_exp_h: 0.5,
            ext_degree_coeff_l: 30.0,
            ext_degree_exp_l: 0.25,
            sparse_nonedge_coeff: 9e5,
            f_degree_coeff: 1e9,
            listsize_coeff: 0.05,
            alpha: 4.0,
            sg_join_prob: 0.5,
            sg_post_prob: 0.75,
            iteration_cap_coeff: 1e9,
            resample_budget: 10_000,
            certificate_cap: 160,
            delta0: None,
            scale_overrides: BTreeMap::new(),
        }
    }
}

pub const DESK_OVERRIDES: &[(&str, f64)] = &[
    ("ext_degree_coeff_h", 1.0),
    ("sparse_nonedge_coeff", 1.0),
    ("ext_degree_coeff_l", 2.0),
    ("listsize_coeff", 2.0),
    ("alpha", 0.4),
    ("sg_join_prob", 0.1),
    ("rct_activation", 1.0),
    ("subsample_exponent", -0.25),
    ("candidate_pre_floor_divisor", 2.0),
    ("candidate_floor_divisor", 2.0),
    ("candidate_load_divisor", 4.0),
    ("iteration_cap_coeff", 1.0),
    ("degree_floor_exponent", 0.2),
];

impl AnalysisConstants {
    pub fn paper() -> Self {
        Self::default()
    }

    /// Paper constants plus the desk-scale overrides.
    pub fn desk() -> Self {
        let mut k = Self::default();
        for (name, v) in DESK_OVERRIDES {
            k.scale_overrides.insert((*name).to_string(), *v);
        }
        k
    }

    pub fn with_override(mut self, name: &str, value: f64) -> Self {
        self.scale_overrides.insert(name.to_string(), value);
        self
    }

    /// Parses `name=value`.
    pub fn push_override(&mut self, spec: &str) -> Result<(), ConstantsError> {
        let (name, value) = spec
            .split_once('=')
            .ok_or_else(|| ConstantsError::Malformed(spec.to_string()))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| ConstantsError::Malformed(spec.to_string()))?;
        self.scale_overrides.insert(name.trim().to_string(), value);
        Ok(())
    }

    /// Applies `scale_overrides` and checks the result. The returned value has
    /// an empty override map and is what every stage reads.
    pub fn effective(&self) -> Result<AnalysisConstants, ConstantsError> {
        let mut base = self.clone();
        base.scale_overrides.clear();
        let mut value = serde_json::to_value(&base).expect("constants serialize");
        let obj = value.as_object_mut().expect("object");
        for (name, v) in &self.scale_overrides {
            if name == "scale_overrides" || !obj.contains_key(name) {
                return Err(ConstantsError::Unknown(name.clone()));
            }
            let slot = obj.get_mut(name).unwrap();
            *slot = match slot {
                serde_json::Value::Number(n) if n.is_u64() => {
                    serde_json::Value::from(v.max(0.0).round() as u64)
                }
                serde_json::Value::Null => serde_json::Value::from(v.max(0.0).round() as u64),
                _ => serde_json::Value::from(*v),
            };
        }
        let eff: AnalysisConstants =
            serde_json::from_value(value).map_err(|e| ConstantsError::Malformed(e.to_string()))?;
        eff.check()?;
        Ok(eff)
    }

    pub fn check(&self) -> Result<(), ConstantsError> {
        let exps = [
            ("cc_budget_exponent", self.cc_budget_exponent),
            ("marking_exponent", self.marking_exponent),
            ("degree_floor_exponent", self.degree_floor_exponent),
            ("mct_trials_exponent", self.mct_trials_exponent),
            ("slack_exponent", self.slack_exponent),
            ("mct_slack_exponent", self.mct_slack_exponent),
            ("subsample_exponent", self.subsample_exponent),
            ("split_p_exponent", self.split_p_exponent),
            ("big_plus_exponent", self.big_plus_exponent),
            ("ext_degree_exp_h", self.ext_degree_exp_h),
            ("ext_degree_exp_l", self.ext_degree_exp_l),
        ];
        for (name, e) in exps {
            if !(e.abs() > 0.0 && e.abs() <= 1.0) {
                return Err(ConstantsError::Invalid {
                    name: name.into(),
                    value: e,
                    rule: "exponent magnitude in (0, 1]",
                });
            }
        }
        if self.cc_budget_exponent >= 1.0 {
            return Err(ConstantsError::Invalid {
                name: "cc_budget_exponent".into(),
                value: self.cc_budget_exponent,
                rule: "cc_budget_exponent < 1",
            });
        }
        let coeffs = [
            ("candidate_pre_floor_divisor", self.candidate_pre_floor_divisor),
            ("candidate_floor_divisor", self.candidate_floor_divisor),
            ("candidate_load_divisor", self.candidate_load_divisor),
            ("drop_factor", self.drop_factor),
            ("split_p_coeff", self.split_p_coeff),
            ("big_plus_coeff", self.big_plus_coeff),
            ("ext_degree_coeff_h", self.ext_degree_coeff_h),
            ("ext_degree_coeff_l", self.ext_degree_coeff_l),
            ("sparse_nonedge_coeff", self.sparse_nonedge_coeff),
            ("f_degree_coeff", self.f_degree_coeff),
            ("listsize_coeff", self.listsize_coeff),
            ("alpha", self.alpha),
            ("iteration_cap_coeff", self.iteration_cap_coeff),
        ];
        for (name, v) in coeffs {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConstantsError::Invalid { name: name.into(), value: v, rule: "coefficient > 0" });
            }
        }
        let probs = [
            ("rct_activation", self.rct_activation),
            ("sg_join_prob", self.sg_join_prob),
            ("sg_post_prob", self.sg_post_prob),
        ];
        for (name, v) in probs {
            if !(v > 0.0 && v <= 1.0) {
                return Err(ConstantsError::Invalid { name: name.into(), value: v, rule: "probability in (0, 1]" });
            }
        }
        if self.drop_factor >= 1.0 {
            return Err(ConstantsError::Invalid {
                name: "drop_factor".into(),
                value: self.drop_factor,
                rule: "drop_factor < 1",
            });
        }
        if self.resample_budget == 0 || self.certificate_cap == 0 {
            return Err(ConstantsError::Invalid {
                name: "resample_budget/certificate_cap".into(),
                value: 0.0,
                rule: "caps positive",
            });
        }
        Ok(())
    }
}

/// Numeric thresholds for one (constants, Δ, c) triple.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub delta: f64,
    pub c: u32,
    pub sqrt_delta: f64,
    pub cc_budget: f64,
    pub cumulative_cc: f64,
    pub degree_floor: f64,
    pub mct_trials: usize,
    pub mct_slack: f64,
    pub drop_keep: f64,
    pub big_plus_min: f64,
    pub big_plus_max: f64,
    pub ext_h: f64,
    pub ext_l: f64,
    pub clique_min: f64,
    pub sparse_deg: f64,
    pub sparse_nonedges: f64,
    pub f_degree: f64,
    pub bh_outside: f64,
    pub bl_outside: f64,
    pub u_h: f64,
    pub u_l: f64,
    pub u_1: f64,
    pub u_2: f64,
    pub listsize: f64,
    pub split_p: f64,
    pub split_min_degree: f64,
    pub sub_p: f64,
    pub sub_scale: f64,
    pub cand_pre_floor: f64,
    pub cand_floor: f64,
    pub cand_load: f64,
    pub unhappy_event: f64,
    pub unhappy_audit: f64,
    pub iteration_cap: u64,
    pub palette_split: u32,
}

impl Thresholds {
    pub fn new(k: &AnalysisConstants, delta: u64, c: u32) -> Self {
        let d = delta as f64;
        let sq = d.sqrt();
        let ln = d.ln();
        let split_p = (k.split_p_coeff * d.powf(k.split_p_exponent)).min(1.0);
        let sub_p = d.powf(k.subsample_exponent).min(1.0);
        let sub_scale = sub_p * d;
        let u_h = k.ext_degree_coeff_h * d.powf(k.ext_degree_exp_h);
        Thresholds {
            delta: d,
            c,
            sqrt_delta: sq,
            cc_budget: d.powf(k.cc_budget_exponent),
            cumulative_cc: 0.8 * d,
            degree_floor: d.powf(k.degree_floor_exponent),
            mct_trials: d.powf(k.mct_trials_exponent).ceil().max(1.0) as usize,
            mct_slack: d.powf(k.mct_slack_exponent),
            drop_keep: 1.0 - k.drop_factor,
            big_plus_min: k.big_plus_coeff * d.powf(k.big_plus_exponent),
            big_plus_max: 0.75 * d + k.ext_degree_coeff_h * sq,
            ext_h: u_h,
            ext_l: k.ext_degree_coeff_l * d.powf(k.ext_degree_exp_l),
            clique_min: c as f64 - k.ext_degree_coeff_h * sq,
            sparse_deg: d - 3.0 * sq,
            sparse_nonedges: k.sparse_nonedge_coeff * d.powf(1.5),
            f_degree: k.f_degree_coeff * d,
            bh_outside: c as f64 - d.powf(0.75),
            bl_outside: c as f64 - sq + 9.0,
            u_h,
            u_l: k.ext_degree_coeff_l * d.powf(k.ext_degree_exp_l),
            u_1: u_h,
            u_2: k.alpha * d.powf(0.25) * ln,
            listsize: k.listsize_coeff * sq,
            split_p,
            split_min_degree: k.alpha / split_p * ln,
            sub_p,
            sub_scale,
            cand_pre_floor: sub_scale / k.candidate_pre_floor_divisor,
            cand_floor: sub_scale / k.candidate_floor_divisor,
            cand_load: sub_scale / k.candidate_load_divisor,
            unhappy_event: u_h,
            unhappy_audit: (k.ext_degree_coeff_h + 1.0) * sq,
            iteration_cap: iteration_cap(k.iteration_cap_coeff, delta),
            palette_split: (delta / 2) as u32,
        }
    }

    /// Π(b) surplus U·Δ^{slack exponent}.
    pub fn pious_surplus(&self, k: &AnalysisConstants, u: f64) -> f64 {
        u * self.delta.powf(k.slack_exponent)
    }
}

/// ⌈180·ln(coeff·Δ^{9/10})⌉, the hard stop of the degree-reduction loop.
pub fn iteration_cap(coeff: f64, delta: u64) -> u64 {
    let x = coeff * (delta as f64).powf(0.9);
    (180.0 * x.ln()).ceil().max(0.0) as u64
}
