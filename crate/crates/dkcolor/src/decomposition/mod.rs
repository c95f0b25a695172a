//! The five-way split S / B_H / B_L / A_H / A_L of F, with per-clique
//! All_i and Big_i⁺ sets.

mod certificate;
mod generate;
mod mutate;
mod validate;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use certificate::{certificate_check, chromatic_number, is_k_colorable, CapacityError};
pub use generate::{generate, GenError, GenParams};
pub use mutate::{inject, FaultKind, Mutation, ALL_FAULTS};
pub use validate::{validate, RuleId, ValidationReport, Violation};

use crate::constants::Thresholds;
use crate::graph::{DomainError, Graph};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tier {
    H,
    L,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Part {
    S,
    BH,
    BL,
    Clique(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CliqueInfo {
    pub id: usize,
    pub members: Vec<usize>,
    pub all: Vec<usize>,
    pub big_plus: Vec<usize>,
    pub tier: Tier,
}

impl CliqueInfo {
    pub fn contains(&self, v: usize) -> bool {
        self.members.binary_search(&v).is_ok()
    }

    pub fn min_member(&self) -> usize {
        self.members[0]
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StructuralError {
    #[error("vertex {0} out of range")]
    OutOfRange(usize),
    #[error("vertex {0} assigned to more than one part")]
    Duplicate(usize),
    #[error("vertex {0} assigned to no part")]
    Missing(usize),
    #[error("clique {0} has id {1} but sits at index {0}")]
    BadId(usize, usize),
    #[error("clique {0} is empty")]
    EmptyClique(usize),
    #[error("All_{clique} vertex {v} is not in B_H ∪ B_L")]
    AllOutsideB { clique: usize, v: usize },
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decomposition {
    pub s: Vec<usize>,
    pub b_h: Vec<usize>,
    pub b_l: Vec<usize>,
    pub cliques: Vec<CliqueInfo>,
    pub membership: Vec<Part>,
}

impl Decomposition {
    /// Checks that the parts partition 0..n exactly and builds membership.
    pub fn new(
        n: usize,
        mut s: Vec<usize>,
        mut b_h: Vec<usize>,
        mut b_l: Vec<usize>,
        mut cliques: Vec<CliqueInfo>,
    ) -> Result<Self, StructuralError> {
        let mut membership: Vec<Option<Part>> = vec![None; n];
        let mut put = |v: usize, p: Part| -> Result<(), StructuralError> {
            if v >= n {
                return Err(StructuralError::OutOfRange(v));
            }
            if membership[v].is_some() {
                return Err(StructuralError::Duplicate(v));
            }
            membership[v] = Some(p);
            Ok(())
        };
        s.sort_unstable();
        b_h.sort_unstable();
        b_l.sort_unstable();
        for &v in &s {
            put(v, Part::S)?;
        }
        for &v in &b_h {
            put(v, Part::BH)?;
        }
        for &v in &b_l {
            put(v, Part::BL)?;
        }
        for (i, q) in cliques.iter_mut().enumerate() {
            if q.id != i {
                return Err(StructuralError::BadId(i, q.id));
            }
            if q.members.is_empty() {
                return Err(StructuralError::EmptyClique(i));
            }
            q.members.sort_unstable();
            q.all.sort_unstable();
            q.big_plus.sort_unstable();
            for &v in &q.members {
                put(v, Part::Clique(i))?;
            }
        }
        let membership: Vec<Part> = membership
            .into_iter()
            .enumerate()
            .map(|(v, p)| p.ok_or(StructuralError::Missing(v)))
            .collect::<Result<_, _>>()?;
        for q in &cliques {
            for &v in q.all.iter().chain(q.big_plus.iter()) {
                if v >= n {
                    return Err(StructuralError::OutOfRange(v));
                }
            }
            for &v in &q.all {
                if !matches!(membership[v], Part::BH | Part::BL) {
                    return Err(StructuralError::AllOutsideB { clique: q.id, v });
                }
            }
        }
        Ok(Self { s, b_h, b_l, cliques, membership })
    }

    pub fn n(&self) -> usize {
        self.membership.len()
    }

    pub fn clique_of(&self, v: usize) -> Option<usize> {
        match self.membership[v] {
            Part::Clique(i) => Some(i),
            _ => None,
        }
    }

    pub fn tier_cliques(&self, tier: Tier) -> Vec<usize> {
        self.cliques.iter().filter(|q| q.tier == tier).map(|q| q.id).collect()
    }

    pub fn tier_members(&self, tier: Tier) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .cliques
            .iter()
            .filter(|q| q.tier == tier)
            .flat_map(|q| q.members.iter().copied())
            .collect();
        v.sort_unstable();
        v
    }

    /// A_i ∪ All_i ∪ Big_i⁺ as a sorted list; used for coverage exclusion.
    pub fn cc_excluded(&self, i: usize) -> Vec<usize> {
        let q = &self.cliques[i];
        let mut v: Vec<usize> = q.members.iter().chain(&q.all).chain(&q.big_plus).copied().collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Cliques with at least one edge into clique i (excluding i).
    pub fn adjacent_cliques(&self, graph: &Graph, i: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.cliques[i]
            .members
            .iter()
            .flat_map(|&v| graph.neighbors(v).iter().filter_map(|&w| self.clique_of(w)))
            .filter(|&j| j != i)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let join = |xs: &[usize]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        let _ = writeln!(s, "S {}", join(&self.s));
        let _ = writeln!(s, "BH {}", join(&self.b_h));
        let _ = writeln!(s, "BL {}", join(&self.b_l));
        for q in &self.cliques {
            let tag = match q.tier {
                Tier::H => "AH",
                Tier::L => "AL",
            };
            let _ = writeln!(s, "{tag} {}: {} | {} | {}", q.id, join(&q.members), join(&q.all), join(&q.big_plus));
        }
        s
    }

    pub fn from_text(n: usize, text: &str) -> Result<Self, StructuralError> {
        let parse_list = |line: usize, s: &str| -> Result<Vec<usize>, StructuralError> {
            s.split_whitespace()
                .map(|t| t.parse::<usize>().map_err(|e| StructuralError::Parse { line, msg: e.to_string() }))
                .collect()
        };
        let (mut s, mut b_h, mut b_l, mut cliques) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let (tag, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
            match tag {
                "S" => s = parse_list(ln + 1, rest)?,
                "BH" => b_h = parse_list(ln + 1, rest)?,
                "BL" => b_l = parse_list(ln + 1, rest)?,
                "AH" | "AL" => {
                    let (id, body) = rest
                        .split_once(':')
                        .ok_or(StructuralError::Parse { line: ln + 1, msg: "missing `:`".into() })?;
                    let id: usize = id
                        .trim()
                        .parse()
                        .map_err(|_| StructuralError::Parse { line: ln + 1, msg: "bad clique id".into() })?;
                    let fields: Vec<&str> = body.split('|').collect();
                    if fields.len() != 3 {
                        return Err(StructuralError::Parse {
                            line: ln + 1,
                            msg: "expected `members | all | bigplus`".into(),
                        });
                    }
                    cliques.push(CliqueInfo {
                        id,
                        members: parse_list(ln + 1, fields[0])?,
                        all: parse_list(ln + 1, fields[1])?,
                        big_plus: parse_list(ln + 1, fields[2])?,
                        tier: if tag == "AH" { Tier::H } else { Tier::L },
                    });
                }
                other => {
                    return Err(StructuralError::Parse { line: ln + 1, msg: format!("unknown tag `{other}`") })
                }
            }
        }
        Self::new(n, s, b_h, b_l, cliques)
    }
}

/// N(v) minus (A_i ∪ All_i).
pub fn external_neighbors(v: usize, clique: &CliqueInfo, graph: &Graph) -> Result<Vec<usize>, DomainError> {
    if !clique.contains(v) {
        return Err(DomainError::NotInClique(v, clique.id));
    }
    Ok(graph
        .neighbors(v)
        .iter()
        .copied()
        .filter(|&w| !clique.contains(w) && clique.all.binary_search(&w).is_err())
        .collect())
}

/// Vertices outside A_i ∪ All_i with at least `big_plus_min` neighbors in A_i.
pub fn compute_big_plus(graph: &Graph, clique: &CliqueInfo, th: &Thresholds) -> Vec<usize> {
    let mut count = std::collections::BTreeMap::<usize, usize>::new();
    for &v in &clique.members {
        for &w in graph.neighbors(v) {
            if !clique.contains(w) && clique.all.binary_search(&w).is_err() {
                *count.entry(w).or_default() += 1;
            }
        }
    }
    count
        .into_iter()
        .filter(|&(_, k)| k as f64 >= th.big_plus_min)
        .map(|(w, _)| w)
        .collect()
}
