//! Immutable adjacency structure, k_Δ and the plain-text graph format.

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DomainError {
    #[error("delta must be at least 2, got {0}")]
    DeltaTooSmall(u64),
    #[error("cannot draw from an empty set")]
    EmptySet,
    #[error("vertex {0} is not a member of clique {1}")]
    NotInClique(usize, usize),
    #[error("precondition violated: {0}")]
    Infeasible(String),
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("vertex {v} out of range for n = {n}")]
    OutOfRange { v: usize, n: usize },
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Largest k with (k+1)(k+2) ≤ Δ.
pub fn k_delta(delta: u64) -> Result<u64, DomainError> {
    if delta < 2 {
        return Err(DomainError::DeltaTooSmall(delta));
    }
    // (k+1)(k+2) ≤ Δ  ⇔  (2k+3)² ≤ 4Δ+1
    let r = (4 * delta + 1).isqrt();
    Ok((r - 3) / 2)
}

/// Smallest admissible color count Δ − k_Δ + 1.
pub fn min_colors(delta: u64) -> Result<u32, DomainError> {
    Ok((delta - k_delta(delta)? + 1) as u32)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    n: usize,
    delta: u64,
    adj: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds from an edge list; duplicate edges are merged.
    pub fn from_edges(n: usize, delta: u64, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n {
                return Err(GraphError::OutOfRange { v: u, n });
            }
            if v >= n {
                return Err(GraphError::OutOfRange { v, n });
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self { n, delta, adj })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn delta(&self) -> u64 {
        self.delta
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        let (a, b) = if self.adj[u].len() <= self.adj[v].len() { (u, v) } else { (v, u) };
        self.adj[a].binary_search(&b).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edges (u, v) with u < v in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for u in 0..self.n {
            for &v in &self.adj[u] {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|u| self.adj[u].iter().all(|&v| v != u && self.adj[v].binary_search(&u).is_ok()))
    }

    /// Vertices at distance at most `radius` from `sources`, sorted.
    pub fn ball(&self, sources: &[usize], radius: usize) -> Vec<usize> {
        self.ball_within(sources, radius, |_| true)
    }

    /// Ball restricted to paths through vertices accepted by `inside`.
    /// Sources are always included.
    pub fn ball_within<F: Fn(usize) -> bool>(&self, sources: &[usize], radius: usize, inside: F) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.n];
        let mut q = VecDeque::new();
        for &s in sources {
            if dist[s] == usize::MAX {
                dist[s] = 0;
                q.push_back(s);
            }
        }
        while let Some(u) = q.pop_front() {
            if dist[u] == radius {
                continue;
            }
            for &w in &self.adj[u] {
                if dist[w] == usize::MAX && inside(w) {
                    dist[w] = dist[u] + 1;
                    q.push_back(w);
                }
            }
        }
        (0..self.n).filter(|&v| dist[v] != usize::MAX).collect()
    }

    pub fn to_text(&self, c: u32) -> String {
        let edges = self.edges();
        let mut s = String::with_capacity(16 * edges.len() + 32);
        let _ = writeln!(s, "{} {} {} {}", self.n, edges.len(), self.delta, c);
        for (u, v) in edges {
            let _ = writeln!(s, "{u} {v}");
        }
        s
    }

    /// Parses the "n m delta c" format; returns the graph and c.
    pub fn from_text(text: &str) -> Result<(Self, u32), GraphError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (hl, header) = lines.next().ok_or(GraphError::Parse { line: 1, msg: "empty file".into() })?;
        let nums: Vec<u64> = header
            .split_whitespace()
            .map(|t| t.parse::<u64>())
            .collect::<Result<_, _>>()
            .map_err(|e| GraphError::Parse { line: hl + 1, msg: e.to_string() })?;
        if nums.len() != 4 {
            return Err(GraphError::Parse { line: hl + 1, msg: "header must be `n m delta c`".into() });
        }
        let (n, m, delta, c) = (nums[0] as usize, nums[1] as usize, nums[2], nums[3] as u32);
        let mut edges = Vec::with_capacity(m);
        for (i, line) in lines {
            let mut it = line.split_whitespace();
            let mut next = || -> Result<usize, GraphError> {
                it.next()
                    .ok_or(GraphError::Parse { line: i + 1, msg: "expected `u v`".into() })?
                    .parse::<usize>()
                    .map_err(|e| GraphError::Parse { line: i + 1, msg: e.to_string() })
            };
            let u = next()?;
            let v = next()?;
            edges.push((u, v));
        }
        if edges.len() != m {
            return Err(GraphError::Parse {
                line: 0,
                msg: format!("header announces {m} edges, found {}", edges.len()),
            });
        }
        Ok((Self::from_edges(n, delta, &edges)?, c))
    }
}

/// Membership mask helper.
pub fn mask(n: usize, verts: &[usize]) -> Vec<bool> {
    let mut m = vec![false; n];
    for &v in verts {
        m[v] = true;
    }
    m
}
