//! Exact small-graph colorability by DSATUR branch and bound.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Graph;

#[derive(Debug, Error, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum CapacityError {
    #[error("closed neighborhood of {vertex} has {size} vertices, cap is {cap}")]
    TooLarge { vertex: usize, size: usize, cap: usize },
    #[error("search budget of {0} nodes exhausted")]
    Budget(u64),
}

const NODE_BUDGET: u64 = 5_000_000;

/// Dense local copy of an induced subgraph.
struct Local {
    n: usize,
    adj: Vec<Vec<bool>>,
}

impl Local {
    fn induced(graph: &Graph, verts: &[usize]) -> Self {
        let n = verts.len();
        let mut adj = vec![vec![false; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                if graph.has_edge(verts[i], verts[j]) {
                    adj[i][j] = true;
                    adj[j][i] = true;
                }
            }
        }
        Self { n, adj }
    }

    fn from_matrix(adj: Vec<Vec<bool>>) -> Self {
        Self { n: adj.len(), adj }
    }
}

struct Search<'a> {
    g: &'a Local,
    k: usize,
    color: Vec<usize>,
    nodes: u64,
}

impl Search<'_> {
    fn pick(&self) -> Option<usize> {
        let mut best: Option<(usize, usize, usize)> = None;
        for v in 0..self.g.n {
            if self.color[v] != 0 {
                continue;
            }
            let mut seen = vec![false; self.k + 1];
            let mut sat = 0;
            let mut deg = 0;
            for w in 0..self.g.n {
                if self.g.adj[v][w] {
                    let x = self.color[w];
                    if x == 0 {
                        deg += 1;
                    } else if !seen[x] {
                        seen[x] = true;
                        sat += 1;
                    }
                }
            }
            if best.map_or(true, |(_, s, d)| (sat, deg) > (s, d)) {
                best = Some((v, sat, deg));
            }
        }
        best.map(|b| b.0)
    }

    fn go(&mut self, used: usize) -> Result<bool, CapacityError> {
        self.nodes += 1;
        if self.nodes > NODE_BUDGET {
            return Err(CapacityError::Budget(NODE_BUDGET));
        }
        let Some(v) = self.pick() else { return Ok(true) };
        let mut blocked = vec![false; self.k + 1];
        for w in 0..self.g.n {
            if self.g.adj[v][w] {
                blocked[self.color[w]] = true;
            }
        }
        // a fresh color is symmetric to any other fresh one
        let top = (used + 1).min(self.k);
        for x in 1..=top {
            if blocked[x] {
                continue;
            }
            self.color[v] = x;
            if self.go(used.max(x))? {
                return Ok(true);
            }
        }
        self.color[v] = 0;
        Ok(false)
    }
}

fn colorable(g: &Local, k: usize) -> Result<bool, CapacityError> {
    if g.n <= k {
        return Ok(true);
    }
    if k == 0 {
        return Ok(g.n == 0);
    }
    let mut s = Search { g, k, color: vec![0; g.n], nodes: 0 };
    s.go(0)
}

/// Whether the graph given by a symmetric adjacency matrix is k-colorable.
pub fn is_k_colorable(adj: &[Vec<bool>], k: usize) -> Result<bool, CapacityError> {
    colorable(&Local::from_matrix(adj.to_vec()), k)
}

/// Exact chromatic number of a small graph.
pub fn chromatic_number(graph: &Graph) -> Result<usize, CapacityError> {
    let verts: Vec<usize> = (0..graph.n()).collect();
    let g = Local::induced(graph, &verts);
    for k in 0..=g.n {
        if colorable(&g, k)? {
            return Ok(k);
        }
    }
    Ok(g.n)
}

/// Some vertex whose closed neighborhood is not c-colorable, or `None`.
pub fn certificate_check(graph: &Graph, c: u32, cap: usize) -> Result<Option<usize>, CapacityError> {
    for v in 0..graph.n() {
        let size = graph.degree(v) + 1;
        if size <= c as usize {
            continue;
        }
        if size > cap {
            return Err(CapacityError::TooLarge { vertex: v, size, cap });
        }
        let mut closed = graph.neighbors(v).to_vec();
        closed.push(v);
        closed.sort_unstable();
        if !colorable(&Local::induced(graph, &closed), c as usize)? {
            return Ok(Some(v));
        }
    }
    Ok(None)
}
