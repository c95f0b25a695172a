//! Partial colorings, palettes and slack.

use serde::{Deserialize, Serialize};

use crate::graph::Graph;

/// Vertex → color map. `None` is the uncolored sentinel; colors are 1..=c.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialColoring {
    c: u32,
    colors: Vec<Option<u32>>,
    colored_at: Vec<Option<u32>>,
    step: u32,
}

impl PartialColoring {
    pub fn new(n: usize, c: u32) -> Self {
        Self { c, colors: vec![None; n], colored_at: vec![None; n], step: 0 }
    }

    pub fn c(&self) -> u32 {
        self.c
    }

    pub fn n(&self) -> usize {
        self.colors.len()
    }

    pub fn step(&self) -> u32 {
        self.step
    }

    pub fn get(&self, v: usize) -> Option<u32> {
        self.colors[v]
    }

    pub fn is_colored(&self, v: usize) -> bool {
        self.colors[v].is_some()
    }

    pub fn colors(&self) -> &[Option<u32>] {
        &self.colors
    }

    /// Step at which `v` received its current color.
    pub fn colored_at(&self, v: usize) -> Option<u32> {
        self.colored_at[v]
    }

    pub fn set(&mut self, v: usize, color: u32) {
        assert!(color >= 1 && color <= self.c, "color {color} outside [1, {}]", self.c);
        self.colors[v] = Some(color);
        self.colored_at[v] = Some(self.step);
    }

    pub fn uncolor(&mut self, v: usize) {
        self.colors[v] = None;
        self.colored_at[v] = None;
    }

    /// Applies a diff as one committed step and advances the step counter.
    pub fn commit(&mut self, diff: &[(usize, u32)]) -> u32 {
        self.step += 1;
        for &(v, x) in diff {
            self.set(v, x);
        }
        self.step
    }

    pub fn uncolored(&self, verts: &[usize]) -> Vec<usize> {
        verts.iter().copied().filter(|&v| self.colors[v].is_none()).collect()
    }

    pub fn all_colored(&self) -> bool {
        self.colors.iter().all(Option::is_some)
    }

    pub fn count_colored(&self) -> usize {
        self.colors.iter().filter(|c| c.is_some()).count()
    }

    /// Colors as a flat vector, 0 for uncolored (serialization only).
    pub fn to_vec(&self) -> Vec<u32> {
        self.colors.iter().map(|c| c.unwrap_or(0)).collect()
    }

    pub fn palette(&self, v: usize, graph: &Graph) -> Vec<u32> {
        palette(v, self, graph)
    }

    pub fn palette_size(&self, v: usize, graph: &Graph) -> usize {
        let mut used = vec![false; self.c as usize + 1];
        let mut k = 0;
        for &w in graph.neighbors(v) {
            if let Some(x) = self.colors[w] {
                if !used[x as usize] {
                    used[x as usize] = true;
                    k += 1;
                }
            }
        }
        self.c as usize - k
    }

    /// Uncolored neighbors of `v` inside `region`.
    pub fn uncolored_degree(&self, v: usize, region: &[bool], graph: &Graph) -> usize {
        graph
            .neighbors(v)
            .iter()
            .filter(|&&w| region[w] && self.colors[w].is_none())
            .count()
    }
}

/// [c] minus the colors of colored neighbors of v.
pub fn palette(v: usize, coloring: &PartialColoring, graph: &Graph) -> Vec<u32> {
    let c = coloring.c();
    let mut used = vec![false; c as usize + 1];
    for &w in graph.neighbors(v) {
        if let Some(x) = coloring.get(w) {
            used[x as usize] = true;
        }
    }
    (1..=c).filter(|&x| !used[x as usize]).collect()
}

/// |palette(v)| minus the uncolored neighbors of v inside `subgraph`.
pub fn slack(v: usize, subgraph: &[bool], coloring: &PartialColoring, graph: &Graph) -> i64 {
    coloring.palette_size(v, graph) as i64 - coloring.uncolored_degree(v, subgraph, graph) as i64
}

/// First monochromatic edge, if any.
pub fn properness_scan(graph: &Graph, coloring: &PartialColoring) -> Option<(usize, usize)> {
    for u in 0..graph.n() {
        if let Some(x) = coloring.get(u) {
            for &v in graph.neighbors(u) {
                if u < v && coloring.get(v) == Some(x) {
                    return Some((u, v));
                }
            }
        }
    }
    None
}

/// Number of colors used by at least two vertices of N(v) ∩ region.
pub fn count_repeated_colors(v: usize, region: &[bool], coloring: &PartialColoring, graph: &Graph) -> usize {
    let mut freq = vec![0u32; coloring.c() as usize + 1];
    for &w in graph.neighbors(v) {
        if region[w] {
            if let Some(x) = coloring.get(w) {
                freq[x as usize] += 1;
            }
        }
    }
    freq.iter().filter(|&&f| f >= 2).count()
}
