use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    Ring,
    RandomConnected,
    Complete,
}

/// Undirected agent graph with self-loops. Neighbourhoods include the agent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    n: usize,
    adjacency: Vec<bool>,
}

impl Topology {
    /// Builds a graph from undirected edges, adding self-loops.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::Topology(
                "a topology needs at least one agent".into(),
            ));
        }
        let mut adjacency = vec![false; n * n];
        for k in 0..n {
            adjacency[k * n + k] = true;
        }
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::Topology(format!(
                    "edge ({a}, {b}) out of range for {n} agents"
                )));
            }
            adjacency[a * n + b] = true;
            adjacency[b * n + a] = true;
        }
        let t = Self { n, adjacency };
        if !t.is_connected() {
            return Err(Error::Topology("graph is not connected".into()));
        }
        Ok(t)
    }

    /// From a full boolean matrix, which must be symmetric with a true diagonal.
    pub fn from_adjacency(n: usize, adjacency: Vec<bool>) -> Result<Self> {
        if adjacency.len() != n * n {
            return Err(Error::Topology(format!(
                "adjacency needs {} entries",
                n * n
            )));
        }
        let mut edges = Vec::new();
        for a in 0..n {
            if !adjacency[a * n + a] {
                return Err(Error::Topology(format!("agent {a} lacks a self-loop")));
            }
            for b in a + 1..n {
                if adjacency[a * n + b] != adjacency[b * n + a] {
                    return Err(Error::Topology("adjacency is not symmetric".into()));
                }
                if adjacency[a * n + b] {
                    edges.push((a, b));
                }
            }
        }
        Self::from_edges(n, &edges)
    }

    pub fn n_agents(&self) -> usize {
        self.n
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.adjacency[a * self.n + b]
    }

    /// Neighbourhood of `k` including `k`, ascending.
    pub fn neighbourhood(&self, k: usize) -> Vec<usize> {
        (0..self.n).filter(|&l| self.adjacent(k, l)).collect()
    }

    /// Neighbourhood size including self.
    pub fn degree(&self, k: usize) -> usize {
        (0..self.n).filter(|&l| self.adjacent(k, l)).count()
    }

    pub fn average_degree(&self) -> f64 {
        (0..self.n).map(|k| self.degree(k)).sum::<usize>() as f64 / self.n as f64
    }

    /// Undirected edges `(a, b)` with `a < b`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 0..self.n {
            for b in a + 1..self.n {
                if self.adjacent(a, b) {
                    out.push((a, b));
                }
            }
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(k) = stack.pop() {
            for l in 0..self.n {
                if self.adjacent(k, l) && !seen[l] {
                    seen[l] = true;
                    stack.push(l);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// 0/1 matrix, one row per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for a in 0..self.n {
            let row: Vec<&str> = (0..self.n)
                .map(|b| if self.adjacent(a, b) { "1" } else { "0" })
                .collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let rows: Vec<Vec<bool>> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| {
                l.split_whitespace()
                    .map(|t| match t {
                        "0" => Ok(false),
                        "1" => Ok(true),
                        other => Err(Error::Format(format!("bad adjacency entry {other:?}"))),
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Format("adjacency matrix is not square".into()));
        }
        Self::from_adjacency(n, rows.into_iter().flatten().collect())
    }
}

/// Builds a ring, complete graph, or random connected graph. For the random
/// kind, `target_avg_degree` counts the self-loop, so the graph gets
/// `round((target − 1)·n / 2)` edges: a uniform random spanning tree plus
/// uniformly chosen extra edges.
pub fn build_topology(
    kind: TopologyKind,
    n: usize,
    target_avg_degree: f64,
    seed: u64,
) -> Result<Topology> {
    if n < 2 {
        return Err(Error::Topology(format!("need at least 2 agents, got {n}")));
    }
    match kind {
        TopologyKind::Ring => {
            let edges: Vec<_> = (0..n)
                .map(|k| (k, (k + 1) % n))
                .filter(|(a, b)| a != b)
                .collect();
            Topology::from_edges(n, &edges)
        }
        TopologyKind::Complete => {
            let edges: Vec<_> = (0..n)
                .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
                .collect();
            Topology::from_edges(n, &edges)
        }
        TopologyKind::RandomConnected => {
            let max_edges = n * (n - 1) / 2;
            let target = ((target_avg_degree - 1.0) * n as f64 / 2.0).round();
            if !target.is_finite() || target < (n - 1) as f64 || target > max_edges as f64 {
                return Err(Error::Topology(format!(
                    "average degree {target_avg_degree} infeasible for a connected graph on {n} agents"
                )));
            }
            let target = target as usize;
            let mut rng = rng_from(seed);
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let mut edges = Vec::with_capacity(target);
            for i in 1..n {
                let parent = order[rng.random_range(0..i)];
                let (a, b) = (order[i].min(parent), order[i].max(parent));
                edges.push((a, b));
            }
            let mut rest: Vec<(usize, usize)> = (0..n)
                .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
                .filter(|e| !edges.contains(e))
                .collect();
            rest.shuffle(&mut rng);
            edges.extend(rest.into_iter().take(target - (n - 1)));
            Topology::from_edges(n, &edges)
        }
    }
}
