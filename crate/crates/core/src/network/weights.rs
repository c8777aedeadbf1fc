use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::linalg::spectral_norm;

use super::Topology;

/// Combination weights; `get(l, k)` is the weight agent `k` puts on agent `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityMatrix {
    n: usize,
    c: Vec<f64>,
}

const STOCHASTIC_TOL: f64 = 1e-12;

/// Metropolis-Hastings weights with self-inclusive degrees.
pub fn hastings_weights(t: &Topology) -> ConnectivityMatrix {
    let n = t.n_agents();
    let deg: Vec<usize> = (0..n).map(|k| t.degree(k)).collect();
    let mut c = vec![0.0; n * n];
    for k in 0..n {
        let mut off = 0.0;
        for l in 0..n {
            if l != k && t.adjacent(l, k) {
                let w = 1.0 / deg[l].max(deg[k]) as f64;
                c[l * n + k] = w;
                off += w;
            }
        }
        c[k * n + k] = 1.0 - off;
    }
    ConnectivityMatrix { n, c }
}

impl ConnectivityMatrix {
    /// Validates a row-major matrix against the doubly stochastic invariants.
    pub fn from_matrix(n: usize, c: Vec<f64>) -> Result<Self> {
        if c.len() != n * n {
            return Err(Error::Topology(format!(
                "connectivity matrix needs {} entries",
                n * n
            )));
        }
        let m = Self { n, c };
        m.validate()?;
        Ok(m)
    }

    pub fn identity(n: usize) -> Self {
        let mut c = vec![0.0; n * n];
        for k in 0..n {
            c[k * n + k] = 1.0;
        }
        Self { n, c }
    }

    pub fn validate(&self) -> Result<()> {
        if self.c.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::Topology(
                "connectivity weights must be finite and non-negative".into(),
            ));
        }
        for i in 0..self.n {
            let row: f64 = (0..self.n).map(|j| self.get(i, j)).sum();
            let col: f64 = (0..self.n).map(|j| self.get(j, i)).sum();
            if (row - 1.0).abs() > STOCHASTIC_TOL || (col - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::Topology(format!(
                    "row/column {i} sums to {row}/{col}, not 1"
                )));
            }
        }
        if !(self.trace() > 0.0) {
            return Err(Error::Topology(
                "connectivity matrix needs a positive trace".into(),
            ));
        }
        Ok(())
    }

    pub fn n_agents(&self) -> usize {
        self.n
    }

    pub fn get(&self, l: usize, k: usize) -> f64 {
        self.c[l * self.n + k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.c
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|k| self.get(k, k)).sum()
    }

    /// Whether the support matches the graph: `c_lk > 0` iff `l ~ k`.
    pub fn matches_topology(&self, t: &Topology) -> bool {
        t.n_agents() == self.n
            && (0..self.n).all(|l| (0..self.n).all(|k| (self.get(l, k) > 0.0) == t.adjacent(l, k)))
    }

    /// Whether some power `C^m`, `m ≤ n`, is entrywise positive.
    pub fn is_primitive(&self) -> bool {
        let n = self.n;
        let base: Vec<bool> = self.c.iter().map(|&x| x > 0.0).collect();
        let mut reach = base.clone();
        for _ in 0..n {
            if reach.iter().all(|&x| x) {
                return true;
            }
            let mut next = vec![false; n * n];
            for i in 0..n {
                for j in 0..n {
                    next[i * n + j] = (0..n).any(|m| reach[i * n + m] && base[m * n + j]);
                }
            }
            reach = next;
        }
        reach.iter().all(|&x| x)
    }

    /// `‖C − 11ᵀ/N‖₂`, the per-round contraction of disagreement.
    pub fn contraction_factor(&self) -> f64 {
        let n = self.n;
        let avg = 1.0 / n as f64;
        let d: Vec<f64> = self.c.iter().map(|&x| x - avg).collect();
        spectral_norm(&d, n, 1e-13, 1_000_000)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for l in 0..self.n {
            let row: Vec<String> = (0..self.n)
                .map(|k| format!("{:.17e}", self.get(l, k)))
                .collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let rows: Vec<Vec<f64>> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| {
                l.split_whitespace()
                    .map(|t| {
                        t.parse::<f64>()
                            .map_err(|e| Error::Format(format!("bad weight {t:?}: {e}")))
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Format("connectivity matrix is not square".into()));
        }
        Self::from_matrix(n, rows.into_iter().flatten().collect())
    }
}

/// Number of combination rounds after which a disagreement of 1 falls below
/// `eps` at contraction `factor`.
pub fn consensus_rounds(factor: f64, eps: f64) -> usize {
    if factor <= 0.0 {
        return 1;
    }
    (eps.ln() / factor.ln()).ceil().max(1.0) as usize
}
