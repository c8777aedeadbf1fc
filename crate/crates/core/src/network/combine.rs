use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::ParamVector;
use crate::rng::{derive_seed, rng_from, stream};
use crate::scalar::Scalar;

use super::{ConnectivityMatrix, Topology};

/// Independent per-link drop probability for each combination round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkFailureModel {
    pub drop_probability: f64,
}

/// Realised link states of one round; symmetric, self-loops always up.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkMask {
    pub n: usize,
    pub up: Vec<bool>,
}

impl LinkMask {
    pub fn all_up(n: usize) -> Self {
        Self {
            n,
            up: vec![true; n * n],
        }
    }

    pub fn is_up(&self, l: usize, k: usize) -> bool {
        self.up[l * self.n + k]
    }

    /// Dropped undirected links `(a, b)`, `a < b`, restricted to graph edges.
    pub fn dropped(&self, t: &Topology) -> Vec<(usize, usize)> {
        t.edges()
            .into_iter()
            .filter(|&(a, b)| !self.is_up(a, b))
            .collect()
    }
}

impl LinkFailureModel {
    pub fn new(drop_probability: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&drop_probability) {
            return Err(Error::Config(format!(
                "drop probability {drop_probability} outside [0, 1)"
            )));
        }
        Ok(Self { drop_probability })
    }

    /// The mask of `round`, a pure function of `(seed, round)` so every agent
    /// sees the same realisation of a shared link.
    pub fn realise(&self, t: &Topology, seed: u64, round: u64) -> LinkMask {
        let n = t.n_agents();
        let mut mask = LinkMask::all_up(n);
        if self.drop_probability == 0.0 {
            return mask;
        }
        let mut rng = rng_from(derive_seed(seed, stream::LINKS, round));
        for (a, b) in t.edges() {
            if rng.random::<f64>() < self.drop_probability {
                mask.up[a * n + b] = false;
                mask.up[b * n + a] = false;
            }
        }
        mask
    }
}

/// The weights agent `k` applies this round, over `available` in-neighbours
/// (which must contain `k`), renormalised to sum to 1.
pub fn agent_weights(
    c: &ConnectivityMatrix,
    k: usize,
    available: &[usize],
    mask: Option<&LinkMask>,
) -> Vec<(usize, f64)> {
    let mut w: Vec<(usize, f64)> = available
        .iter()
        .copied()
        .filter(|&l| l == k || mask.is_none_or(|m| m.is_up(l, k)))
        .map(|l| (l, c.get(l, k)))
        .filter(|&(l, x)| x > 0.0 || l == k)
        .collect();
    let total: f64 = w.iter().map(|(_, x)| x).sum();
    if total > 0.0 {
        w.iter_mut().for_each(|(_, x)| *x /= total);
    } else {
        w = vec![(k, 1.0)];
    }
    w
}

/// Realised combination matrix of a round; column `k` holds agent `k`'s weights.
pub fn realised_matrix(c: &ConnectivityMatrix, mask: &LinkMask) -> Vec<f64> {
    let n = c.n_agents();
    let all: Vec<usize> = (0..n).collect();
    let mut m = vec![0.0; n * n];
    for k in 0..n {
        for (l, w) in agent_weights(c, k, &all, Some(mask)) {
            m[l * n + k] = w;
        }
    }
    m
}

/// `own + Σ_l w_l (x_l − own)`; equal to `Σ_l w_l x_l` when the weights sum
/// to one, and exact when every input is identical.
fn weighted<T: Scalar>(
    own: &ParamVector<T>,
    others: &[(T, &ParamVector<T>)],
) -> Result<ParamVector<T>> {
    let mut out = own.clone();
    for &(w, x) in others {
        own.check_layout(x)?;
        if w == T::zero() {
            continue;
        }
        for ((o, &xi), &si) in out
            .values_mut()
            .iter_mut()
            .zip(x.values())
            .zip(own.values())
        {
            *o += w * (xi - si);
        }
    }
    Ok(out)
}

/// Barrier combination: every agent averages the adapted vectors of its
/// in-neighbours with weights from `c`, minus any dropped links.
pub fn combine<T: Scalar>(
    params: &[ParamVector<T>],
    c: &ConnectivityMatrix,
    mask: Option<&LinkMask>,
) -> Result<Vec<ParamVector<T>>> {
    let n = c.n_agents();
    if params.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: params.len(),
        });
    }
    let all: Vec<usize> = (0..n).collect();
    (0..n)
        .map(|k| {
            let w = agent_weights(c, k, &all, mask);
            let others: Vec<(T, &ParamVector<T>)> = w
                .iter()
                .filter(|(l, _)| *l != k)
                .map(|&(l, x)| (T::lit(x), &params[l]))
                .collect();
            weighted(&params[k], &others)
        })
        .collect()
}

/// Combination for one agent from explicit neighbour snapshots, which may be
/// stale. Neighbours missing from `snapshots` are treated as dropped links.
pub fn combine_agent<T: Scalar>(
    k: usize,
    own: &ParamVector<T>,
    snapshots: &[(usize, &ParamVector<T>)],
    c: &ConnectivityMatrix,
    mask: Option<&LinkMask>,
) -> Result<ParamVector<T>> {
    let mut available: Vec<usize> = snapshots
        .iter()
        .map(|(l, _)| *l)
        .filter(|&l| l != k)
        .collect();
    available.push(k);
    let w = agent_weights(c, k, &available, mask);
    let others: Vec<(T, &ParamVector<T>)> = w
        .iter()
        .filter(|(l, _)| *l != k)
        .map(|&(l, x)| {
            (
                T::lit(x),
                snapshots
                    .iter()
                    .find(|(m, _)| *m == l)
                    .expect("available")
                    .1,
            )
        })
        .collect();
    weighted(own, &others)
}

/// `‖(I − 11ᵀ/N ⊗ I) φ‖` for the stacked agent vectors `φ`.
pub fn disagreement_norm<T: Scalar>(params: &[ParamVector<T>]) -> Result<T> {
    let Some(first) = params.first() else {
        return Ok(T::zero());
    };
    for p in params {
        first.check_layout(p)?;
    }
    let n = T::from_count(params.len());
    let mut total = T::zero();
    for i in 0..first.len() {
        let mean = params.iter().map(|p| p.values()[i]).sum::<T>() / n;
        total += params
            .iter()
            .map(|p| (p.values()[i] - mean).powi(2))
            .sum::<T>();
    }
    Ok(total.sqrt())
}

/// Cross-agent mean vector.
pub fn network_mean<T: Scalar>(params: &[ParamVector<T>]) -> Result<ParamVector<T>> {
    let first = params
        .first()
        .ok_or_else(|| Error::InvalidArgument("no agents".into()))?;
    let mut mean = ParamVector::zeros(first.layout().clone());
    let w = T::one() / T::from_count(params.len());
    for p in params {
        mean.axpy(w, p)?;
    }
    Ok(mean)
}
