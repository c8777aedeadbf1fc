use serde::{Deserialize, Serialize};

use crate::agents::Learner;
use crate::envs::EnvParams;
use crate::error::Result;
use crate::rng::{derive_seed, stream};

use super::metrics::{confidence_interval, Interval};

/// Evaluation seed for task `task` in run `seed`; shared by every policy
/// evaluated on that task so they face the same initial states.
pub fn task_eval_seed(seed: u64, task: usize) -> u64 {
    derive_seed(seed, stream::EVAL, task as u64)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossTaskResult {
    /// `returns[i][j]`: mean return of agent `i` on task `j`.
    pub returns: Vec<Vec<f64>>,
    /// Per agent, own-task return minus mean peer-task return, as a percentage
    /// of the magnitude of the peer mean.
    pub own_vs_peer_percent: Vec<f64>,
    pub own_vs_peer_mean: f64,
    pub own_vs_peer_std: f64,
}

pub fn cross_task_eval(
    agents: &[&Learner],
    tasks: &[EnvParams],
    episodes: usize,
    seed: u64,
) -> Result<CrossTaskResult> {
    let returns: Vec<Vec<f64>> = agents
        .iter()
        .map(|a| {
            tasks
                .iter()
                .enumerate()
                .map(|(j, t)| Ok(mean(&a.evaluate(t, episodes, task_eval_seed(seed, j))?)))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut rel = Vec::new();
    if tasks.len() > 1 {
        for (i, row) in returns.iter().enumerate().take(tasks.len()) {
            let peers: Vec<f64> = row
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, &r)| r)
                .collect();
            let peer = mean(&peers);
            rel.push(100.0 * (row[i] - peer) / peer.abs().max(f64::MIN_POSITIVE));
        }
    }
    let (m, s) = if rel.is_empty() {
        (0.0, 0.0)
    } else {
        let m = mean(&rel);
        (
            m,
            (rel.iter().map(|x| (x - m).powi(2)).sum::<f64>() / rel.len() as f64).sqrt(),
        )
    };
    Ok(CrossTaskResult {
        returns,
        own_vs_peer_percent: rel,
        own_vs_peer_mean: m,
        own_vs_peer_std: s,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroShotRecord {
    pub group: String,
    pub task: String,
    pub interval: Interval,
}

/// Pools `episodes` returns of every policy in each group on each held-out
/// task and reports the mean with a 95% interval.
pub fn zero_shot_eval(
    groups: &[(String, Vec<&Learner>)],
    held_out: &[(String, EnvParams)],
    episodes: usize,
    seed: u64,
) -> Result<Vec<ZeroShotRecord>> {
    let mut out = Vec::new();
    for (group, learners) in groups {
        for (j, (name, task)) in held_out.iter().enumerate() {
            let mut samples = Vec::new();
            for (i, l) in learners.iter().enumerate() {
                let s = derive_seed(task_eval_seed(seed, j), stream::EVAL, i as u64);
                samples.extend(l.evaluate(task, episodes, s)?);
            }
            out.push(ZeroShotRecord {
                group: group.clone(),
                task: name.clone(),
                interval: confidence_interval(&samples),
            });
        }
    }
    Ok(out)
}
