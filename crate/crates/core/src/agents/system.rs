use crate::envs::{EnvKind, EnvParams};
use crate::error::{Error, Result};
use crate::network::{
    agent_weights, combine, disagreement_norm, hastings_weights, ConnectivityMatrix,
    LinkFailureModel, LinkMask, Topology,
};
use crate::nn::ParamVector;
use crate::rng::{derive_seed, stream};

use super::events::{EventLog, RoundEvent};
use super::learner::{networks_for, AdaptStats, Learner, NetworkConfig, Worker};
use super::{AgentConfig, Algorithm, Role};

/// A learner and the environments it samples from.
#[derive(Debug, Clone)]
pub struct Agent {
    pub id: usize,
    pub learner: Learner,
    pub workers: Vec<Worker>,
}

fn numerical(agent: usize, e: Error) -> Error {
    match e {
        Error::NonFinite { .. } | Error::NonFiniteGradient { .. } | Error::Env(_) => {
            Error::Numerical {
                agent,
                what: e.to_string(),
            }
        }
        other => other,
    }
}

impl Agent {
    /// Collects this round's experience and takes one optimiser step.
    pub fn adapt_round(&mut self, cfg: &AgentConfig) -> Result<AdaptStats> {
        let id = self.id;
        let run = |agent: &mut Agent| -> Result<AdaptStats> {
            let mut batch = Vec::new();
            for w in &mut agent.workers {
                match cfg.algorithm {
                    Algorithm::Siac => {
                        batch.extend(agent.learner.collect_episodes(w, cfg.episodes_per_update)?)
                    }
                    Algorithm::A2c => {
                        batch.extend(agent.learner.collect_steps(w, cfg.steps_per_update)?)
                    }
                }
            }
            agent.learner.adapt(&batch, cfg)
        };
        run(self).map_err(|e| numerical(id, e))
    }

    pub fn episodes_completed(&self) -> u64 {
        self.workers.iter().map(|w| w.episodes_completed).sum()
    }

    pub fn steps_taken(&self) -> u64 {
        self.workers.iter().map(|w| w.steps_taken).sum()
    }
}

fn stacked(agents: &[Agent]) -> Vec<ParamVector<f64>> {
    agents
        .iter()
        .map(|a| ParamVector::concat(&a.learner.actor_params, &a.learner.critic_params))
        .collect()
}

/// One synchronous adapt-then-combine round: every agent adapts on fresh
/// local experience, then both networks are combined with weights `c`.
pub fn run_diffusion_round(
    agents: &mut [Agent],
    c: &ConnectivityMatrix,
    mask: Option<&LinkMask>,
    cfg: &AgentConfig,
) -> Result<Vec<AdaptStats>> {
    let stats = agents
        .iter_mut()
        .map(|a| a.adapt_round(cfg))
        .collect::<Result<Vec<_>>>()?;
    let actors: Vec<_> = agents
        .iter()
        .map(|a| a.learner.actor_params.clone())
        .collect();
    let critics: Vec<_> = agents
        .iter()
        .map(|a| a.learner.critic_params.clone())
        .collect();
    let actors = combine(&actors, c, mask)?;
    let critics = combine(&critics, c, mask)?;
    if cfg.average_moments {
        let old: Vec<_> = agents
            .iter()
            .map(|a| {
                (
                    a.learner.actor_opt.state.clone(),
                    a.learner.critic_opt.state.clone(),
                )
            })
            .collect();
        let all: Vec<usize> = (0..agents.len()).collect();
        for (k, agent) in agents.iter_mut().enumerate() {
            let w = agent_weights(c, k, &all, mask);
            let a: Vec<_> = w.iter().map(|&(l, x)| (&old[l].0, x)).collect();
            let b: Vec<_> = w.iter().map(|&(l, x)| (&old[l].1, x)).collect();
            agent.learner.actor_opt.state.set_moments_from(&a)?;
            agent.learner.critic_opt.state.set_moments_from(&b)?;
        }
    }
    for ((agent, a), cr) in agents.iter_mut().zip(actors).zip(critics) {
        agent.learner.actor_params = a;
        agent.learner.critic_params = cr;
    }
    Ok(stats)
}

/// All agents of one run under the synchronous scheduler.
#[derive(Debug, Clone)]
pub struct System {
    pub kind: EnvKind,
    pub tasks: Vec<EnvParams>,
    pub cfg: AgentConfig,
    pub agents: Vec<Agent>,
    pub topology: Option<Topology>,
    pub weights: ConnectivityMatrix,
    pub failures: Option<LinkFailureModel>,
    pub seed: u64,
    pub round: u64,
}

impl System {
    /// Builds agents for `tasks`. Diffusion puts one agent on each task and
    /// needs a topology over them; specialised agents never communicate;
    /// the centralised role is a single learner sampling every task.
    pub fn new(
        tasks: Vec<EnvParams>,
        cfg: AgentConfig,
        net_cfg: &NetworkConfig,
        topology: Option<Topology>,
        failures: Option<LinkFailureModel>,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        let kind = tasks
            .first()
            .ok_or_else(|| Error::Config("no tasks".into()))?
            .kind();
        if tasks.iter().any(|t| t.kind() != kind) {
            return Err(Error::Config(
                "all tasks must share an environment kind".into(),
            ));
        }
        for t in &tasks {
            t.validate()?;
        }
        let n = tasks.len();
        let (actor, critic) = networks_for(kind, net_cfg)?;
        let init_seed = |k: usize| {
            derive_seed(
                seed,
                stream::INIT,
                if cfg.shared_init { 0 } else { k as u64 },
            )
        };
        let worker_seed = |k: usize, j: usize| {
            derive_seed(derive_seed(seed, stream::AGENT, k as u64), 0, j as u64)
        };
        let learner = |k: usize| Learner::new(actor.clone(), critic.clone(), &cfg, init_seed(k));

        let (agents, topology, weights) = match cfg.role {
            Role::Diffusion => {
                let t = match topology {
                    Some(t) => t,
                    None if n == 1 => Topology::from_edges(1, &[])?,
                    None => return Err(Error::Config("diffusion role needs a topology".into())),
                };
                if t.n_agents() != n {
                    return Err(Error::Config(format!(
                        "{} tasks for a {}-agent topology",
                        n,
                        t.n_agents()
                    )));
                }
                let agents = (0..n)
                    .map(|k| Agent {
                        id: k,
                        learner: learner(k),
                        workers: vec![Worker::new(tasks[k], worker_seed(k, 0))],
                    })
                    .collect();
                let w = hastings_weights(&t);
                (agents, Some(t), w)
            }
            Role::Specialised => {
                let agents = (0..n)
                    .map(|k| Agent {
                        id: k,
                        learner: learner(k),
                        workers: (0..cfg.specialised_copies)
                            .map(|j| Worker::new(tasks[k], worker_seed(k, j)))
                            .collect(),
                    })
                    .collect();
                (agents, None, ConnectivityMatrix::identity(n))
            }
            Role::Centralised => {
                let workers = (0..n)
                    .map(|k| Worker::new(tasks[k], worker_seed(k, 0)))
                    .collect();
                (
                    vec![Agent {
                        id: 0,
                        learner: learner(0),
                        workers,
                    }],
                    None,
                    ConnectivityMatrix::identity(1),
                )
            }
        };
        let failures = failures.filter(|f| f.drop_probability > 0.0 && cfg.role == Role::Diffusion);
        Ok(Self {
            kind,
            tasks,
            cfg,
            agents,
            topology,
            weights,
            failures,
            seed,
            round: 0,
        })
    }

    pub fn mask_for(&self, round: u64) -> Option<LinkMask> {
        match (&self.failures, &self.topology) {
            (Some(f), Some(t)) => Some(f.realise(t, self.seed, round)),
            _ => None,
        }
    }

    /// One synchronous round; `round` counts from 1.
    pub fn step_round(&mut self, log: &mut EventLog) -> Result<Vec<AdaptStats>> {
        self.round += 1;
        let mask = self.mask_for(self.round);
        let stats = run_diffusion_round(&mut self.agents, &self.weights, mask.as_ref(), &self.cfg)?;
        if log.is_enabled() {
            let dropped = match (&mask, &self.topology) {
                (Some(m), Some(t)) => m.dropped(t),
                _ => Vec::new(),
            };
            log.record(&RoundEvent {
                round: self.round,
                actor_grad_norms: stats.iter().map(|s| s.actor_grad_norm).collect(),
                critic_grad_norms: stats.iter().map(|s| s.critic_grad_norm).collect(),
                disagreement: Some(self.disagreement()?),
                dropped_links: dropped,
            })?;
        }
        Ok(stats)
    }

    pub fn run_rounds(&mut self, rounds: usize, log: &mut EventLog) -> Result<()> {
        for _ in 0..rounds {
            self.step_round(log)?;
        }
        Ok(())
    }

    /// Disagreement of the stacked actor and critic vectors across agents.
    pub fn disagreement(&self) -> Result<f64> {
        disagreement_norm(&stacked(&self.agents))
    }

    pub fn stacked_params(&self) -> Vec<ParamVector<f64>> {
        stacked(&self.agents)
    }

    /// The learner whose policy is evaluated on task `k`.
    pub fn learner_for_task(&self, k: usize) -> &Learner {
        match self.cfg.role {
            Role::Centralised => &self.agents[0].learner,
            _ => &self.agents[k].learner,
        }
    }

    pub fn total_episodes(&self) -> u64 {
        self.agents.iter().map(|a| a.episodes_completed()).sum()
    }

    pub fn total_steps(&self) -> u64 {
        self.agents.iter().map(|a| a.steps_taken()).sum()
    }
}
