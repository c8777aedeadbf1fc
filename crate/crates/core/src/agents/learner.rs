use serde::{Deserialize, Serialize};

use crate::envs::{self, Action, ActionSpec, EnvKind, EnvParams, EnvState};
use crate::error::{Error, Result};
use crate::nn::{
    greedy_action, sample_action, ActionSample, Activation, Network, NetworkSpec, ParamVector,
};
use crate::optim::Optimiser;
use crate::rng::{derive_seed, rng_from, Rng};

use super::advantage::{advantage_a2c, advantage_siac, Trajectory, Transition};
use super::gradients::{local_gradients, ActorCritic};
use super::{AgentConfig, Algorithm};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default = "default_activation")]
    pub activation: Activation,
}

fn default_hidden() -> Vec<usize> {
    vec![32, 32]
}

fn default_activation() -> Activation {
    Activation::Tanh
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            hidden: default_hidden(),
            activation: default_activation(),
        }
    }
}

/// Actor and critic definitions for an environment kind.
pub fn networks_for(kind: EnvKind, cfg: &NetworkConfig) -> Result<(Network, Network)> {
    let obs = kind.observation_dim();
    let actor = match kind.action_spec() {
        ActionSpec::Continuous { low, high } => {
            NetworkSpec::gaussian(obs, cfg.hidden.clone(), cfg.activation, low, high)
        }
        ActionSpec::Discrete { n } => {
            NetworkSpec::categorical(obs, cfg.hidden.clone(), cfg.activation, n)
        }
    };
    let critic = NetworkSpec::value(obs, cfg.hidden.clone(), cfg.activation);
    Ok((Network::new(actor)?, Network::new(critic)?))
}

pub fn to_env_action(a: &ActionSample<f64>) -> Action {
    match a {
        ActionSample::Continuous(v) => Action::Continuous(v.clone()),
        ActionSample::Discrete(i) => Action::Discrete(*i),
    }
}

/// One environment instance an agent samples from.
#[derive(Debug, Clone)]
pub struct Worker {
    pub task: EnvParams,
    rng: Rng,
    state: Option<EnvState>,
    episode_return: f64,
    pub episodes_completed: u64,
    pub steps_taken: u64,
    /// Undiscounted returns of episodes finished since the last drain.
    finished_returns: Vec<f64>,
}

impl Worker {
    pub fn new(task: EnvParams, seed: u64) -> Self {
        Self {
            task,
            rng: rng_from(seed),
            state: None,
            episode_return: 0.0,
            episodes_completed: 0,
            steps_taken: 0,
            finished_returns: Vec::new(),
        }
    }

    pub fn drain_returns(&mut self) -> Vec<f64> {
        std::mem::take(&mut self.finished_returns)
    }
}

/// Actor and critic with their parameters and local optimiser states.
#[derive(Debug, Clone)]
pub struct Learner {
    pub actor: Network,
    pub critic: Network,
    pub actor_params: ParamVector<f64>,
    pub critic_params: ParamVector<f64>,
    pub actor_opt: Optimiser<f64>,
    pub critic_opt: Optimiser<f64>,
}

/// Gradient norms of one adaptation step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AdaptStats {
    pub actor_grad_norm: f64,
    pub critic_grad_norm: f64,
    pub transitions: usize,
}

impl Learner {
    pub fn new(actor: Network, critic: Network, cfg: &AgentConfig, init_seed: u64) -> Self {
        let mut rng = rng_from(init_seed);
        let critic_params = critic.init_params(&mut rng);
        let actor_params = actor.init_params(&mut rng);
        let actor_opt = Optimiser::new(cfg.actor_optimiser.clone(), actor_params.len());
        let critic_opt = Optimiser::new(cfg.critic_optimiser.clone(), critic_params.len());
        Self {
            actor,
            critic,
            actor_params,
            critic_params,
            actor_opt,
            critic_opt,
        }
    }

    pub fn value(&self, obs: &[f64]) -> Result<f64> {
        let f = self.critic.forward(&self.critic_params, obs)?;
        match f.head {
            crate::nn::HeadOutput::Value(v) => Ok(v[0]),
            _ => unreachable!("critic has a value head"),
        }
    }

    fn nets(&self) -> ActorCritic<'_, f64> {
        ActorCritic {
            actor: &self.actor,
            actor_params: &self.actor_params,
            critic: &self.critic,
            critic_params: &self.critic_params,
        }
    }

    /// Advantages for every transition of `batch`, in order.
    pub fn advantages(&self, batch: &[Trajectory<f64>], cfg: &AgentConfig) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for traj in batch {
            let values: Vec<f64> = traj
                .transitions
                .iter()
                .map(|t| self.value(&t.state))
                .collect::<Result<_>>()?;
            let adv = match cfg.algorithm {
                Algorithm::Siac => advantage_siac(&traj.rewards(), &values, cfg.discount)?,
                Algorithm::A2c => advantage_a2c(traj, &values, cfg.discount)?,
            };
            out.extend(adv);
        }
        Ok(out)
    }

    /// Local gradients of the pooled batch, in descent convention.
    pub fn gradients(
        &self,
        batch: &[Trajectory<f64>],
        cfg: &AgentConfig,
    ) -> Result<(ParamVector<f64>, ParamVector<f64>)> {
        let adv = self.advantages(batch, cfg)?;
        let transitions: Vec<&Transition<f64>> =
            batch.iter().flat_map(|t| &t.transitions).collect();
        local_gradients(self.nets(), &transitions, &adv, cfg.entropy_coef)
    }

    /// Critic then actor optimiser step on the pooled batch.
    pub fn adapt(&mut self, batch: &[Trajectory<f64>], cfg: &AgentConfig) -> Result<AdaptStats> {
        let (cg, ag) = self.gradients(batch, cfg)?;
        self.critic_opt.update(&mut self.critic_params, &cg)?;
        self.actor_opt.update(&mut self.actor_params, &ag)?;
        Ok(AdaptStats {
            actor_grad_norm: ag.norm(),
            critic_grad_norm: cg.norm(),
            transitions: batch.iter().map(|t| t.len()).sum(),
        })
    }

    /// Stochastic action and the next environment step from `state`.
    fn act(&self, state: &EnvState, rng: &mut Rng) -> Result<ActionSample<f64>> {
        let f = self.actor.forward(&self.actor_params, &state.observation)?;
        Ok(sample_action(&f.head, rng)?.0)
    }

    /// Runs whole episodes on `worker`, abandoning any episode in progress.
    pub fn collect_episodes(&self, worker: &mut Worker, n: usize) -> Result<Vec<Trajectory<f64>>> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let mut state = envs::reset_with(&worker.task, &mut worker.rng);
            let mut transitions = Vec::new();
            while !state.done() {
                let action = self.act(&state, &mut worker.rng)?;
                let res = envs::step(&state, &to_env_action(&action), &worker.task)?;
                transitions.push(Transition {
                    state: std::mem::take(&mut state.observation),
                    action,
                    reward: res.reward,
                    next_state: res.state.observation.clone(),
                    terminal: res.terminal,
                });
                state = res.state;
            }
            worker.steps_taken += transitions.len() as u64;
            worker.episodes_completed += 1;
            let traj = Trajectory::new(transitions, None)?;
            worker.finished_returns.push(traj.undiscounted_return());
            out.push(traj);
        }
        worker.state = None;
        Ok(out)
    }

    /// Takes `steps` environment steps on `worker`, continuing its current
    /// episode. Segments are cut at episode ends; non-terminal cuts carry
    /// `v(s_T)` as bootstrap.
    pub fn collect_steps(&self, worker: &mut Worker, steps: usize) -> Result<Vec<Trajectory<f64>>> {
        let mut out = Vec::new();
        let mut segment = Vec::new();
        for _ in 0..steps {
            let state = match worker.state.take() {
                Some(s) if !s.done() => s,
                _ => {
                    worker.episode_return = 0.0;
                    envs::reset_with(&worker.task, &mut worker.rng)
                }
            };
            let action = self.act(&state, &mut worker.rng)?;
            let res = envs::step(&state, &to_env_action(&action), &worker.task)?;
            worker.steps_taken += 1;
            worker.episode_return += res.reward;
            segment.push(Transition {
                state: state.observation,
                action,
                reward: res.reward,
                next_state: res.state.observation.clone(),
                terminal: res.terminal,
            });
            if res.state.done() {
                worker.episodes_completed += 1;
                worker.finished_returns.push(worker.episode_return);
                let bootstrap = if res.terminal {
                    None
                } else {
                    Some(self.value(&res.state.observation)?)
                };
                out.push(Trajectory::new(std::mem::take(&mut segment), bootstrap)?);
            }
            worker.state = Some(res.state);
        }
        if !segment.is_empty() {
            let last = worker.state.as_ref().expect("stepped at least once");
            out.push(Trajectory::new(
                segment,
                Some(self.value(&last.observation)?),
            )?);
        }
        Ok(out)
    }

    /// Mean undiscounted return of the deterministic policy (mean or most
    /// likely action) over `episodes` episodes with reset seeds
    /// `derive_seed(eval_seed, 0, j)`.
    pub fn evaluate(&self, task: &EnvParams, episodes: usize, eval_seed: u64) -> Result<Vec<f64>> {
        (0..episodes)
            .map(|j| {
                let mut state = envs::reset(task, derive_seed(eval_seed, 0, j as u64));
                let mut ret = 0.0;
                while !state.done() {
                    let f = self.actor.forward(&self.actor_params, &state.observation)?;
                    let a = greedy_action(&f.head)?;
                    let res = envs::step(&state, &to_env_action(&a), task)?;
                    ret += res.reward;
                    state = res.state;
                }
                if !ret.is_finite() {
                    return Err(Error::Env("non-finite evaluation return".into()));
                }
                Ok(ret)
            })
            .collect()
    }
}
