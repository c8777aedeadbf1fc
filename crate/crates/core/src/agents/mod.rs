//! Advantage estimators, per-agent gradients and the training loops for the
//! diffusion, centralised and specialised roles.
//!
//! All losses are minimised: the critic follows the semi-gradient
//! `−Â·∇v(s)` and the actor minimises `−log π(a|s)·Â − c·H(π(·|s))`.

mod advantage;
mod events;
mod gradients;
mod learner;
mod parallel;
mod system;

pub use advantage::{advantage_a2c, advantage_siac, Trajectory, Transition};
pub use events::{EventLog, RoundEvent};
pub use gradients::{centralised_gradients, local_gradients, ActorCritic};
pub use learner::{networks_for, to_env_action, AdaptStats, Learner, NetworkConfig, Worker};
pub use parallel::{run_parallel, EpochSnapshot};
pub use system::{run_diffusion_round, Agent, System};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::OptimiserConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Siac,
    A2c,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Diffusion,
    Centralised,
    Specialised,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub algorithm: Algorithm,
    pub role: Role,
    /// A2C steps per worker between updates.
    pub steps_per_update: usize,
    /// SiAC episodes per worker pooled into one update.
    pub episodes_per_update: usize,
    pub entropy_coef: f64,
    pub actor_optimiser: OptimiserConfig,
    pub critic_optimiser: OptimiserConfig,
    pub discount: f64,
    /// Maximum age, in rounds, of a neighbour snapshot used in combination.
    pub staleness_limit: usize,
    /// Also combine optimiser moments with the diffusion weights.
    pub average_moments: bool,
    /// Start every agent from the same initial parameters.
    pub shared_init: bool,
    /// Environment copies per specialised agent.
    pub specialised_copies: usize,
}

impl AgentConfig {
    pub fn siac(role: Role) -> Self {
        Self {
            algorithm: Algorithm::Siac,
            role,
            steps_per_update: 5,
            episodes_per_update: 5,
            entropy_coef: 0.0005,
            actor_optimiser: OptimiserConfig::adam(0.001),
            critic_optimiser: OptimiserConfig::adam(0.01),
            discount: 0.99,
            staleness_limit: 5,
            average_moments: false,
            shared_init: true,
            specialised_copies: 1,
        }
    }

    pub fn a2c(role: Role) -> Self {
        let (lr, steps) = match role {
            Role::Diffusion => (0.0007, 60),
            Role::Centralised | Role::Specialised => (0.002, 5),
        };
        Self {
            algorithm: Algorithm::A2c,
            role,
            steps_per_update: steps,
            episodes_per_update: 5,
            entropy_coef: 0.01,
            actor_optimiser: OptimiserConfig::rmsprop(lr),
            critic_optimiser: OptimiserConfig::rmsprop(lr),
            discount: 0.99,
            staleness_limit: 5,
            average_moments: false,
            shared_init: true,
            specialised_copies: 1,
        }
    }

    pub fn defaults(algorithm: Algorithm, role: Role) -> Self {
        match algorithm {
            Algorithm::Siac => Self::siac(role),
            Algorithm::A2c => Self::a2c(role),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps_per_update == 0
            || self.episodes_per_update == 0
            || self.specialised_copies == 0
        {
            return Err(Error::Config(
                "update sizes and copies must be at least 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return Err(Error::Config(format!(
                "discount {} outside [0, 1]",
                self.discount
            )));
        }
        if !(self.entropy_coef >= 0.0 && self.entropy_coef.is_finite()) {
            return Err(Error::Config(
                "entropy coefficient must be finite and non-negative".into(),
            ));
        }
        self.actor_optimiser.validate()?;
        self.critic_optimiser.validate()
    }

    /// Rounds that make up one epoch: SiAC pools a full epoch of episodes into
    /// one update; A2C spends `steps_per_epoch` environment steps per worker.
    pub fn rounds_per_epoch(&self, steps_per_epoch: usize) -> usize {
        match self.algorithm {
            Algorithm::Siac => 1,
            Algorithm::A2c => steps_per_epoch.div_ceil(self.steps_per_update).max(1),
        }
    }
}
