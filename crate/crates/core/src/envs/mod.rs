//! Parameterised classic-control tasks.
//!
//! Each kind exposes `reset` and `step` over an explicit [`EnvState`]; the
//! physical parameters in [`EnvParams`] are what distinguishes one task of a
//! family from another.

mod acrobot;
mod cartpole;
mod pendulum;
mod tasks;

pub use pendulum::pendulum_energy;
pub use tasks::{acrobot_easy, acrobot_hard, sample_task_grid, GridSpec};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_from, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    Pendulum,
    CartPoleBalance,
    CartPoleSwingUp,
    Acrobot,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Pendulum => "pendulum",
            EnvKind::CartPoleBalance => "cart_pole_balance",
            EnvKind::CartPoleSwingUp => "cart_pole_swing_up",
            EnvKind::Acrobot => "acrobot",
        }
    }

    pub fn observation_dim(self) -> usize {
        match self {
            EnvKind::Pendulum => 3,
            EnvKind::CartPoleBalance => 4,
            EnvKind::CartPoleSwingUp => 5,
            EnvKind::Acrobot => 6,
        }
    }

    pub fn action_spec(self) -> ActionSpec {
        match self {
            EnvKind::Pendulum => {
                ActionSpec::continuous(vec![-pendulum::MAX_TORQUE], vec![pendulum::MAX_TORQUE])
            }
            EnvKind::CartPoleBalance | EnvKind::CartPoleSwingUp => {
                ActionSpec::continuous(vec![-cartpole::FORCE_BOUND], vec![cartpole::FORCE_BOUND])
            }
            EnvKind::Acrobot => ActionSpec::Discrete { n: 3 },
        }
    }

    /// Parameters of the standard single-task variant.
    pub fn default_params(self) -> EnvParams {
        let physics = match self {
            EnvKind::Pendulum => Physics::Pendulum {
                mass: 1.0,
                length: 1.0,
            },
            EnvKind::CartPoleBalance => Physics::CartPoleBalance {
                pole_mass: 0.1,
                pole_half_length: 0.5,
                cart_mass: 1.0,
            },
            EnvKind::CartPoleSwingUp => Physics::CartPoleSwingUp {
                pole_mass: 0.5,
                pole_half_length: 0.25,
                cart_mass: 0.5,
            },
            EnvKind::Acrobot => Physics::Acrobot {
                link_length: 1.0,
                link_mass: 1.0,
                link_inertia: 1.0,
            },
        };
        EnvParams::new(physics)
    }
}

/// Physical parameters, in SI-style units, per environment kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Physics {
    Pendulum {
        mass: f64,
        length: f64,
    },
    CartPoleBalance {
        pole_mass: f64,
        pole_half_length: f64,
        cart_mass: f64,
    },
    CartPoleSwingUp {
        pole_mass: f64,
        pole_half_length: f64,
        cart_mass: f64,
    },
    Acrobot {
        link_length: f64,
        link_mass: f64,
        link_inertia: f64,
    },
}

impl Physics {
    pub fn kind(&self) -> EnvKind {
        match self {
            Physics::Pendulum { .. } => EnvKind::Pendulum,
            Physics::CartPoleBalance { .. } => EnvKind::CartPoleBalance,
            Physics::CartPoleSwingUp { .. } => EnvKind::CartPoleSwingUp,
            Physics::Acrobot { .. } => EnvKind::Acrobot,
        }
    }

    fn values(&self) -> Vec<(&'static str, f64)> {
        match *self {
            Physics::Pendulum { mass, length } => vec![("mass", mass), ("length", length)],
            Physics::CartPoleBalance {
                pole_mass,
                pole_half_length,
                cart_mass,
            }
            | Physics::CartPoleSwingUp {
                pole_mass,
                pole_half_length,
                cart_mass,
            } => vec![
                ("pole_mass", pole_mass),
                ("pole_half_length", pole_half_length),
                ("cart_mass", cart_mass),
            ],
            Physics::Acrobot {
                link_length,
                link_mass,
                link_inertia,
            } => vec![
                ("link_length", link_length),
                ("link_mass", link_mass),
                ("link_inertia", link_inertia),
            ],
        }
    }
}

/// A task: physical parameters plus episode settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvParams {
    pub physics: Physics,
    pub episode_max_steps: usize,
    pub discount: f64,
    /// Integration step in seconds.
    pub dt: f64,
}

impl EnvParams {
    /// Kind-specific defaults for horizon and integration step, discount 0.99.
    pub fn new(physics: Physics) -> Self {
        let (episode_max_steps, dt) = match physics.kind() {
            EnvKind::Pendulum => (200, 0.05),
            EnvKind::CartPoleBalance => (200, 0.02),
            EnvKind::CartPoleSwingUp => (500, 0.02),
            EnvKind::Acrobot => (500, 0.2),
        };
        Self {
            physics,
            episode_max_steps,
            discount: 0.99,
            dt,
        }
    }

    pub fn kind(&self) -> EnvKind {
        self.physics.kind()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.physics.values() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Env(format!("{name} must be positive, got {v}")));
            }
        }
        if self.episode_max_steps == 0 {
            return Err(Error::Env("episode_max_steps must be positive".into()));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Env(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(Error::Env(format!(
                "discount {} outside (0, 1)",
                self.discount
            )));
        }
        Ok(())
    }

    /// Named physical parameters, in a fixed order.
    pub fn named_values(&self) -> Vec<(&'static str, f64)> {
        self.physics.values()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ActionSpec {
    Continuous { low: Vec<f64>, high: Vec<f64> },
    Discrete { n: usize },
}

impl ActionSpec {
    pub fn continuous(low: Vec<f64>, high: Vec<f64>) -> Self {
        assert!(
            low.iter().zip(&high).all(|(l, h)| l < h),
            "action bounds must satisfy low < high"
        );
        ActionSpec::Continuous { low, high }
    }

    pub fn dim(&self) -> usize {
        match self {
            ActionSpec::Continuous { low, .. } => low.len(),
            ActionSpec::Discrete { n } => *n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Continuous(Vec<f64>),
    Discrete(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub observation: Vec<f64>,
    /// Internal integration state (angles unwrapped where relevant).
    pub physical: Vec<f64>,
    pub step_count: usize,
    /// The episode reached a failure or goal state.
    pub terminal: bool,
    /// The episode hit `episode_max_steps`.
    pub truncated: bool,
}

impl EnvState {
    fn fresh(physical: Vec<f64>, observation: Vec<f64>) -> Self {
        Self {
            observation,
            physical,
            step_count: 0,
            terminal: false,
            truncated: false,
        }
    }

    pub fn done(&self) -> bool {
        self.terminal || self.truncated
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub state: EnvState,
    pub reward: f64,
    pub terminal: bool,
}

/// Initial state drawn deterministically from `seed`.
pub fn reset(params: &EnvParams, seed: u64) -> EnvState {
    let mut rng = rng_from(seed);
    reset_with(params, &mut rng)
}

pub fn reset_with(params: &EnvParams, rng: &mut Rng) -> EnvState {
    match params.kind() {
        EnvKind::Pendulum => pendulum::reset(rng),
        EnvKind::CartPoleBalance => cartpole::reset_balance(rng),
        EnvKind::CartPoleSwingUp => cartpole::reset_swing_up(rng),
        EnvKind::Acrobot => acrobot::reset(rng),
    }
}

fn uniform(rng: &mut Rng, low: f64, high: f64) -> f64 {
    low + (high - low) * rng.random::<f64>()
}

/// Advances one integration step. Continuous actions are clipped to the
/// action bounds before they reach the dynamics.
pub fn step(state: &EnvState, action: &Action, params: &EnvParams) -> Result<StepResult> {
    if state.done() {
        return Err(Error::Env("cannot step a finished episode".into()));
    }
    let (physical, reward, terminal) = match (params.physics, action) {
        (Physics::Pendulum { mass, length }, Action::Continuous(a)) => {
            pendulum::dynamics(&state.physical, first(a)?, mass, length, params.dt)
        }
        (
            Physics::CartPoleBalance {
                pole_mass,
                pole_half_length,
                cart_mass,
            },
            Action::Continuous(a),
        ) => {
            let p = cartpole::CartPole {
                pole_mass,
                half_length: pole_half_length,
                cart_mass,
            };
            p.balance_step(&state.physical, first(a)?, params.dt)
        }
        (
            Physics::CartPoleSwingUp {
                pole_mass,
                pole_half_length,
                cart_mass,
            },
            Action::Continuous(a),
        ) => {
            let p = cartpole::CartPole {
                pole_mass,
                half_length: pole_half_length,
                cart_mass,
            };
            p.swing_up_step(&state.physical, first(a)?, params.dt)
        }
        (
            Physics::Acrobot {
                link_length,
                link_mass,
                link_inertia,
            },
            Action::Discrete(a),
        ) => {
            if *a >= 3 {
                return Err(Error::Env(format!("acrobot action {a} out of range")));
            }
            let p = acrobot::Acrobot {
                length: link_length,
                mass: link_mass,
                inertia: link_inertia,
            };
            p.step(&state.physical, *a, params.dt)
        }
        (physics, action) => {
            return Err(Error::Env(format!(
                "action {action:?} does not fit {:?}",
                physics.kind()
            )));
        }
    };
    let observation = observe(params.kind(), &physical);
    if observation.iter().any(|x| !x.is_finite()) {
        return Err(Error::Env("non-finite observation".into()));
    }
    let step_count = state.step_count + 1;
    let next = EnvState {
        observation,
        physical,
        step_count,
        terminal,
        truncated: !terminal && step_count >= params.episode_max_steps,
    };
    Ok(StepResult {
        state: next,
        reward,
        terminal,
    })
}

fn first(a: &[f64]) -> Result<f64> {
    match a {
        [x] if x.is_finite() => Ok(*x),
        [x] => Err(Error::Env(format!("non-finite action {x}"))),
        _ => Err(Error::Env(format!(
            "expected a 1-dimensional action, got {}",
            a.len()
        ))),
    }
}

pub(crate) fn observe(kind: EnvKind, physical: &[f64]) -> Vec<f64> {
    match kind {
        EnvKind::Pendulum => pendulum::observe(physical),
        EnvKind::CartPoleBalance => physical.to_vec(),
        EnvKind::CartPoleSwingUp => cartpole::observe_swing_up(physical),
        EnvKind::Acrobot => acrobot::observe(physical),
    }
}
