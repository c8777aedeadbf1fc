//! Task families: Cartesian grids over physical parameters, or i.i.d.
//! draws for the randomised acrobot.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{EnvKind, EnvParams, Physics};
use crate::error::{Error, Result};
use crate::rng::rng_from;

const PENDULUM_MASS: [f64; 5] = [0.8, 0.9, 1.0, 1.1, 1.2];
const PENDULUM_LENGTH: [f64; 5] = [0.8, 0.9, 1.0, 1.1, 1.2];
const BALANCE_POLE_MASS: [f64; 5] = [0.1, 0.325, 0.55, 0.775, 1.0];
const BALANCE_HALF_LENGTH: [f64; 5] = [0.05, 0.1625, 0.275, 0.3875, 0.5];
const BALANCE_CART_MASS: [f64; 1] = [1.0];
const SWING_POLE_MASS: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];
const SWING_HALF_LENGTH: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];
const SWING_CART_MASS: [f64; 1] = [0.5];

/// How many tasks to draw, and along which axes for grid kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSpec {
    /// Points per physical axis, in the kind's parameter order. An axis of
    /// one point takes the single-task default; the full published size
    /// takes the published values; anything else is evenly spaced over the
    /// published range.
    Grid(Vec<usize>),
    /// Independent draws (acrobot).
    Sample { n: usize, seed: u64 },
}

impl GridSpec {
    pub fn n_tasks(&self) -> usize {
        match self {
            GridSpec::Grid(counts) => counts.iter().product(),
            GridSpec::Sample { n, .. } => *n,
        }
    }
}

fn axis(values: &[f64], default: f64, count: usize) -> Result<Vec<f64>> {
    match count {
        0 => Err(Error::Env("grid axis needs at least one point".into())),
        1 => Ok(vec![default]),
        n if n == values.len() => Ok(values.to_vec()),
        n => {
            let (lo, hi) = (values[0], values[values.len() - 1]);
            if lo == hi {
                return Err(Error::Env(format!(
                    "axis with a single published value cannot hold {n} points"
                )));
            }
            Ok((0..n)
                .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                .collect())
        }
    }
}

fn product(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    axes.iter().fold(vec![Vec::new()], |acc, ax| {
        acc.iter()
            .flat_map(|prefix| {
                ax.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect()
    })
}

/// Draw from `U([0.5, 0.75] ∪ [1.25, 1.5])`.
fn extreme_uniform(rng: &mut crate::rng::Rng) -> f64 {
    let lower = rng.random::<bool>();
    let u = rng.random::<f64>() * 0.25;
    if lower {
        0.5 + u
    } else {
        1.25 + u
    }
}

/// Builds the task list for `kind`.
pub fn sample_task_grid(kind: EnvKind, grid: &GridSpec) -> Result<Vec<EnvParams>> {
    let base = kind.default_params();
    match (kind, grid) {
        (EnvKind::Acrobot, GridSpec::Sample { n, seed }) => {
            let mut rng = rng_from(*seed);
            Ok((0..*n)
                .map(|_| {
                    let link_mass = extreme_uniform(&mut rng);
                    let link_length = extreme_uniform(&mut rng);
                    let link_inertia = extreme_uniform(&mut rng);
                    EnvParams {
                        physics: Physics::Acrobot {
                            link_length,
                            link_mass,
                            link_inertia,
                        },
                        ..base
                    }
                })
                .collect())
        }
        (EnvKind::Acrobot, GridSpec::Grid(counts)) if counts.iter().all(|&c| c == 1) => {
            Ok(vec![base])
        }
        (EnvKind::Acrobot, GridSpec::Grid(_)) => {
            Err(Error::Env("acrobot tasks are sampled, not gridded".into()))
        }
        (_, GridSpec::Sample { .. }) => Err(Error::Env(format!("{} uses a grid", kind.name()))),
        (_, GridSpec::Grid(counts)) => {
            let published: Vec<&[f64]> = match kind {
                EnvKind::Pendulum => vec![&PENDULUM_MASS, &PENDULUM_LENGTH],
                EnvKind::CartPoleBalance => {
                    vec![&BALANCE_POLE_MASS, &BALANCE_HALF_LENGTH, &BALANCE_CART_MASS]
                }
                EnvKind::CartPoleSwingUp => {
                    vec![&SWING_POLE_MASS, &SWING_HALF_LENGTH, &SWING_CART_MASS]
                }
                EnvKind::Acrobot => unreachable!(),
            };
            if counts.len() != published.len() {
                return Err(Error::Env(format!(
                    "{} grid needs {} axes, got {}",
                    kind.name(),
                    published.len(),
                    counts.len()
                )));
            }
            let defaults: Vec<f64> = base.named_values().iter().map(|(_, v)| *v).collect();
            let axes = published
                .iter()
                .zip(&defaults)
                .zip(counts)
                .map(|((vals, &d), &c)| axis(vals, d, c))
                .collect::<Result<Vec<_>>>()?;
            Ok(product(&axes)
                .into_iter()
                .map(|p| {
                    let physics = match kind {
                        EnvKind::Pendulum => Physics::Pendulum {
                            mass: p[0],
                            length: p[1],
                        },
                        EnvKind::CartPoleBalance => Physics::CartPoleBalance {
                            pole_mass: p[0],
                            pole_half_length: p[1],
                            cart_mass: p[2],
                        },
                        _ => Physics::CartPoleSwingUp {
                            pole_mass: p[0],
                            pole_half_length: p[1],
                            cart_mass: p[2],
                        },
                    };
                    EnvParams { physics, ..base }
                })
                .collect())
        }
    }
}

/// Held-out acrobot task that most agents solve quickly.
pub fn acrobot_easy() -> EnvParams {
    EnvParams::new(Physics::Acrobot {
        link_length: 0.7046,
        link_mass: 0.5259,
        link_inertia: 0.6346,
    })
}

/// Held-out acrobot task that most agents find hard.
pub fn acrobot_hard() -> EnvParams {
    EnvParams::new(Physics::Acrobot {
        link_length: 1.3963,
        link_mass: 1.3929,
        link_inertia: 0.6256,
    })
}
