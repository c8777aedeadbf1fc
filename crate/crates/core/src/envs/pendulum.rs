//! Torque-limited pendulum swing-up. Angle zero is upright.

use std::f64::consts::PI;

use super::{uniform, EnvState};
use crate::rng::Rng;

pub const MAX_TORQUE: f64 = 2.0;
pub const MAX_SPEED: f64 = 8.0;
const GRAVITY: f64 = 10.0;

pub(super) fn reset(rng: &mut Rng) -> EnvState {
    let theta = uniform(rng, -PI, PI);
    let theta_dot = uniform(rng, -1.0, 1.0);
    let physical = vec![theta, theta_dot];
    EnvState::fresh(physical.clone(), observe(&physical))
}

pub(super) fn observe(physical: &[f64]) -> Vec<f64> {
    vec![physical[0].cos(), physical[0].sin(), physical[1]]
}

fn wrap_angle(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

/// Semi-implicit Euler step of a uniform rod pivoting at one end. The cost
/// is charged on the pre-step state and the applied torque.
pub(super) fn dynamics(
    physical: &[f64],
    torque: f64,
    mass: f64,
    length: f64,
    dt: f64,
) -> (Vec<f64>, f64, bool) {
    let (theta, theta_dot) = (physical[0], physical[1]);
    let u = torque.clamp(-MAX_TORQUE, MAX_TORQUE);
    let angle = wrap_angle(theta);
    let reward = -(angle * angle + 0.1 * theta_dot * theta_dot + 0.001 * u * u);

    let accel = 3.0 * GRAVITY / (2.0 * length) * theta.sin() + 3.0 / (mass * length * length) * u;
    let next_dot = (theta_dot + accel * dt).clamp(-MAX_SPEED, MAX_SPEED);
    let next_theta = theta + next_dot * dt;
    (vec![next_theta, next_dot], reward, false)
}

/// Kinetic plus potential energy, potential zero with the rod hanging down.
pub fn pendulum_energy(mass: f64, length: f64, physical: &[f64]) -> f64 {
    let inertia = mass * length * length / 3.0;
    0.5 * inertia * physical[1] * physical[1]
        + mass * GRAVITY * 0.5 * length * (1.0 + physical[0].cos())
}
