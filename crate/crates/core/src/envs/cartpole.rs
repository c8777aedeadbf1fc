//! Cart-pole with continuous force: balance and swing-up variants.
//!
//! Physical state is `(x, ẋ, θ, θ̇)` with `θ = 0` upright.

use std::f64::consts::PI;

use super::{uniform, EnvState};
use crate::rng::Rng;

pub const FORCE_BOUND: f64 = 10.0;
const GRAVITY: f64 = 9.8;
const ANGLE_LIMIT: f64 = 12.0 * 2.0 * PI / 360.0;
const TRACK_LIMIT: f64 = 2.4;

pub(super) struct CartPole {
    pub pole_mass: f64,
    pub half_length: f64,
    pub cart_mass: f64,
}

impl CartPole {
    /// Semi-implicit Euler step of the frictionless cart-pole equations.
    fn integrate(&self, s: &[f64], force: f64, dt: f64) -> Vec<f64> {
        let (x, x_dot, theta, theta_dot) = (s[0], s[1], s[2], s[3]);
        let force = force.clamp(-FORCE_BOUND, FORCE_BOUND);
        let total = self.pole_mass + self.cart_mass;
        let pole_moment = self.pole_mass * self.half_length;
        let (sin, cos) = theta.sin_cos();

        let temp = (force + pole_moment * theta_dot * theta_dot * sin) / total;
        let theta_acc = (GRAVITY * sin - cos * temp)
            / (self.half_length * (4.0 / 3.0 - self.pole_mass * cos * cos / total));
        let x_acc = temp - pole_moment * theta_acc * cos / total;

        let x_dot = x_dot + dt * x_acc;
        let theta_dot = theta_dot + dt * theta_acc;
        vec![x + dt * x_dot, x_dot, theta + dt * theta_dot, theta_dot]
    }

    /// +1 per step; fails past 12 degrees or 2.4 units off centre.
    pub fn balance_step(&self, s: &[f64], force: f64, dt: f64) -> (Vec<f64>, f64, bool) {
        let next = self.integrate(s, force, dt);
        let failed = next[2].abs() > ANGLE_LIMIT || next[0].abs() > TRACK_LIMIT;
        (next, 1.0, failed)
    }

    /// Reward `2 / (1 + e^d) + cos ψ`, `d` the distance of the pole tip from
    /// its upright position above the track centre. Never terminates.
    pub fn swing_up_step(&self, s: &[f64], force: f64, dt: f64) -> (Vec<f64>, f64, bool) {
        let next = self.integrate(s, force, dt);
        let reward = swing_up_reward(next[0], next[2], self.half_length);
        (next, reward, false)
    }
}

pub(super) fn swing_up_reward(x: f64, psi: f64, half_length: f64) -> f64 {
    let pole = 2.0 * half_length;
    let dx = x + pole * psi.sin();
    let dy = pole * psi.cos() - pole;
    let d = (dx * dx + dy * dy).sqrt();
    2.0 / (1.0 + d.exp()) + psi.cos()
}

pub(super) fn reset_balance(rng: &mut Rng) -> EnvState {
    let physical: Vec<f64> = (0..4).map(|_| uniform(rng, -0.05, 0.05)).collect();
    EnvState::fresh(physical.clone(), physical)
}

pub(super) fn reset_swing_up(rng: &mut Rng) -> EnvState {
    let mut physical: Vec<f64> = (0..4).map(|_| uniform(rng, -0.05, 0.05)).collect();
    physical[2] += PI;
    EnvState::fresh(physical.clone(), observe_swing_up(&physical))
}

pub(super) fn observe_swing_up(s: &[f64]) -> Vec<f64> {
    vec![s[0], s[1], s[2].cos(), s[2].sin(), s[3]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{reset, step, Action, EnvKind};

    #[test]
    fn upright_at_centre_pays_two() {
        assert_eq!(swing_up_reward(0.0, 0.0, 0.25), 2.0);
    }

    #[test]
    fn hanging_pole_pays_little() {
        let r = swing_up_reward(0.0, PI, 0.25);
        let d: f64 = 1.0; // tip 2·(2·0.25) below the upright point
        assert!((r - (2.0 / (1.0 + d.exp()) - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn balance_reset_is_small() {
        let p = EnvKind::CartPoleBalance.default_params();
        for seed in 0..200 {
            assert!(reset(&p, seed).observation.iter().all(|x| x.abs() <= 0.05));
        }
    }

    #[test]
    fn thirteen_degrees_terminates() {
        let p = EnvKind::CartPoleBalance.default_params();
        let mut s = reset(&p, 0);
        s.physical = vec![0.0, 0.0, 13.0_f64.to_radians(), 0.0];
        s.observation = s.physical.clone();
        let out = step(&s, &Action::Continuous(vec![0.0]), &p).unwrap();
        assert!(out.terminal);
        assert!(out.state.terminal);
        assert_eq!(out.reward, 1.0);
    }

    #[test]
    fn leaving_track_terminates() {
        let p = EnvKind::CartPoleBalance.default_params();
        let mut s = reset(&p, 0);
        s.physical = vec![2.45, 0.0, 0.0, 0.0];
        assert!(
            step(&s, &Action::Continuous(vec![0.0]), &p)
                .unwrap()
                .terminal
        );
    }

    #[test]
    fn balance_truncates_at_two_hundred() {
        let p = EnvKind::CartPoleBalance.default_params();
        let mut s = reset(&p, 0);
        s.physical = vec![0.0; 4];
        s.step_count = 199;
        let out = step(&s, &Action::Continuous(vec![0.0]), &p).unwrap();
        assert!(!out.terminal && out.state.truncated);
    }

    #[test]
    fn swing_up_starts_hanging() {
        let p = EnvKind::CartPoleSwingUp.default_params();
        let s = reset(&p, 11);
        assert!(s.observation[2] < -0.99);
    }
}
