//! Two-link underactuated arm; torque on the second joint only.
//!
//! Both links share the sampled length, mass and inertia, with each centre
//! of mass at mid-link.

use std::f64::consts::PI;

use super::{uniform, EnvState};
use crate::rng::Rng;

const GRAVITY: f64 = 9.8;
const MAX_VEL_1: f64 = 4.0 * PI;
const MAX_VEL_2: f64 = 9.0 * PI;
const TORQUES: [f64; 3] = [-1.0, 0.0, 1.0];

pub(super) struct Acrobot {
    pub length: f64,
    pub mass: f64,
    pub inertia: f64,
}

impl Acrobot {
    /// Time derivative of `(θ1, θ2, θ̇1, θ̇2)` under torque `tau`.
    fn derivs(&self, s: [f64; 4], tau: f64) -> [f64; 4] {
        let (m1, m2) = (self.mass, self.mass);
        let l1 = self.length;
        let (lc1, lc2) = (0.5 * self.length, 0.5 * self.length);
        let (i1, i2) = (self.inertia, self.inertia);
        let [theta1, theta2, dtheta1, dtheta2] = s;

        let d1 =
            m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * theta2.cos()) + i1 + i2;
        let d2 = m2 * (lc2 * lc2 + l1 * lc2 * theta2.cos()) + i2;
        let phi2 = m2 * lc2 * GRAVITY * (theta1 + theta2 - PI / 2.0).cos();
        let phi1 = -m2 * l1 * lc2 * dtheta2 * dtheta2 * theta2.sin()
            - 2.0 * m2 * l1 * lc2 * dtheta2 * dtheta1 * theta2.sin()
            + (m1 * lc1 + m2 * l1) * GRAVITY * (theta1 - PI / 2.0).cos()
            + phi2;
        let ddtheta2 =
            (tau + d2 / d1 * phi1 - m2 * l1 * lc2 * dtheta1 * dtheta1 * theta2.sin() - phi2)
                / (m2 * lc2 * lc2 + i2 - d2 * d2 / d1);
        let ddtheta1 = -(d2 * ddtheta2 + phi1) / d1;
        [dtheta1, dtheta2, ddtheta1, ddtheta2]
    }

    fn rk4(&self, s: [f64; 4], tau: f64, dt: f64) -> [f64; 4] {
        let add = |a: [f64; 4], k: [f64; 4], h: f64| std::array::from_fn(|i| a[i] + h * k[i]);
        let k1 = self.derivs(s, tau);
        let k2 = self.derivs(add(s, k1, dt / 2.0), tau);
        let k3 = self.derivs(add(s, k2, dt / 2.0), tau);
        let k4 = self.derivs(add(s, k3, dt), tau);
        std::array::from_fn(|i| s[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
    }

    /// Reward −1 per step until the tip rises one link length above the
    /// pivot, which ends the episode with reward 0.
    pub fn step(&self, s: &[f64], action: usize, dt: f64) -> (Vec<f64>, f64, bool) {
        let mut next = self.rk4([s[0], s[1], s[2], s[3]], TORQUES[action], dt);
        next[0] = wrap(next[0]);
        next[1] = wrap(next[1]);
        next[2] = next[2].clamp(-MAX_VEL_1, MAX_VEL_1);
        next[3] = next[3].clamp(-MAX_VEL_2, MAX_VEL_2);
        let goal = -next[0].cos() - (next[1] + next[0]).cos() > 1.0;
        (next.to_vec(), if goal { 0.0 } else { -1.0 }, goal)
    }
}

fn wrap(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

pub(super) fn reset(rng: &mut Rng) -> EnvState {
    let physical: Vec<f64> = (0..4).map(|_| uniform(rng, -0.1, 0.1)).collect();
    EnvState::fresh(physical.clone(), observe(&physical))
}

pub(super) fn observe(s: &[f64]) -> Vec<f64> {
    vec![s[0].cos(), s[0].sin(), s[1].cos(), s[1].sin(), s[2], s[3]]
}
