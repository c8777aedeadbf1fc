//! Exact finite-state multitask RL: value-function LP, occupancy measures,
//! the multitask Lagrangian's dual ascent and policy extraction.
//!
//! A task family shares states, actions, rewards, initial distribution and
//! discount; members differ only in their transition kernels. Averaging the
//! kernels gives a single MDP whose optimal policy maximises the mean return
//! across the family, and the dual variable of its LP is the discounted
//! state-action occupancy measure.

mod dual;
mod format;
mod random;
mod solve;

pub use dual::{dual_ascent, DualAscentConfig, DualAscentResult, StepSchedule};
pub use format::{read_mdp, write_mdp};
pub use random::{random_family, random_mdp, RandomMdpSpec};
pub use solve::{
    advantage_exact, greedy_policy, occupancy_of, policy_evaluation, policy_from_occupancy,
    solve_primal_lp, state_occupancy,
};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const STOCHASTIC_TOL: f64 = 1e-12;

/// Finite MDP with transition `P[s][a][s']`, reward `r[s][a][s']`, initial
/// distribution `μ` and discount `γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp<T> {
    n_states: usize,
    n_actions: usize,
    transition: Vec<T>,
    reward: Vec<T>,
    initial: Vec<T>,
    discount: T,
}

impl<T: Scalar> TabularMdp<T> {
    /// Builds a validated MDP. `transition` and `reward` are flattened
    /// row-major over `(s, a, s')`.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transition: Vec<T>,
        reward: Vec<T>,
        initial: Vec<T>,
        discount: T,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidMdp(
                "state and action counts must be positive".into(),
            ));
        }
        let cube = n_states * n_actions * n_states;
        if transition.len() != cube || reward.len() != cube || initial.len() != n_states {
            return Err(Error::InvalidMdp(format!(
                "tensor sizes ({}, {}, {}) do not match shape {n_states}x{n_actions}",
                transition.len(),
                reward.len(),
                initial.len()
            )));
        }
        if !(discount > T::zero() && discount < T::one()) {
            return Err(Error::InvalidMdp(format!(
                "discount {discount} outside (0, 1)"
            )));
        }
        let tol = T::tolerance(STOCHASTIC_TOL);
        for (row, chunk) in transition.chunks(n_states).enumerate() {
            check_distribution(chunk, tol).map_err(|e| {
                Error::InvalidMdp(format!(
                    "transition row (s={}, a={}): {e}",
                    row / n_actions,
                    row % n_actions
                ))
            })?;
        }
        check_distribution(&initial, tol)
            .map_err(|e| Error::InvalidMdp(format!("initial distribution: {e}")))?;
        if reward.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidMdp("non-finite reward".into()));
        }
        Ok(Self {
            n_states,
            n_actions,
            transition,
            reward,
            initial,
            discount,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn discount(&self) -> T {
        self.discount
    }

    pub fn initial(&self) -> &[T] {
        &self.initial
    }

    pub fn transition(&self) -> &[T] {
        &self.transition
    }

    pub fn reward(&self) -> &[T] {
        &self.reward
    }

    #[inline]
    fn idx(&self, s: usize, a: usize, next: usize) -> usize {
        (s * self.n_actions + a) * self.n_states + next
    }

    #[inline]
    pub fn p(&self, s: usize, a: usize, next: usize) -> T {
        self.transition[self.idx(s, a, next)]
    }

    #[inline]
    pub fn r(&self, s: usize, a: usize, next: usize) -> T {
        self.reward[self.idx(s, a, next)]
    }

    /// Next-state distribution for `(s, a)`.
    pub fn next_dist(&self, s: usize, a: usize) -> &[T] {
        let start = self.idx(s, a, 0);
        &self.transition[start..start + self.n_states]
    }

    /// Expected immediate reward `Σ_{s'} P(s'|s,a) r(s,a,s')`.
    pub fn expected_reward(&self, s: usize, a: usize) -> T {
        (0..self.n_states)
            .map(|n| self.p(s, a, n) * self.r(s, a, n))
            .sum()
    }

    /// Same MDP with a different transition kernel.
    pub fn with_transition(&self, transition: Vec<T>) -> Result<Self> {
        Self::new(
            self.n_states,
            self.n_actions,
            transition,
            self.reward.clone(),
            self.initial.clone(),
            self.discount,
        )
    }

    /// `μᵀ v`.
    pub fn objective(&self, v: &ValueVector<T>) -> T {
        self.initial.iter().zip(&v.v).map(|(&m, &x)| m * x).sum()
    }
}

fn check_distribution<T: Scalar>(row: &[T], tol: T) -> std::result::Result<(), String> {
    if row.iter().any(|&p| !(p >= T::zero())) {
        return Err("negative or non-finite probability".into());
    }
    let sum: T = row.iter().copied().sum();
    if (sum - T::one()).abs() > tol {
        return Err(format!("sums to {sum}"));
    }
    Ok(())
}

/// Tasks that differ only in their transition kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularTaskFamily<T> {
    tasks: Vec<TabularMdp<T>>,
}

impl<T: Scalar> TabularTaskFamily<T> {
    pub fn new(tasks: Vec<TabularMdp<T>>) -> Result<Self> {
        let first = tasks
            .first()
            .ok_or_else(|| Error::InvalidFamily("family must contain at least one task".into()))?;
        for (k, t) in tasks.iter().enumerate().skip(1) {
            if t.n_states != first.n_states || t.n_actions != first.n_actions {
                return Err(Error::InvalidFamily(format!(
                    "task {k} has a different shape"
                )));
            }
            if t.reward != first.reward
                || t.initial != first.initial
                || t.discount != first.discount
            {
                return Err(Error::InvalidFamily(format!(
                    "task {k} differs in reward, initial distribution or discount"
                )));
            }
        }
        Ok(Self { tasks })
    }

    pub fn tasks(&self) -> &[TabularMdp<T>] {
        &self.tasks
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }
}

/// The MDP whose kernel is the element-wise mean of the family's kernels.
pub fn average_kernel<T: Scalar>(family: &TabularTaskFamily<T>) -> Result<TabularMdp<T>> {
    let tasks = family.tasks();
    let first = tasks
        .first()
        .ok_or_else(|| Error::InvalidFamily("cannot average an empty family".into()))?;
    let n = T::from_count(tasks.len());
    let mut mean = vec![T::zero(); first.transition.len()];
    for t in tasks {
        if t.transition.len() != mean.len() {
            return Err(Error::InvalidFamily("kernel shape mismatch".into()));
        }
        for (m, &p) in mean.iter_mut().zip(&t.transition) {
            *m += p;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    first.with_transition(mean)
}

/// Discounted state-action visitation mass `d(s, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyMeasure<T> {
    n_states: usize,
    n_actions: usize,
    d: Vec<T>,
}

impl<T: Scalar> OccupancyMeasure<T> {
    pub fn new(n_states: usize, n_actions: usize, d: Vec<T>) -> Result<Self> {
        if d.len() != n_states * n_actions {
            return Err(Error::Dimension {
                expected: n_states * n_actions,
                got: d.len(),
            });
        }
        if let Some(bad) = d.iter().find(|x| !(**x >= T::zero())) {
            return Err(Error::InvalidArgument(format!(
                "occupancy entry {bad} is negative"
            )));
        }
        Ok(Self {
            n_states,
            n_actions,
            d,
        })
    }

    pub fn get(&self, s: usize, a: usize) -> T {
        self.d[s * self.n_actions + a]
    }

    pub fn row(&self, s: usize) -> &[T] {
        &self.d[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn values(&self) -> &[T] {
        &self.d
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn total_mass(&self) -> T {
        self.d.iter().copied().sum()
    }
}

/// Stochastic policy `π(a|s)` with rows over actions.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy<T> {
    n_states: usize,
    n_actions: usize,
    pi: Vec<T>,
}

impl<T: Scalar> TabularPolicy<T> {
    pub fn new(n_states: usize, n_actions: usize, pi: Vec<T>) -> Result<Self> {
        if pi.len() != n_states * n_actions {
            return Err(Error::Dimension {
                expected: n_states * n_actions,
                got: pi.len(),
            });
        }
        let tol = T::tolerance(STOCHASTIC_TOL);
        for (s, row) in pi.chunks(n_actions).enumerate() {
            check_distribution(row, tol)
                .map_err(|e| Error::InvalidArgument(format!("policy row {s}: {e}")))?;
        }
        Ok(Self {
            n_states,
            n_actions,
            pi,
        })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        let p = T::one() / T::from_count(n_actions);
        Self {
            n_states,
            n_actions,
            pi: vec![p; n_states * n_actions],
        }
    }

    /// Deterministic policy choosing `actions[s]` in state `s`.
    pub fn deterministic(n_actions: usize, actions: &[usize]) -> Self {
        let mut pi = vec![T::zero(); actions.len() * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            pi[s * n_actions + a] = T::one();
        }
        Self {
            n_states: actions.len(),
            n_actions,
            pi,
        }
    }

    pub fn prob(&self, s: usize, a: usize) -> T {
        self.pi[s * self.n_actions + a]
    }

    pub fn row(&self, s: usize) -> &[T] {
        &self.pi[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }
}

/// State values `v(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueVector<T> {
    pub v: Vec<T>,
}

impl<T: Scalar> ValueVector<T> {
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.v
            .iter()
            .zip(&other.v)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }
}

/// Advantage table `A(s, a)`, row-major over states.
#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageTable<T> {
    pub n_actions: usize,
    pub a: Vec<T>,
}

impl<T: Scalar> AdvantageTable<T> {
    pub fn get(&self, s: usize, a: usize) -> T {
        self.a[s * self.n_actions + a]
    }

    pub fn row(&self, s: usize) -> &[T] {
        &self.a[s * self.n_actions..(s + 1) * self.n_actions]
    }
}
