use crate::error::Result;
use crate::scalar::Scalar;

use super::{
    advantage_exact, average_kernel, occupancy_of, policy_evaluation, policy_from_occupancy,
    AdvantageTable, OccupancyMeasure, TabularPolicy, TabularTaskFamily, ValueVector,
};

/// Dual step-size schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    Constant,
    /// `step / (1 + decay · i)`.
    Diminishing {
        decay: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualAscentConfig {
    pub step: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub schedule: StepSchedule,
}

impl Default for DualAscentConfig {
    fn default() -> Self {
        Self {
            step: 1.0,
            max_iters: 10_000,
            tol: 1e-6,
            schedule: StepSchedule::Constant,
        }
    }
}

impl DualAscentConfig {
    fn step_at(&self, iter: usize) -> f64 {
        match self.schedule {
            StepSchedule::Constant => self.step,
            StepSchedule::Diminishing { decay } => self.step / (1.0 + decay * iter as f64),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DualAscentResult<T> {
    pub policy: TabularPolicy<T>,
    pub values: ValueVector<T>,
    pub occupancy: OccupancyMeasure<T>,
    pub advantage: AdvantageTable<T>,
    pub iterations: usize,
    pub converged: bool,
    /// KKT residual of the returned iterate.
    pub residual: T,
}

impl<T: Scalar> DualAscentResult<T> {
    /// `max |d(s,a) A(s,a)|`.
    pub fn slackness_residual(&self) -> T {
        self.occupancy
            .values()
            .iter()
            .zip(&self.advantage.a)
            .map(|(&d, &a)| (d * a).abs())
            .fold(T::zero(), T::max)
    }
}

/// `|A|` on the support of `d`; positive part of `A` off it.
fn kkt_residual<T: Scalar>(d: &OccupancyMeasure<T>, adv: &AdvantageTable<T>) -> T {
    d.values()
        .iter()
        .zip(&adv.a)
        .map(|(&d, &a)| {
            if d > T::zero() {
                a.abs()
            } else {
                a.max(T::zero())
            }
        })
        .fold(T::zero(), T::max)
}

/// Alternates exact policy evaluation on the family's averaged kernel with a
/// projected ascent step `d ← [d + β A]⁺` on the occupancy measure.
///
/// Starts from the occupancy of the uniform policy. Stops when the KKT
/// residual drops below `tol`; otherwise returns the best iterate seen with
/// `converged = false`.
pub fn dual_ascent<T: Scalar>(
    family: &TabularTaskFamily<T>,
    config: &DualAscentConfig,
) -> Result<DualAscentResult<T>> {
    if !(config.step > 0.0) {
        return Err(crate::Error::InvalidArgument(format!(
            "dual step must be positive, got {}",
            config.step
        )));
    }
    let mdp = average_kernel(family)?;
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let tol = T::lit(config.tol);
    let mut d = occupancy_of(&mdp, &TabularPolicy::uniform(ns, na))?;
    let mut best: Option<DualAscentResult<T>> = None;

    for iter in 0..=config.max_iters {
        let policy = policy_from_occupancy(&d)?;
        let values = policy_evaluation(&mdp, &policy)?;
        let advantage = advantage_exact(&mdp, &values)?;
        let residual = kkt_residual(&d, &advantage);
        let converged = residual < tol;

        let next = if converged || iter == config.max_iters {
            None
        } else {
            let step = T::lit(config.step_at(iter));
            let raised = d
                .values()
                .iter()
                .zip(&advantage.a)
                .map(|(&x, &a)| (x + step * a).max(T::zero()))
                .collect();
            Some(OccupancyMeasure::new(ns, na, raised)?)
        };

        let candidate = DualAscentResult {
            policy,
            values,
            occupancy: d,
            advantage,
            iterations: iter,
            converged,
            residual,
        };
        if converged {
            return Ok(candidate);
        }
        if best.as_ref().is_none_or(|b| residual < b.residual) {
            best = Some(candidate);
        }
        match next {
            Some(n) => d = n,
            None => break,
        }
    }
    Ok(best.expect("at least one iterate"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{random_family, solve_primal_lp, RandomMdpSpec, TabularMdp};

    #[test]
    fn one_state_two_actions() {
        let mdp =
            TabularMdp::new(1, 2, vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0], 0.9_f64).unwrap();
        let fam = TabularTaskFamily::new(vec![mdp.clone()]).unwrap();
        let cfg = DualAscentConfig {
            tol: 1e-8,
            ..Default::default()
        };
        let out = dual_ascent(&fam, &cfg).unwrap();
        assert!(out.converged);
        assert_eq!(out.policy.row(0), &[0.0, 1.0]);
        assert!((mdp.objective(&out.values) - 10.0).abs() < 1e-8);
    }

    #[test]
    fn identical_tasks_match_single_task() {
        let single = random_family::<f64>(&RandomMdpSpec::new(4, 3), 1, 5).unwrap();
        let task = single.tasks()[0].clone();
        let repeated = TabularTaskFamily::new(vec![task.clone(), task.clone(), task]).unwrap();
        let cfg = DualAscentConfig {
            tol: 1e-8,
            ..Default::default()
        };
        let a = dual_ascent(&single, &cfg).unwrap();
        let b = dual_ascent(&repeated, &cfg).unwrap();
        assert!(a.values.max_abs_diff(&b.values) < 1e-8);
        assert_eq!(a.policy, b.policy);
    }

    #[test]
    fn two_task_family_matches_averaged_lp() {
        let fam = random_family::<f64>(&RandomMdpSpec::new(4, 3), 2, 42).unwrap();
        let cfg = DualAscentConfig {
            tol: 1e-7,
            ..Default::default()
        };
        let out = dual_ascent(&fam, &cfg).unwrap();
        assert!(out.converged, "residual {}", out.residual);
        let avg = average_kernel(&fam).unwrap();
        let v_star = solve_primal_lp(&avg).unwrap();
        assert!((avg.objective(&out.values) - avg.objective(&v_star)).abs() < 1e-4);
        let adv = advantage_exact(&avg, &v_star).unwrap();
        for s in 0..4 {
            let row = adv.row(s);
            let mut sorted = row.to_vec();
            sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
            if sorted[0] - sorted[1] > 1e-6 {
                let greedy = row.iter().position(|&x| x == sorted[0]).unwrap();
                assert!((out.policy.prob(s, greedy) - 1.0).abs() < 1e-12);
            }
        }
        assert!(out.slackness_residual() < 1e-6);
    }

    #[test]
    fn unconverged_returns_best_iterate() {
        let fam = random_family::<f64>(&RandomMdpSpec::new(4, 3), 2, 3).unwrap();
        let cfg = DualAscentConfig {
            step: 1e-6,
            max_iters: 3,
            tol: 1e-12,
            ..Default::default()
        };
        let out = dual_ascent(&fam, &cfg).unwrap();
        assert!(!out.converged);
        assert!(out.iterations <= 3);
    }

    #[test]
    fn diminishing_schedule_still_converges() {
        let fam = random_family::<f64>(&RandomMdpSpec::new(3, 2), 3, 8).unwrap();
        let cfg = DualAscentConfig {
            schedule: StepSchedule::Diminishing { decay: 0.01 },
            tol: 1e-7,
            ..Default::default()
        };
        assert!(dual_ascent(&fam, &cfg).unwrap().converged);
    }

    #[test]
    fn rejects_non_positive_step() {
        let fam = random_family::<f64>(&RandomMdpSpec::new(2, 2), 1, 1).unwrap();
        let cfg = DualAscentConfig {
            step: 0.0,
            ..Default::default()
        };
        assert!(dual_ascent(&fam, &cfg).is_err());
    }
}
