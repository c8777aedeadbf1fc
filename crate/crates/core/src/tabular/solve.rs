use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Scalar;

use super::{AdvantageTable, OccupancyMeasure, TabularMdp, TabularPolicy, ValueVector};

const VALUE_ITERATION_RESIDUAL: f64 = 1e-10;
const MAX_VALUE_ITERATIONS: usize = 1_000_000;

/// `P^π` (row-major `n x n`) and `r^π`.
fn policy_kernel<T: Scalar>(mdp: &TabularMdp<T>, pi: &TabularPolicy<T>) -> (Vec<T>, Vec<T>) {
    let n = mdp.n_states();
    let mut p = vec![T::zero(); n * n];
    let mut r = vec![T::zero(); n];
    for s in 0..n {
        for a in 0..mdp.n_actions() {
            let w = pi.prob(s, a);
            if w == T::zero() {
                continue;
            }
            for next in 0..n {
                let prob = mdp.p(s, a, next);
                p[s * n + next] += w * prob;
                r[s] += w * prob * mdp.r(s, a, next);
            }
        }
    }
    (p, r)
}

fn check_policy<T: Scalar>(mdp: &TabularMdp<T>, pi: &TabularPolicy<T>) -> Result<()> {
    if pi.n_states() != mdp.n_states() || pi.n_actions() != mdp.n_actions() {
        return Err(Error::InvalidArgument(format!(
            "policy shape {}x{} does not match MDP {}x{}",
            pi.n_states(),
            pi.n_actions(),
            mdp.n_states(),
            mdp.n_actions()
        )));
    }
    Ok(())
}

/// Exact value of `pi` by solving `(I − γ P^π) v = r^π`.
pub fn policy_evaluation<T: Scalar>(
    mdp: &TabularMdp<T>,
    pi: &TabularPolicy<T>,
) -> Result<ValueVector<T>> {
    check_policy(mdp, pi)?;
    let n = mdp.n_states();
    let (p, r) = policy_kernel(mdp, pi);
    let gamma = mdp.discount();
    let mut a = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            let eye = if i == j { T::one() } else { T::zero() };
            a[i * n + j] = eye - gamma * p[i * n + j];
        }
    }
    let v = linalg::solve(&a, &r).ok_or(Error::Singular("policy evaluation"))?;
    Ok(ValueVector { v })
}

/// One-step lookahead `Σ_{s'} P(s'|s,a)(r + γ v(s'))`.
fn backup<T: Scalar>(mdp: &TabularMdp<T>, v: &[T], s: usize, a: usize) -> T {
    let gamma = mdp.discount();
    (0..mdp.n_states())
        .map(|next| mdp.p(s, a, next) * (mdp.r(s, a, next) + gamma * v[next]))
        .sum()
}

/// Deterministic policy acting greedily on `v`; ties go to the lowest action.
pub fn greedy_policy<T: Scalar>(mdp: &TabularMdp<T>, v: &ValueVector<T>) -> TabularPolicy<T> {
    let actions: Vec<usize> = (0..mdp.n_states())
        .map(|s| {
            let mut best = 0;
            let mut best_q = backup(mdp, &v.v, s, 0);
            for a in 1..mdp.n_actions() {
                let q = backup(mdp, &v.v, s, a);
                if q > best_q {
                    best = a;
                    best_q = q;
                }
            }
            best
        })
        .collect();
    TabularPolicy::deterministic(mdp.n_actions(), &actions)
}

/// Optimal value function: the minimiser of `μᵀv` subject to
/// `v(s) ≥ Σ_{s'} P(s'|s,a)(r + γ v(s'))` for every `(s, a)`.
///
/// Value iteration runs to a `1e-10` max-norm residual, after which policy
/// iteration on the greedy policy removes the remaining contraction error.
pub fn solve_primal_lp<T: Scalar>(mdp: &TabularMdp<T>) -> Result<ValueVector<T>> {
    if !(mdp.discount() < T::one()) {
        return Err(Error::InvalidMdp("value LP requires discount < 1".into()));
    }
    let n = mdp.n_states();
    let tol = T::tolerance(VALUE_ITERATION_RESIDUAL);
    let mut v = vec![T::zero(); n];
    for _ in 0..MAX_VALUE_ITERATIONS {
        let next: Vec<T> = (0..n)
            .map(|s| {
                (0..mdp.n_actions())
                    .map(|a| backup(mdp, &v, s, a))
                    .fold(T::neg_infinity(), T::max)
            })
            .collect();
        let residual = next
            .iter()
            .zip(&v)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max);
        v = next;
        if residual < tol {
            break;
        }
    }

    let mut values = ValueVector { v };
    let mut policy = greedy_policy(mdp, &values);
    for _ in 0..(n * mdp.n_actions() + 1) {
        let evaluated = policy_evaluation(mdp, &policy)?;
        let improved = greedy_policy(mdp, &evaluated);
        values = evaluated;
        if improved == policy {
            break;
        }
        policy = improved;
    }
    Ok(values)
}

/// Discounted state visitation `ρ` solving `ρ = μ + γ (P^π)ᵀ ρ`.
pub fn state_occupancy<T: Scalar>(mdp: &TabularMdp<T>, pi: &TabularPolicy<T>) -> Result<Vec<T>> {
    check_policy(mdp, pi)?;
    let n = mdp.n_states();
    let (p, _) = policy_kernel(mdp, pi);
    let gamma = mdp.discount();
    let mut a = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            let eye = if i == j { T::one() } else { T::zero() };
            a[i * n + j] = eye - gamma * p[j * n + i];
        }
    }
    linalg::solve(&a, mdp.initial()).ok_or(Error::Singular("state occupancy"))
}

/// `d(s, a) = π(a|s) ρ(s)`.
pub fn occupancy_of<T: Scalar>(
    mdp: &TabularMdp<T>,
    pi: &TabularPolicy<T>,
) -> Result<OccupancyMeasure<T>> {
    let rho = state_occupancy(mdp, pi)?;
    let na = mdp.n_actions();
    let d = (0..mdp.n_states() * na)
        .map(|i| (pi.prob(i / na, i % na) * rho[i / na]).max(T::zero()))
        .collect();
    OccupancyMeasure::new(mdp.n_states(), na, d)
}

/// Normalises each state's occupancy row; rows without mass become uniform.
pub fn policy_from_occupancy<T: Scalar>(d: &OccupancyMeasure<T>) -> Result<TabularPolicy<T>> {
    let (ns, na) = (d.n_states(), d.n_actions());
    let uniform = T::one() / T::from_count(na);
    let mut pi = Vec::with_capacity(ns * na);
    for s in 0..ns {
        let row = d.row(s);
        if row.iter().any(|&x| x < T::zero()) {
            return Err(Error::InvalidArgument(format!(
                "negative occupancy in state {s}"
            )));
        }
        let mass: T = row.iter().copied().sum();
        if mass > T::zero() {
            pi.extend(row.iter().map(|&x| x / mass));
        } else {
            pi.extend(std::iter::repeat_n(uniform, na));
        }
    }
    TabularPolicy::new(ns, na, pi)
}

/// `A(s, a) = Σ_{s'} P(s'|s,a)(r(s,a,s') + γ v(s')) − v(s)`.
pub fn advantage_exact<T: Scalar>(
    mdp: &TabularMdp<T>,
    v: &ValueVector<T>,
) -> Result<AdvantageTable<T>> {
    if v.v.len() != mdp.n_states() {
        return Err(Error::Dimension {
            expected: mdp.n_states(),
            got: v.v.len(),
        });
    }
    let na = mdp.n_actions();
    let a = (0..mdp.n_states() * na)
        .map(|i| backup(mdp, &v.v, i / na, i % na) - v.v[i / na])
        .collect();
    Ok(AdvantageTable { n_actions: na, a })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{random_mdp, RandomMdpSpec};

    fn single_state(rewards: &[f64], gamma: f64) -> TabularMdp<f64> {
        let na = rewards.len();
        TabularMdp::new(1, na, vec![1.0; na], rewards.to_vec(), vec![1.0], gamma).unwrap()
    }

    fn chain(gamma: f64) -> TabularMdp<f64> {
        // s0 -> s1 -> s1, reward 1 whenever leaving s1
        TabularMdp::new(
            2,
            1,
            vec![0.0, 1.0, 0.0, 1.0],
            vec![0.0, 0.0, 1.0, 1.0],
            vec![1.0, 0.0],
            gamma,
        )
        .unwrap()
    }

    /// Bellman backups from zero, independent of the linear solve.
    fn iterate_values(mdp: &TabularMdp<f64>, pi: &TabularPolicy<f64>, iters: usize) -> Vec<f64> {
        let n = mdp.n_states();
        let mut v = vec![0.0; n];
        for _ in 0..iters {
            v = (0..n)
                .map(|s| {
                    let mut acc = 0.0;
                    for a in 0..mdp.n_actions() {
                        for t in 0..n {
                            acc += pi.prob(s, a)
                                * mdp.p(s, a, t)
                                * (mdp.r(s, a, t) + mdp.discount() * v[t]);
                        }
                    }
                    acc
                })
                .collect();
        }
        v
    }

    #[test]
    fn single_state_geometric_series() {
        let mdp = single_state(&[1.0], 0.9);
        let v = policy_evaluation(&mdp, &TabularPolicy::uniform(1, 1)).unwrap();
        assert!((v.v[0] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn two_state_chain_by_hand() {
        let mdp = chain(0.5);
        let v = policy_evaluation(&mdp, &TabularPolicy::uniform(2, 1)).unwrap();
        assert!((v.v[1] - 2.0).abs() < 1e-12);
        assert!((v.v[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn evaluation_matches_fixed_point_iteration() {
        let mdp = random_mdp::<f64>(&RandomMdpSpec::new(5, 3), 3).unwrap();
        let pi = TabularPolicy::uniform(5, 3);
        let v = policy_evaluation(&mdp, &pi).unwrap();
        let oracle = iterate_values(&mdp, &pi, 10_000);
        for (a, b) in v.v.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-8);
        }
        // Bellman residual
        let again = iterate_values_from(&mdp, &pi, &v.v);
        for (a, b) in v.v.iter().zip(&again) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    fn iterate_values_from(mdp: &TabularMdp<f64>, pi: &TabularPolicy<f64>, v: &[f64]) -> Vec<f64> {
        (0..mdp.n_states())
            .map(|s| {
                (0..mdp.n_actions())
                    .map(|a| pi.prob(s, a) * backup(mdp, v, s, a))
                    .sum()
            })
            .collect()
    }

    #[test]
    fn lp_best_action_geometric_series() {
        let v = solve_primal_lp(&single_state(&[0.0, 1.0], 0.9)).unwrap();
        assert!((v.v[0] - 10.0).abs() < 1e-10);
    }

    #[test]
    fn lp_with_dominant_action_equals_its_evaluation() {
        // action 1 pays +1 more than action 0 everywhere with identical dynamics
        let base = random_mdp::<f64>(&RandomMdpSpec::new(4, 1), 8).unwrap();
        let mut transition = Vec::new();
        let mut reward = Vec::new();
        for s in 0..4 {
            for a in 0..2 {
                transition.extend_from_slice(base.next_dist(s, 0));
                reward.extend((0..4).map(|t| base.r(s, 0, t) + a as f64));
            }
        }
        let mdp = TabularMdp::new(4, 2, transition, reward, base.initial().to_vec(), 0.9).unwrap();
        let v = solve_primal_lp(&mdp).unwrap();
        let dominant = policy_evaluation(&mdp, &TabularPolicy::deterministic(2, &[1; 4])).unwrap();
        assert!(v.max_abs_diff(&dominant) < 1e-10);
    }

    #[test]
    fn lp_satisfies_its_constraints() {
        let mdp = random_mdp::<f64>(&RandomMdpSpec::new(4, 3), 21).unwrap();
        let v = solve_primal_lp(&mdp).unwrap();
        for s in 0..4 {
            for a in 0..3 {
                assert!(v.v[s] >= backup(&mdp, &v.v, s, a) - 1e-10);
            }
        }
    }

    #[test]
    fn occupancy_single_state_total_mass() {
        let mdp = single_state(&[0.0, 1.0], 0.9);
        let pi = TabularPolicy::new(1, 2, vec![0.25, 0.75]).unwrap();
        let d = occupancy_of(&mdp, &pi).unwrap();
        assert!((d.total_mass() - 10.0).abs() < 1e-10);
        assert!((d.get(0, 0) - 2.5).abs() < 1e-10);
        assert!((d.get(0, 1) - 7.5).abs() < 1e-10);
    }

    #[test]
    fn occupancy_absorbing_chain() {
        let gamma = 0.8;
        let d = occupancy_of(&chain(gamma), &TabularPolicy::uniform(2, 1)).unwrap();
        assert!((d.get(0, 0) - 1.0).abs() < 1e-12);
        assert!((d.get(1, 0) - gamma / (1.0 - gamma)).abs() < 1e-12);
    }

    #[test]
    fn policy_from_occupancy_normalises() {
        let d = OccupancyMeasure::new(2, 2, vec![0.3_f64, 0.1, 0.0, 2.0]).unwrap();
        let pi = policy_from_occupancy(&d).unwrap();
        assert!((pi.prob(0, 0) - 0.75).abs() < 1e-15);
        assert!((pi.prob(0, 1) - 0.25).abs() < 1e-15);
        assert_eq!(pi.row(1), &[0.0, 1.0]);
    }

    #[test]
    fn zero_mass_state_maps_to_uniform() {
        let d = OccupancyMeasure::new(2, 3, vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let pi = policy_from_occupancy(&d).unwrap();
        assert_eq!(pi.row(0), &[1.0 / 3.0; 3]);
    }

    #[test]
    fn negative_occupancy_rejected() {
        assert!(OccupancyMeasure::new(1, 2, vec![0.5, -0.1]).is_err());
    }

    #[test]
    fn round_trip_recovers_policy() {
        let mdp = random_mdp::<f64>(&RandomMdpSpec::new(5, 3), 4).unwrap();
        let pi = TabularPolicy::new(
            5,
            3,
            (0..5)
                .flat_map(|s| {
                    let w = [1.0 + s as f64, 2.0, 0.5 * s as f64 + 0.1];
                    let z: f64 = w.iter().sum();
                    w.map(|x| x / z)
                })
                .collect(),
        )
        .unwrap();
        let back = policy_from_occupancy(&occupancy_of(&mdp, &pi).unwrap()).unwrap();
        for s in 0..5 {
            for a in 0..3 {
                assert!((back.prob(s, a) - pi.prob(s, a)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn advantage_identities() {
        let mdp = random_mdp::<f64>(&RandomMdpSpec::new(5, 3), 17).unwrap();
        let pi = TabularPolicy::new(5, 3, [0.2, 0.3, 0.5].repeat(5)).unwrap();
        let v = policy_evaluation(&mdp, &pi).unwrap();
        let adv = advantage_exact(&mdp, &v).unwrap();
        for s in 0..5 {
            let mean: f64 = (0..3).map(|a| pi.prob(s, a) * adv.get(s, a)).sum();
            assert!(mean.abs() < 1e-10);
        }
        let v_star = solve_primal_lp(&mdp).unwrap();
        let adv = advantage_exact(&mdp, &v_star).unwrap();
        for s in 0..5 {
            let max = adv.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert!(max.abs() < 1e-8);
        }
    }

    #[test]
    fn advantage_matches_triple_loop() {
        let mdp = random_mdp::<f64>(&RandomMdpSpec::new(4, 2), 99).unwrap();
        let v = ValueVector {
            v: vec![0.3, -1.2, 4.0, 0.0],
        };
        let adv = advantage_exact(&mdp, &v).unwrap();
        for s in 0..4 {
            for a in 0..2 {
                let mut q = 0.0;
                for t in 0..4 {
                    q += mdp.p(s, a, t) * (mdp.r(s, a, t) + 0.9 * v.v[t]);
                }
                assert_eq!(adv.get(s, a), q - v.v[s]);
            }
        }
    }

    #[test]
    fn advantage_rejects_wrong_length() {
        let mdp = chain(0.9);
        assert!(advantage_exact(&mdp, &ValueVector { v: vec![0.0] }).is_err());
    }
}
