use rand::Rng as _;

use crate::error::Result;
use crate::rng::{derive_seed, rng_from, Rng};
use crate::scalar::Scalar;

use super::{TabularMdp, TabularTaskFamily};

/// Shape and ranges for randomly generated MDPs.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomMdpSpec {
    pub n_states: usize,
    pub n_actions: usize,
    pub discount: f64,
    /// Rewards are drawn uniformly from `[0, reward_scale)`.
    pub reward_scale: f64,
}

impl RandomMdpSpec {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            discount: 0.9,
            reward_scale: 1.0,
        }
    }
}

/// Flat Dirichlet(1) draw via normalised exponentials.
fn simplex<T: Scalar>(rng: &mut Rng, n: usize, floor: f64) -> Vec<T> {
    let raw: Vec<T> = (0..n)
        .map(|_| {
            let u: f64 = rng.random::<f64>();
            T::lit(-(1.0 - u).ln() + floor)
        })
        .collect();
    let total: T = raw.iter().copied().sum();
    raw.into_iter().map(|x| x / total).collect()
}

fn random_kernel<T: Scalar>(rng: &mut Rng, spec: &RandomMdpSpec) -> Vec<T> {
    (0..spec.n_states * spec.n_actions)
        .flat_map(|_| simplex::<T>(rng, spec.n_states, 0.0))
        .collect()
}

/// One random MDP with strictly positive initial distribution.
pub fn random_mdp<T: Scalar>(spec: &RandomMdpSpec, seed: u64) -> Result<TabularMdp<T>> {
    let fam = random_family(spec, 1, seed)?;
    Ok(fam.tasks()[0].clone())
}

/// `n_tasks` MDPs sharing reward, initial distribution and discount, each
/// with an independently drawn kernel. Deterministic in `seed`.
pub fn random_family<T: Scalar>(
    spec: &RandomMdpSpec,
    n_tasks: usize,
    seed: u64,
) -> Result<TabularTaskFamily<T>> {
    let mut shared = rng_from(derive_seed(seed, 0, 0));
    let cube = spec.n_states * spec.n_actions * spec.n_states;
    let reward: Vec<T> = (0..cube)
        .map(|_| T::lit(shared.random::<f64>() * spec.reward_scale))
        .collect();
    let initial = simplex::<T>(&mut shared, spec.n_states, 0.05);
    let tasks = (0..n_tasks)
        .map(|k| {
            let mut rng = rng_from(derive_seed(seed, 1, k as u64));
            TabularMdp::new(
                spec.n_states,
                spec.n_actions,
                random_kernel(&mut rng, spec),
                reward.clone(),
                initial.clone(),
                T::lit(spec.discount),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    TabularTaskFamily::new(tasks)
}
