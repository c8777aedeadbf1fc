use std::sync::Arc;

use diffac::network::{
    build_topology, combine, consensus_rounds, disagreement_norm, hastings_weights,
    realised_matrix, LinkFailureModel, TopologyKind,
};
use diffac::nn::{Activation, Layout, NetworkSpec, ParamVector};
use diffac::rng::rng_from;
use proptest::prelude::*;
use rand::Rng as _;

fn random_topology(n: usize, extra: f64, seed: u64) -> diffac::network::Topology {
    let max_deg = n as f64;
    let deg = (3.0 - 2.0 / n as f64 + extra * (max_deg - 3.0)).clamp(3.0 - 2.0 / n as f64, max_deg);
    build_topology(TopologyKind::RandomConnected, n, deg, seed).unwrap()
}

fn random_params(n: usize, seed: u64) -> Vec<ParamVector<f64>> {
    let layout = Arc::new(Layout::from_spec(&NetworkSpec::value(
        3,
        vec![4],
        Activation::Tanh,
    )));
    let mut rng = rng_from(seed);
    (0..n)
        .map(|_| {
            let v = (0..layout.len())
                .map(|_| rng.random::<f64>() * 10.0 - 5.0)
                .collect();
            ParamVector::from_values(layout.clone(), v).unwrap()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn connected_graphs_contract(n in 3usize..=30, extra in 0.0f64..0.5, seed in any::<u64>()) {
        let t = random_topology(n, extra, seed);
        let c = hastings_weights(&t);
        prop_assert!(c.validate().is_ok());
        prop_assert!(c.is_primitive());
        prop_assert!(c.contraction_factor() < 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn combine_conserves_mass(n in 2usize..=15, extra in 0.0f64..1.0, seed in any::<u64>()) {
        let t = random_topology(n.max(3), extra, seed);
        let c = hastings_weights(&t);
        let x = random_params(t.n_agents(), seed ^ 1);
        let y = combine(&x, &c, None).unwrap();
        for i in 0..x[0].len() {
            let before: f64 = x.iter().map(|p| p.values()[i]).sum();
            let after: f64 = y.iter().map(|p| p.values()[i]).sum();
            prop_assert!((before - after).abs() < 1e-10);
        }
    }

    #[test]
    fn realised_matrices_stay_stochastic(
        n in 3usize..=20,
        extra in 0.0f64..1.0,
        p in 0.0f64..0.99,
        seed in any::<u64>(),
        round in any::<u64>(),
    ) {
        let t = random_topology(n, extra, seed);
        let c = hastings_weights(&t);
        let mask = LinkFailureModel::new(p).unwrap().realise(&t, seed, round);
        let m = realised_matrix(&c, &mask);
        for k in 0..n {
            let s: f64 = (0..n).map(|l| m[l * n + k]).sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            prop_assert!(m[k * n + k] > 0.0);
            prop_assert!((0..n).all(|l| m[l * n + k] >= 0.0));
        }
    }

    #[test]
    fn repeated_combination_reaches_consensus(n in 3usize..=12, extra in 0.0f64..1.0, seed in any::<u64>()) {
        let t = random_topology(n, extra, seed);
        let c = hastings_weights(&t);
        let mut x = random_params(n, seed);
        let d0 = disagreement_norm(&x).unwrap();
        let eps = 1e-8;
        let rounds = consensus_rounds(c.contraction_factor(), eps / d0) + 10;
        for _ in 0..rounds {
            x = combine(&x, &c, None).unwrap();
        }
        prop_assert!(disagreement_norm(&x).unwrap() < eps);
    }
}
