use diffac::nn::{
    sample_action, Activation, HeadKind, Network, NetworkSpec, Objective, ParamVector, TensorRole,
};
use diffac::rng::rng_from;
use diffac::Scalar;
use proptest::prelude::*;
use rand::Rng as _;

fn spec_for(
    head: u8,
    input: usize,
    hidden: Vec<usize>,
    act: Activation,
    out: usize,
) -> NetworkSpec {
    match head {
        0 => NetworkSpec::value(input, hidden, act),
        1 => NetworkSpec::gaussian(input, hidden, act, vec![-2.0; out], vec![2.0; out]),
        _ => NetworkSpec::categorical(input, hidden, act, out + 1),
    }
}

fn min_abs_pre_activation(net: &Network, params: &ParamVector<f64>, acts: &[Vec<f64>]) -> f64 {
    let mut least = f64::INFINITY;
    for layer in 0..net.spec().hidden.len() {
        let w = params.tensor(layer, TensorRole::Weight).unwrap();
        let b = params.tensor(layer, TensorRole::Bias).unwrap();
        let x = &acts[layer];
        for (r, &bias) in b.iter().enumerate() {
            let z: f64 = bias
                + w[r * x.len()..(r + 1) * x.len()]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
            least = least.min(z.abs());
        }
    }
    least
}

/// Largest relative error between backprop and central differences.
fn fd_error<T: Scalar>(
    net: &Network,
    params: &ParamVector<T>,
    x: &[T],
    obj: &Objective<T>,
    h: f64,
) -> f64 {
    let (_, g) = net.gradient(params, x, obj).unwrap();
    let mut worst = 0.0_f64;
    for i in 0..params.len() {
        let mut plus = params.clone();
        plus.values_mut()[i] += T::lit(h);
        let mut minus = params.clone();
        minus.values_mut()[i] -= T::lit(h);
        let fp = obj
            .evaluate(&net.forward(&plus, x).unwrap().head)
            .unwrap()
            .as_f64();
        let fm = obj
            .evaluate(&net.forward(&minus, x).unwrap().head)
            .unwrap()
            .as_f64();
        let numeric = (fp - fm) / (2.0 * h);
        let analytic = g.values()[i].as_f64();
        let err = (numeric - analytic).abs() / analytic.abs().max(numeric.abs()).max(1e-3);
        worst = worst.max(err);
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn backprop_matches_finite_differences(
        head in 0u8..3,
        input in 1usize..4,
        hidden in prop::collection::vec(1usize..6, 1..3),
        tanh in any::<bool>(),
        out in 1usize..3,
        seed in any::<u64>(),
        objective in 0u8..3,
    ) {
        // Central differences straddling a ReLU kink are meaningless.
        let act = if tanh { Activation::Tanh } else { Activation::Relu };
        let net = Network::new(spec_for(head, input, hidden, act, out)).unwrap();
        let mut rng = rng_from(seed);
        let mut params = net.init_params::<f64>(&mut rng);
        for v in params.values_mut() {
            *v += 0.1 * (rng.random::<f64>() - 0.5);
        }
        let x: Vec<f64> = (0..input).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
        let fwd = net.forward(&params, &x).unwrap();
        let near_kink = !tanh && min_abs_pre_activation(&net, &params, &fwd.activations) < 1e-3;
        let obj = if head == 0 {
            Objective::Value
        } else {
            let (a, _) = sample_action(&fwd.head, &mut rng).unwrap();
            match objective {
                0 => Objective::LogProb(a),
                1 => Objective::Entropy,
                _ => Objective::ActorLoss { action: a, advantage: 0.7, entropy_coef: 0.01 },
            }
        };
        if !near_kink {
            let err = fd_error(&net, &params, &x, &obj, 1e-5);
            prop_assert!(err < 1e-4, "relative error {err}");
        }
    }
}

#[test]
fn single_precision_gradients_agree_loosely() {
    let net = Network::new(NetworkSpec::gaussian(
        2,
        vec![4],
        Activation::Tanh,
        vec![-1.0],
        vec![1.0],
    ))
    .unwrap();
    let params = net.init_params::<f32>(&mut rng_from(11));
    let obj = Objective::Entropy;
    assert!(fd_error(&net, &params, &[0.2f32, -0.4], &obj, 1e-2) < 2e-2);
}

#[test]
fn duplicated_path_matches_explicit_sum() {
    // With one hidden unit, the output is w2·tanh(w1·x + b1) + b2.
    let net = Network::new(NetworkSpec::value(2, vec![1], Activation::Tanh)).unwrap();
    let p =
        ParamVector::from_values(net.layout().clone(), vec![0.3, -0.7, 0.1, 1.9, -0.25]).unwrap();
    let x = [0.8, 0.5];
    let expected = 1.9 * (0.3 * 0.8 - 0.7 * 0.5 + 0.1_f64).tanh() - 0.25;
    let got = net.forward(&p, &x).unwrap().z[0];
    assert!((got - expected).abs() < 1e-12);
    assert!(matches!(net.spec().head, HeadKind::LinearValue));
}
