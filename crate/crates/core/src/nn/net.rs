use std::sync::Arc;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;

use super::head::{
    entropy, entropy_grad, log_prob, log_prob_grad, ActionSample, CategoricalOutput,
    GaussianPolicyOutput, HeadOutput,
};
use super::params::{Layout, ParamVector, TensorRole};
use super::{Activation, HeadKind, NetworkSpec};

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct Forward<T> {
    /// `activations[0]` is the input; `activations[l]` the output of hidden layer `l`.
    pub activations: Vec<Vec<T>>,
    /// Final affine output.
    pub z: Vec<T>,
    pub head: HeadOutput<T>,
}

/// Differentiable scalars of a head output.
#[derive(Debug, Clone, PartialEq)]
pub enum Objective<T> {
    /// Sum of the value outputs.
    Value,
    LogProb(ActionSample<T>),
    Entropy,
    /// `−log π(a|s)·advantage − entropy_coef·H(π(·|s))`.
    ActorLoss {
        action: ActionSample<T>,
        advantage: T,
        entropy_coef: T,
    },
}

impl<T: Scalar> Objective<T> {
    pub fn evaluate(&self, head: &HeadOutput<T>) -> Result<T> {
        match self {
            Objective::Value => match head {
                HeadOutput::Value(v) => Ok(v.iter().copied().sum()),
                _ => Err(Error::InvalidArgument(
                    "value objective needs a value head".into(),
                )),
            },
            Objective::LogProb(a) => log_prob(head, a),
            Objective::Entropy => entropy(head),
            Objective::ActorLoss {
                action,
                advantage,
                entropy_coef,
            } => Ok(-log_prob(head, action)? * *advantage - *entropy_coef * entropy(head)?),
        }
    }

    /// `∂ objective / ∂z`.
    pub fn head_grad(&self, head: &HeadOutput<T>) -> Result<Vec<T>> {
        match self {
            Objective::Value => match head {
                HeadOutput::Value(v) => Ok(vec![T::one(); v.len()]),
                _ => Err(Error::InvalidArgument(
                    "value objective needs a value head".into(),
                )),
            },
            Objective::LogProb(a) => log_prob_grad(head, a),
            Objective::Entropy => entropy_grad(head),
            Objective::ActorLoss {
                action,
                advantage,
                entropy_coef,
            } => {
                let lp = log_prob_grad(head, action)?;
                let h = if *entropy_coef == T::zero() {
                    vec![T::zero(); lp.len()]
                } else {
                    entropy_grad(head)?
                };
                Ok(lp
                    .iter()
                    .zip(&h)
                    .map(|(&g, &e)| -g * *advantage - *entropy_coef * e)
                    .collect())
            }
        }
    }
}

/// A network definition. Parameters are passed in explicitly so a single
/// definition can evaluate any agent's vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    layout: Arc<Layout>,
}

impl Network {
    pub fn new(spec: NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let layout = Arc::new(Layout::from_spec(&spec));
        Ok(Self { spec, layout })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    fn n_layers(&self) -> usize {
        self.spec.hidden.len() + 1
    }

    /// Uniform fan-in initialisation: He bounds for ReLU trunks, Xavier for
    /// tanh trunks, LeCun bounds on the linear output layer. Biases start at 0.
    pub fn init_params<T: Scalar>(&self, rng: &mut Rng) -> ParamVector<T> {
        let mut p = ParamVector::zeros(self.layout.clone());
        let last = self.n_layers() - 1;
        for slot in self
            .layout
            .slots()
            .iter()
            .filter(|s| s.role == TensorRole::Weight)
        {
            let (fan_in, fan_out) = (slot.cols as f64, slot.rows as f64);
            let bound = if slot.layer == last {
                (3.0 / fan_in).sqrt()
            } else {
                match self.spec.activation {
                    Activation::Relu => (6.0 / fan_in).sqrt(),
                    Activation::Tanh => (6.0 / (fan_in + fan_out)).sqrt(),
                }
            };
            for v in &mut p.values_mut()[slot.range()] {
                *v = T::lit(bound * (2.0 * rng.random::<f64>() - 1.0));
            }
        }
        p
    }

    fn check_params<T: Scalar>(&self, params: &ParamVector<T>) -> Result<()> {
        if **params.layout() != *self.layout {
            return Err(Error::LayoutMismatch(format!(
                "network expects {} parameters, got {}",
                self.layout.len(),
                params.len()
            )));
        }
        Ok(())
    }

    pub fn forward<T: Scalar>(&self, params: &ParamVector<T>, input: &[T]) -> Result<Forward<T>> {
        self.check_params(params)?;
        if input.len() != self.spec.input_dim {
            return Err(Error::Dimension {
                expected: self.spec.input_dim,
                got: input.len(),
            });
        }
        if input.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                layer: 0,
                what: "input".into(),
            });
        }
        let n_layers = self.n_layers();
        let mut activations = Vec::with_capacity(n_layers);
        activations.push(input.to_vec());
        let mut z = Vec::new();
        for layer in 0..n_layers {
            let w = params
                .tensor(layer, TensorRole::Weight)
                .expect("layout has every layer");
            let b = params
                .tensor(layer, TensorRole::Bias)
                .expect("layout has every layer");
            let x = activations.last().expect("non-empty");
            let fan_in = x.len();
            let mut out: Vec<T> = b
                .iter()
                .enumerate()
                .map(|(r, &bias)| {
                    bias + w[r * fan_in..(r + 1) * fan_in]
                        .iter()
                        .zip(x)
                        .map(|(&a, &b)| a * b)
                        .sum::<T>()
                })
                .collect();
            if out.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    layer,
                    what: "pre-activation".into(),
                });
            }
            if layer + 1 < n_layers {
                match self.spec.activation {
                    Activation::Relu => out.iter_mut().for_each(|v| *v = v.max(T::zero())),
                    Activation::Tanh => out.iter_mut().for_each(|v| *v = v.tanh()),
                }
                activations.push(out);
            } else {
                z = out;
            }
        }
        let head = match &self.spec.head {
            HeadKind::LinearValue => HeadOutput::Value(z.clone()),
            HeadKind::GaussianPolicy { low, high } => HeadOutput::Gaussian(
                GaussianPolicyOutput::from_raw(&z, low, high, self.spec.std_floor),
            ),
            HeadKind::CategoricalPolicy => {
                HeadOutput::Categorical(CategoricalOutput::from_logits(&z))
            }
        };
        Ok(Forward {
            activations,
            z,
            head,
        })
    }

    /// Accumulates `scale · ∂(dzᵀ z)/∂θ` into `grad`.
    pub fn backward_into<T: Scalar>(
        &self,
        params: &ParamVector<T>,
        fwd: &Forward<T>,
        dz: &[T],
        scale: T,
        grad: &mut ParamVector<T>,
    ) -> Result<()> {
        self.check_params(params)?;
        self.check_params(grad)?;
        if dz.len() != self.spec.final_width() {
            return Err(Error::Dimension {
                expected: self.spec.final_width(),
                got: dz.len(),
            });
        }
        let mut delta: Vec<T> = dz.iter().map(|&d| d * scale).collect();
        for layer in (0..self.n_layers()).rev() {
            if delta.iter().any(|d| !d.is_finite()) {
                return Err(Error::NonFinite {
                    layer,
                    what: "backpropagated gradient".into(),
                });
            }
            let x = &fwd.activations[layer];
            let fan_in = x.len();
            let w_slot = *self
                .layout
                .slot(layer, TensorRole::Weight)
                .expect("weight slot");
            let b_slot = *self
                .layout
                .slot(layer, TensorRole::Bias)
                .expect("bias slot");
            {
                let g = grad.values_mut();
                for (r, &d) in delta.iter().enumerate() {
                    if d == T::zero() {
                        continue;
                    }
                    let row = &mut g[w_slot.offset + r * fan_in..w_slot.offset + (r + 1) * fan_in];
                    for (gw, &xv) in row.iter_mut().zip(x) {
                        *gw += d * xv;
                    }
                    g[b_slot.offset + r] += d;
                }
            }
            if layer == 0 {
                break;
            }
            let w = &params.values()[w_slot.range()];
            let mut prev = vec![T::zero(); fan_in];
            for (r, &d) in delta.iter().enumerate() {
                if d == T::zero() {
                    continue;
                }
                for (p, &wv) in prev.iter_mut().zip(&w[r * fan_in..(r + 1) * fan_in]) {
                    *p += wv * d;
                }
            }
            match self.spec.activation {
                Activation::Relu => {
                    for (p, &a) in prev.iter_mut().zip(x) {
                        if a <= T::zero() {
                            *p = T::zero();
                        }
                    }
                }
                Activation::Tanh => {
                    for (p, &a) in prev.iter_mut().zip(x) {
                        *p *= T::one() - a * a;
                    }
                }
            }
            delta = prev;
        }
        Ok(())
    }

    pub fn backward<T: Scalar>(
        &self,
        params: &ParamVector<T>,
        fwd: &Forward<T>,
        dz: &[T],
    ) -> Result<ParamVector<T>> {
        let mut grad = ParamVector::zeros(self.layout.clone());
        self.backward_into(params, fwd, dz, T::one(), &mut grad)?;
        Ok(grad)
    }

    /// Value and parameter gradient of `objective` at `input`.
    pub fn gradient<T: Scalar>(
        &self,
        params: &ParamVector<T>,
        input: &[T],
        objective: &Objective<T>,
    ) -> Result<(T, ParamVector<T>)> {
        let fwd = self.forward(params, input)?;
        let value = objective.evaluate(&fwd.head)?;
        let dz = objective.head_grad(&fwd.head)?;
        Ok((value, self.backward(params, &fwd, &dz)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::head::sample_action;
    use crate::rng::rng_from;

    fn value_net() -> Network {
        Network::new(NetworkSpec::value(3, vec![5, 4], Activation::Tanh)).unwrap()
    }

    #[test]
    fn zero_params_value_is_zero() {
        let net = value_net();
        let p = ParamVector::<f64>::zeros(net.layout().clone());
        let f = net.forward(&p, &[1.0, -2.0, 0.5]).unwrap();
        assert_eq!(f.head, HeadOutput::Value(vec![0.0]));
    }

    #[test]
    fn zero_params_categorical_is_uniform() {
        let net = Network::new(NetworkSpec::categorical(2, vec![3], Activation::Relu, 4)).unwrap();
        let p = ParamVector::<f64>::zeros(net.layout().clone());
        let HeadOutput::Categorical(c) = net.forward(&p, &[0.3, 0.1]).unwrap().head else {
            unreachable!()
        };
        for prob in c.probs {
            assert!((prob - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn value_gradient_wrt_final_bias_is_one() {
        let net = value_net();
        let p = net.init_params::<f64>(&mut rng_from(0));
        let (_, g) = net
            .gradient(&p, &[0.1, 0.2, 0.3], &Objective::Value)
            .unwrap();
        assert_eq!(g.tensor(2, TensorRole::Bias).unwrap(), &[1.0]);
    }

    #[test]
    fn expected_score_vanishes_in_logit_layer() {
        let net = Network::new(NetworkSpec::categorical(3, vec![6], Activation::Tanh, 4)).unwrap();
        let p = net.init_params::<f64>(&mut rng_from(5));
        let x = [0.4, -0.3, 1.1];
        let fwd = net.forward(&p, &x).unwrap();
        let HeadOutput::Categorical(c) = &fwd.head else {
            unreachable!()
        };
        let mut total = ParamVector::zeros(net.layout().clone());
        for a in 0..4 {
            let dz = log_prob_grad(&fwd.head, &ActionSample::Discrete(a)).unwrap();
            net.backward_into(&p, &fwd, &dz, c.probs[a], &mut total)
                .unwrap();
        }
        for slot in net.layout().slots().iter().filter(|s| s.layer == 1) {
            for &v in &total.values()[slot.range()] {
                assert!(v.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn wrong_input_rejected() {
        let net = value_net();
        let p = ParamVector::<f64>::zeros(net.layout().clone());
        assert!(matches!(
            net.forward(&p, &[1.0]),
            Err(Error::Dimension { .. })
        ));
        assert!(matches!(
            net.forward(&p, &[1.0, f64::NAN, 0.0]),
            Err(Error::NonFinite { layer: 0, .. })
        ));
    }

    #[test]
    fn overflow_reports_layer() {
        let net = value_net();
        let mut p = ParamVector::<f64>::zeros(net.layout().clone());
        p.values_mut().iter_mut().for_each(|v| *v = 1e308);
        match net.forward(&p, &[1e308, 1e308, 1e308]) {
            Err(Error::NonFinite { layer, .. }) => assert_eq!(layer, 0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn identical_params_identical_outputs() {
        let a = Network::new(NetworkSpec::gaussian(
            3,
            vec![8],
            Activation::Relu,
            vec![-2.0],
            vec![2.0],
        ))
        .unwrap();
        let b = Network::new(a.spec().clone()).unwrap();
        let p = a.init_params::<f64>(&mut rng_from(9));
        let q = ParamVector::from_values(b.layout().clone(), p.values().to_vec()).unwrap();
        let x = [0.2, 0.9, -1.0];
        assert_eq!(
            a.forward(&p, &x).unwrap().head,
            b.forward(&q, &x).unwrap().head
        );
    }

    #[test]
    fn single_precision_forward() {
        let net = Network::new(NetworkSpec::gaussian(
            3,
            vec![8],
            Activation::Tanh,
            vec![-2.0],
            vec![2.0],
        ))
        .unwrap();
        let p = net.init_params::<f32>(&mut rng_from(1));
        let fwd = net.forward(&p, &[0.1f32, 0.2, 0.3]).unwrap();
        let (a, lp) = sample_action(&fwd.head, &mut rng_from(2)).unwrap();
        assert!(lp.is_finite());
        assert!(matches!(a, ActionSample::Continuous(_)));
    }
}
