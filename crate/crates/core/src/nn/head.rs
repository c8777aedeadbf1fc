//! Output heads: value readout, squashed-mean Gaussian, softmax categorical.
//!
//! Gradient helpers return derivatives with respect to the final affine
//! layer's output `z`, ready for [`super::Network::backward`].

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicyOutput<T> {
    pub mean: Vec<T>,
    pub std: Vec<T>,
    /// `tanh` of the mean pre-activation.
    pub(crate) squash: Vec<T>,
    /// `(high − low) / 2` per dimension.
    pub(crate) half_range: Vec<T>,
    /// Std pre-activation.
    pub(crate) std_pre: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalOutput<T> {
    pub logits: Vec<T>,
    pub probs: Vec<T>,
    pub log_probs: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum HeadOutput<T> {
    Value(Vec<T>),
    Gaussian(GaussianPolicyOutput<T>),
    Categorical(CategoricalOutput<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ActionSample<T> {
    Continuous(Vec<T>),
    Discrete(usize),
}

pub(crate) fn softplus<T: Scalar>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl<T: Scalar> GaussianPolicyOutput<T> {
    pub(crate) fn from_raw(z: &[T], low: &[f64], high: &[f64], std_floor: f64) -> Self {
        let d = low.len();
        let half_range: Vec<T> = low
            .iter()
            .zip(high)
            .map(|(l, h)| T::lit((h - l) / 2.0))
            .collect();
        let squash: Vec<T> = z[..d].iter().map(|x| x.tanh()).collect();
        let mean = squash
            .iter()
            .zip(&half_range)
            .zip(low.iter().zip(high))
            .map(|((&t, &h), (l, hi))| T::lit((l + hi) / 2.0) + h * t)
            .collect();
        let std_pre = z[d..].to_vec();
        let std = std_pre
            .iter()
            .map(|&x| softplus(x) + T::lit(std_floor))
            .collect();
        Self {
            mean,
            std,
            squash,
            half_range,
            std_pre,
        }
    }
}

impl<T: Scalar> CategoricalOutput<T> {
    pub(crate) fn from_logits(z: &[T]) -> Self {
        let max = z.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = max + z.iter().map(|&x| (x - max).exp()).sum::<T>().ln();
        let log_probs: Vec<T> = z.iter().map(|&x| x - lse).collect();
        let probs = log_probs.iter().map(|x| x.exp()).collect();
        Self {
            logits: z.to_vec(),
            probs,
            log_probs,
        }
    }
}

const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_8;

fn gaussian_action<'a, T: Scalar>(
    g: &GaussianPolicyOutput<T>,
    action: &'a ActionSample<T>,
) -> Result<&'a [T]> {
    match action {
        ActionSample::Continuous(a) if a.len() == g.mean.len() => Ok(a),
        ActionSample::Continuous(a) => Err(Error::Dimension {
            expected: g.mean.len(),
            got: a.len(),
        }),
        ActionSample::Discrete(_) => Err(Error::InvalidArgument(
            "discrete action for a gaussian head".into(),
        )),
    }
}

fn categorical_action<T: Scalar>(
    c: &CategoricalOutput<T>,
    action: &ActionSample<T>,
) -> Result<usize> {
    match action {
        ActionSample::Discrete(i) if *i < c.probs.len() => Ok(*i),
        ActionSample::Discrete(i) => {
            Err(Error::InvalidArgument(format!("action {i} out of range")))
        }
        ActionSample::Continuous(_) => Err(Error::InvalidArgument(
            "continuous action for a categorical head".into(),
        )),
    }
}

/// `log π(a|s)`; Gaussian densities are evaluated at the unclipped sample.
pub fn log_prob<T: Scalar>(head: &HeadOutput<T>, action: &ActionSample<T>) -> Result<T> {
    match head {
        HeadOutput::Gaussian(g) => {
            let a = gaussian_action(g, action)?;
            Ok(a.iter()
                .zip(g.mean.iter().zip(&g.std))
                .map(|(&x, (&m, &s))| {
                    let u = (x - m) / s;
                    -T::lit(0.5) * u * u - s.ln() - T::lit(HALF_LN_TWO_PI)
                })
                .sum())
        }
        HeadOutput::Categorical(c) => Ok(c.log_probs[categorical_action(c, action)?]),
        HeadOutput::Value(_) => Err(Error::InvalidArgument(
            "value head has no action density".into(),
        )),
    }
}

/// `∂ log π(a|s) / ∂z`.
pub fn log_prob_grad<T: Scalar>(head: &HeadOutput<T>, action: &ActionSample<T>) -> Result<Vec<T>> {
    match head {
        HeadOutput::Gaussian(g) => {
            let a = gaussian_action(g, action)?;
            let d = a.len();
            let mut dz = vec![T::zero(); 2 * d];
            for i in 0..d {
                let (m, s) = (g.mean[i], g.std[i]);
                let diff = a[i] - m;
                let d_mean = diff / (s * s);
                let d_std = diff * diff / (s * s * s) - T::one() / s;
                dz[i] = d_mean * g.half_range[i] * (T::one() - g.squash[i] * g.squash[i]);
                dz[d + i] = d_std * sigmoid(g.std_pre[i]);
            }
            Ok(dz)
        }
        HeadOutput::Categorical(c) => {
            let k = categorical_action(c, action)?;
            Ok(c.probs
                .iter()
                .enumerate()
                .map(|(j, &p)| if j == k { T::one() - p } else { -p })
                .collect())
        }
        HeadOutput::Value(_) => Err(Error::InvalidArgument(
            "value head has no action density".into(),
        )),
    }
}

/// Closed-form differential (Gaussian) or Shannon (categorical) entropy.
pub fn entropy<T: Scalar>(head: &HeadOutput<T>) -> Result<T> {
    match head {
        HeadOutput::Gaussian(g) => Ok(g
            .std
            .iter()
            .map(|&s| T::lit(0.5) + T::lit(HALF_LN_TWO_PI) + s.ln())
            .sum()),
        HeadOutput::Categorical(c) => Ok(-c
            .probs
            .iter()
            .zip(&c.log_probs)
            .filter(|(&p, _)| p > T::zero())
            .map(|(&p, &lp)| p * lp)
            .sum::<T>()),
        HeadOutput::Value(_) => Err(Error::InvalidArgument("value head has no entropy".into())),
    }
}

/// `∂H / ∂z`.
pub fn entropy_grad<T: Scalar>(head: &HeadOutput<T>) -> Result<Vec<T>> {
    match head {
        HeadOutput::Gaussian(g) => {
            let d = g.std.len();
            let mut dz = vec![T::zero(); 2 * d];
            for i in 0..d {
                dz[d + i] = sigmoid(g.std_pre[i]) / g.std[i];
            }
            Ok(dz)
        }
        HeadOutput::Categorical(c) => {
            let h = entropy(head)?;
            Ok(c.probs
                .iter()
                .zip(&c.log_probs)
                .map(|(&p, &lp)| {
                    if p > T::zero() {
                        -p * (lp + h)
                    } else {
                        T::zero()
                    }
                })
                .collect())
        }
        HeadOutput::Value(_) => Err(Error::InvalidArgument("value head has no entropy".into())),
    }
}

/// Draws an action and its log-probability. Gaussian samples are returned
/// unclipped; clipping to the action bounds is the environment's job.
pub fn sample_action<T: Scalar>(
    head: &HeadOutput<T>,
    rng: &mut Rng,
) -> Result<(ActionSample<T>, T)> {
    let action = match head {
        HeadOutput::Gaussian(g) => ActionSample::Continuous(
            g.mean
                .iter()
                .zip(&g.std)
                .map(|(&m, &s)| {
                    let eps: f64 = rng.sample(StandardNormal);
                    m + s * T::lit(eps)
                })
                .collect(),
        ),
        HeadOutput::Categorical(c) => {
            let u = T::lit(rng.random::<f64>());
            let mut acc = T::zero();
            let mut chosen = c.probs.len() - 1;
            for (i, &p) in c.probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    chosen = i;
                    break;
                }
            }
            // guard against rounding landing on a zero-probability tail
            while c.probs[chosen] == T::zero() && chosen > 0 {
                chosen -= 1;
            }
            ActionSample::Discrete(chosen)
        }
        HeadOutput::Value(_) => {
            return Err(Error::InvalidArgument(
                "cannot sample from a value head".into(),
            ))
        }
    };
    let lp = log_prob(head, &action)?;
    Ok((action, lp))
}

/// Mode of the policy: the mean, or the most likely index.
pub fn greedy_action<T: Scalar>(head: &HeadOutput<T>) -> Result<ActionSample<T>> {
    match head {
        HeadOutput::Gaussian(g) => Ok(ActionSample::Continuous(g.mean.clone())),
        HeadOutput::Categorical(c) => {
            let mut best = 0;
            for (i, &p) in c.probs.iter().enumerate() {
                if p > c.probs[best] {
                    best = i;
                }
            }
            Ok(ActionSample::Discrete(best))
        }
        HeadOutput::Value(_) => Err(Error::InvalidArgument("value head has no actions".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;

    fn gaussian(mean_pre: f64, std_pre: f64, floor: f64) -> HeadOutput<f64> {
        HeadOutput::Gaussian(GaussianPolicyOutput::from_raw(
            &[mean_pre, std_pre],
            &[-2.0],
            &[2.0],
            floor,
        ))
    }

    #[test]
    fn uniform_categorical_entropy_is_ln_k() {
        let head = HeadOutput::Categorical(CategoricalOutput::from_logits(&[0.0_f64; 3]));
        assert!((entropy(&head).unwrap() - 3.0_f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn peaked_categorical_entropy_vanishes() {
        let head = HeadOutput::Categorical(CategoricalOutput::from_logits(&[60.0_f64, 0.0, 0.0]));
        assert!(entropy(&head).unwrap() < 1e-20);
    }

    #[test]
    fn unit_gaussian_entropy() {
        let mut g = GaussianPolicyOutput::from_raw(&[0.0, 0.0], &[-1.0], &[1.0], 1e-3);
        g.std = vec![1.0_f64];
        let h = entropy(&HeadOutput::Gaussian(g)).unwrap();
        assert!((h - 1.418_938_533_204_672_7).abs() < 1e-12);
        assert!((h - 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln()).abs() < 1e-12);
    }

    #[test]
    fn certain_categorical_always_picks_first() {
        let c = CategoricalOutput {
            logits: vec![0.0; 3],
            probs: vec![1.0_f64, 0.0, 0.0],
            log_probs: vec![0.0, f64::NEG_INFINITY, f64::NEG_INFINITY],
        };
        let head = HeadOutput::Categorical(c);
        let mut rng = rng_from(1);
        for _ in 0..1000 {
            let (a, lp) = sample_action(&head, &mut rng).unwrap();
            assert_eq!(a, ActionSample::Discrete(0));
            assert_eq!(lp, 0.0);
        }
    }

    #[test]
    fn floored_std_concentrates_samples() {
        let head = gaussian(0.3, -60.0, 1e-3);
        let HeadOutput::Gaussian(g) = &head else {
            unreachable!()
        };
        let m = g.mean[0];
        assert!(g.std[0] >= 1e-3);
        let mut rng = rng_from(2);
        for _ in 0..10_000 {
            let (ActionSample::Continuous(a), _) = sample_action(&head, &mut rng).unwrap() else {
                unreachable!()
            };
            assert!((a[0] - m).abs() < 6.0 * 1e-3 + 1e-12);
        }
    }

    #[test]
    fn gaussian_samples_match_moments() {
        let head = gaussian(0.4, 0.2, 1e-3);
        let HeadOutput::Gaussian(g) = &head else {
            unreachable!()
        };
        let (m, s) = (g.mean[0], g.std[0]);
        let mut rng = rng_from(3);
        let n = 1_000_000;
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..n {
            let (ActionSample::Continuous(a), _) = sample_action(&head, &mut rng).unwrap() else {
                unreachable!()
            };
            sum += a[0];
            sq += a[0] * a[0];
        }
        let mean = sum / n as f64;
        let std = (sq / n as f64 - mean * mean).sqrt();
        assert!((mean - m).abs() < 0.01 * m.abs(), "{mean} vs {m}");
        assert!((std - s).abs() < 0.01 * s, "{std} vs {s}");
    }

    #[test]
    fn mean_stays_within_bounds() {
        for z in [-100.0, -1.0, 0.0, 3.0, 100.0] {
            let HeadOutput::Gaussian(g) = gaussian(z, 0.0, 1e-3) else {
                unreachable!()
            };
            assert!(g.mean[0] >= -2.0 && g.mean[0] <= 2.0);
        }
    }

    #[test]
    fn std_never_below_floor() {
        for z in [-1e6, -50.0, 0.0, 50.0] {
            let HeadOutput::Gaussian(g) = gaussian(0.0, z, 1e-3) else {
                unreachable!()
            };
            assert!(g.std[0] >= 1e-3);
        }
    }

    #[test]
    fn categorical_sampling_frequencies() {
        let head = HeadOutput::Categorical(CategoricalOutput::from_logits(&[0.0_f64, 1.0, -1.0]));
        let HeadOutput::Categorical(c) = &head else {
            unreachable!()
        };
        let mut counts = [0usize; 3];
        let mut rng = rng_from(4);
        let n = 200_000;
        for _ in 0..n {
            let (ActionSample::Discrete(i), _) = sample_action(&head, &mut rng).unwrap() else {
                unreachable!()
            };
            counts[i] += 1;
        }
        for i in 0..3 {
            assert!((counts[i] as f64 / n as f64 - c.probs[i]).abs() < 0.005);
        }
    }

    #[test]
    fn value_head_has_no_policy() {
        let head = HeadOutput::Value(vec![1.0_f64]);
        assert!(entropy(&head).is_err());
        assert!(sample_action(&head, &mut rng_from(0)).is_err());
    }
}
