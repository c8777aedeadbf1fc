//! Per-agent first-order optimisers. Gradients are in descent convention:
//! every update moves parameters against `grad`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::ParamVector;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimiserKind {
    Sgd,
    Adam {
        #[serde(default = "adam_beta1")]
        beta1: f64,
        #[serde(default = "adam_beta2")]
        beta2: f64,
        #[serde(default = "adam_eps")]
        eps: f64,
    },
    #[serde(rename = "rmsprop")]
    RmsProp {
        #[serde(default = "rms_alpha")]
        alpha: f64,
        #[serde(default = "rms_eps")]
        eps: f64,
    },
}

fn adam_beta1() -> f64 {
    0.9
}
fn adam_beta2() -> f64 {
    0.999
}
fn adam_eps() -> f64 {
    1e-8
}
fn rms_alpha() -> f64 {
    0.99
}
fn rms_eps() -> f64 {
    1e-5
}

impl OptimiserKind {
    pub fn adam() -> Self {
        OptimiserKind::Adam {
            beta1: adam_beta1(),
            beta2: adam_beta2(),
            eps: adam_eps(),
        }
    }

    pub fn rmsprop() -> Self {
        OptimiserKind::RmsProp {
            alpha: rms_alpha(),
            eps: rms_eps(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            OptimiserKind::Sgd => true,
            OptimiserKind::Adam { beta1, beta2, eps } => {
                (0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && eps > 0.0
            }
            OptimiserKind::RmsProp { alpha, eps } => (0.0..1.0).contains(&alpha) && eps > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid optimiser hyperparameters {self:?}"
            )))
        }
    }
}

/// Learning rate as a function of the update count `t` (starting at 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "schedule", rename_all = "snake_case")]
pub enum StepSize {
    Constant {
        lr: f64,
    },
    /// `lr / (1 + decay·t)`: square-summable but not summable.
    Diminishing {
        lr: f64,
        decay: f64,
    },
}

impl StepSize {
    pub fn at(&self, t: u64) -> f64 {
        match *self {
            StepSize::Constant { lr } => lr,
            StepSize::Diminishing { lr, decay } => lr / (1.0 + decay * t as f64),
        }
    }

    pub fn initial(&self) -> f64 {
        self.at(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimiserConfig {
    #[serde(flatten)]
    pub kind: OptimiserKind,
    #[serde(flatten)]
    pub step: StepSize,
}

impl OptimiserConfig {
    pub fn sgd(lr: f64) -> Self {
        Self {
            kind: OptimiserKind::Sgd,
            step: StepSize::Constant { lr },
        }
    }

    pub fn adam(lr: f64) -> Self {
        Self {
            kind: OptimiserKind::adam(),
            step: StepSize::Constant { lr },
        }
    }

    pub fn rmsprop(lr: f64) -> Self {
        Self {
            kind: OptimiserKind::rmsprop(),
            step: StepSize::Constant { lr },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.kind.validate()?;
        let lr = self.step.initial();
        let decay_ok = match self.step {
            StepSize::Diminishing { decay, .. } => decay >= 0.0,
            StepSize::Constant { .. } => true,
        };
        if !(lr >= 0.0 && lr.is_finite() && decay_ok) {
            return Err(Error::Config(format!("invalid step size {:?}", self.step)));
        }
        Ok(())
    }
}

/// Moments and step count of one optimiser on one network.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimiserState<T> {
    kind: OptimiserKind,
    step: u64,
    first: Vec<T>,
    second: Vec<T>,
}

impl<T: Scalar> OptimiserState<T> {
    pub fn new(kind: OptimiserKind, n_params: usize) -> Self {
        let (n1, n2) = match kind {
            OptimiserKind::Sgd => (0, 0),
            OptimiserKind::Adam { .. } => (n_params, n_params),
            OptimiserKind::RmsProp { .. } => (0, n_params),
        };
        Self {
            kind,
            step: 0,
            first: vec![T::zero(); n1],
            second: vec![T::zero(); n2],
        }
    }

    pub fn kind(&self) -> OptimiserKind {
        self.kind
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[T] {
        &self.first
    }

    pub fn second_moment(&self) -> &[T] {
        &self.second
    }

    /// Replaces the moments with a convex combination of other states' moments.
    pub fn set_moments_from(&mut self, others: &[(&OptimiserState<T>, T)]) -> Result<()> {
        for (o, _) in others {
            if o.first.len() != self.first.len() || o.second.len() != self.second.len() {
                return Err(Error::LayoutMismatch(
                    "optimiser moments of different sizes".into(),
                ));
            }
        }
        for (i, m) in self.first.iter_mut().enumerate() {
            *m = others.iter().map(|(o, w)| *w * o.first[i]).sum();
        }
        for (i, m) in self.second.iter_mut().enumerate() {
            *m = others.iter().map(|(o, w)| *w * o.second[i]).sum();
        }
        Ok(())
    }

    /// One update of `params` against `grad` with rate `lr`. On error
    /// neither `params` nor the state is modified.
    pub fn apply_update(
        &mut self,
        params: &mut ParamVector<T>,
        grad: &ParamVector<T>,
        lr: T,
    ) -> Result<()> {
        params.check_layout(grad)?;
        if self.second.len().max(self.first.len()) > 0 && self.second.len() != params.len() {
            return Err(Error::LayoutMismatch(format!(
                "optimiser state for {} parameters, got {}",
                self.second.len(),
                params.len()
            )));
        }
        if let Some((index, value)) = grad
            .values()
            .iter()
            .enumerate()
            .find(|(_, g)| !g.is_finite())
        {
            return Err(Error::NonFiniteGradient {
                index,
                value: value.as_f64(),
            });
        }
        self.step += 1;
        let p = params.values_mut();
        let g = grad.values();
        match self.kind {
            OptimiserKind::Sgd => {
                for (x, &gi) in p.iter_mut().zip(g) {
                    *x -= lr * gi;
                }
            }
            OptimiserKind::Adam { beta1, beta2, eps } => {
                let (b1, b2, eps) = (T::lit(beta1), T::lit(beta2), T::lit(eps));
                let t = self.step as i32;
                let c1 = T::one() - b1.powi(t);
                let c2 = T::one() - b2.powi(t);
                for i in 0..p.len() {
                    self.first[i] = b1 * self.first[i] + (T::one() - b1) * g[i];
                    self.second[i] = b2 * self.second[i] + (T::one() - b2) * g[i] * g[i];
                    let m_hat = self.first[i] / c1;
                    let v_hat = self.second[i] / c2;
                    p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
            OptimiserKind::RmsProp { alpha, eps } => {
                let (a, eps) = (T::lit(alpha), T::lit(eps));
                for i in 0..p.len() {
                    self.second[i] = a * self.second[i] + (T::one() - a) * g[i] * g[i];
                    p[i] -= lr * g[i] / (self.second[i].sqrt() + eps);
                }
            }
        }
        Ok(())
    }
}

/// An optimiser state paired with its step-size schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimiser<T> {
    pub config: OptimiserConfig,
    pub state: OptimiserState<T>,
}

impl<T: Scalar> Optimiser<T> {
    pub fn new(config: OptimiserConfig, n_params: usize) -> Self {
        let state = OptimiserState::new(config.kind, n_params);
        Self { config, state }
    }

    pub fn current_lr(&self) -> f64 {
        self.config.step.at(self.state.step())
    }

    pub fn update(&mut self, params: &mut ParamVector<T>, grad: &ParamVector<T>) -> Result<()> {
        let lr = T::lit(self.current_lr());
        self.state.apply_update(params, grad, lr)
    }
}
