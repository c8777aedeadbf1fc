//! Dense feed-forward networks with hand-written backpropagation.
//!
//! Parameters live outside the network in a flat [`ParamVector`] whose
//! layout is fixed by the [`NetworkSpec`]; this is the vector that diffuses
//! between agents.

mod codec;
mod head;
mod net;
mod params;

pub use codec::{decode_params, encode_params, MAGIC as PARAMS_MAGIC};
pub use head::{
    entropy, entropy_grad, greedy_action, log_prob, log_prob_grad, sample_action, ActionSample,
    CategoricalOutput, GaussianPolicyOutput, HeadOutput,
};
pub use net::{Forward, Network, Objective};
pub use params::{Layout, ParamVector, TensorRole, TensorSlot};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_STD_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HeadKind {
    LinearValue,
    /// Mean `tanh`-squashed onto `[low, high]`; std from a softplus plus a floor.
    GaussianPolicy {
        low: Vec<f64>,
        high: Vec<f64>,
    },
    CategoricalPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub head: HeadKind,
    pub output_dim: usize,
    #[serde(default = "default_std_floor")]
    pub std_floor: f64,
}

fn default_std_floor() -> f64 {
    DEFAULT_STD_FLOOR
}

impl NetworkSpec {
    pub fn value(input_dim: usize, hidden: Vec<usize>, activation: Activation) -> Self {
        Self {
            input_dim,
            hidden,
            activation,
            head: HeadKind::LinearValue,
            output_dim: 1,
            std_floor: DEFAULT_STD_FLOOR,
        }
    }

    pub fn gaussian(
        input_dim: usize,
        hidden: Vec<usize>,
        activation: Activation,
        low: Vec<f64>,
        high: Vec<f64>,
    ) -> Self {
        let output_dim = low.len();
        Self {
            input_dim,
            hidden,
            activation,
            head: HeadKind::GaussianPolicy { low, high },
            output_dim,
            std_floor: DEFAULT_STD_FLOOR,
        }
    }

    pub fn categorical(
        input_dim: usize,
        hidden: Vec<usize>,
        activation: Activation,
        n_actions: usize,
    ) -> Self {
        Self {
            input_dim,
            hidden,
            activation,
            head: HeadKind::CategoricalPolicy,
            output_dim: n_actions,
            std_floor: DEFAULT_STD_FLOOR,
        }
    }

    /// Width of the final affine layer.
    pub fn final_width(&self) -> usize {
        match self.head {
            HeadKind::GaussianPolicy { .. } => 2 * self.output_dim,
            _ => self.output_dim,
        }
    }

    /// Layer widths from input to the final affine output.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(self.input_dim);
        w.extend(&self.hidden);
        w.push(self.final_width());
        w
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden.contains(&0) {
            return Err(Error::InvalidArgument(
                "network dimensions must be at least 1".into(),
            ));
        }
        match &self.head {
            HeadKind::GaussianPolicy { low, high } => {
                if low.len() != self.output_dim || high.len() != self.output_dim {
                    return Err(Error::InvalidArgument(
                        "gaussian bounds must match output_dim".into(),
                    ));
                }
                if low.iter().zip(high).any(|(l, h)| !(l < h)) {
                    return Err(Error::InvalidArgument(
                        "gaussian bounds need low < high".into(),
                    ));
                }
                if !(self.std_floor > 0.0) {
                    return Err(Error::InvalidArgument("std_floor must be positive".into()));
                }
            }
            HeadKind::CategoricalPolicy if self.output_dim < 2 => {
                return Err(Error::InvalidArgument(
                    "categorical head needs at least 2 actions".into(),
                ));
            }
            _ => {}
        }
        Ok(())
    }
}
