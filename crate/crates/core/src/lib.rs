//! Simulation framework for fully distributed multitask actor-critic
//! learning: networked agents train on private tasks and diffuse their
//! parameters to graph neighbours.

pub mod agents;
pub mod envs;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod network;
pub mod nn;
pub mod optim;
pub mod rng;
pub mod scalar;
pub mod tabular;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Mdp = tabular::TabularMdp<f64>;
pub type TaskFamily = tabular::TabularTaskFamily<f64>;
pub type Occupancy = tabular::OccupancyMeasure<f64>;
pub type Params = nn::ParamVector<f64>;
pub type Optimiser = optim::Optimiser<f64>;
pub type Trajectory = agents::Trajectory<f64>;
pub type Transition = agents::Transition<f64>;
