//! Agent graphs, combination weights and the diffusion combine step.

mod combine;
mod topology;
mod weights;

pub use combine::{
    agent_weights, combine, combine_agent, disagreement_norm, network_mean, realised_matrix,
    LinkFailureModel, LinkMask,
};
pub use topology::{build_topology, Topology, TopologyKind};
pub use weights::{consensus_rounds, hastings_weights, ConnectivityMatrix};
