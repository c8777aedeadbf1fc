use crate::error::{Error, Result};
use crate::nn::{Network, Objective, ParamVector};
use crate::scalar::Scalar;

use super::advantage::Transition;

/// The networks and parameters a gradient is taken against.
#[derive(Debug, Clone, Copy)]
pub struct ActorCritic<'a, T> {
    pub actor: &'a Network,
    pub actor_params: &'a ParamVector<T>,
    pub critic: &'a Network,
    pub critic_params: &'a ParamVector<T>,
}

/// Sample-averaged gradients, both in descent convention:
/// critic `−(1/T) Σ Â_t ∇v(s_t)` (semi-gradient, targets frozen) and actor
/// `(1/T) Σ ∇[−log π(a_t|s_t)·Â_t − c·H(π(·|s_t))]`.
pub fn local_gradients<T: Scalar>(
    nets: ActorCritic<'_, T>,
    transitions: &[&Transition<T>],
    advantages: &[T],
    entropy_coef: T,
) -> Result<(ParamVector<T>, ParamVector<T>)> {
    if transitions.is_empty() {
        return Err(Error::InvalidArgument(
            "no transitions to learn from".into(),
        ));
    }
    if advantages.len() != transitions.len() {
        return Err(Error::Dimension {
            expected: transitions.len(),
            got: advantages.len(),
        });
    }
    let scale = T::one() / T::from_count(transitions.len());
    let mut critic_grad = ParamVector::zeros(nets.critic.layout().clone());
    let mut actor_grad = ParamVector::zeros(nets.actor.layout().clone());
    for (tr, &adv) in transitions.iter().zip(advantages) {
        let fwd = nets.critic.forward(nets.critic_params, &tr.state)?;
        let dz = Objective::Value.head_grad(&fwd.head)?;
        nets.critic.backward_into(
            nets.critic_params,
            &fwd,
            &dz,
            -adv * scale,
            &mut critic_grad,
        )?;

        let fwd = nets.actor.forward(nets.actor_params, &tr.state)?;
        let obj = Objective::ActorLoss {
            action: tr.action.clone(),
            advantage: adv,
            entropy_coef,
        };
        let dz = obj.head_grad(&fwd.head)?;
        nets.actor
            .backward_into(nets.actor_params, &fwd, &dz, scale, &mut actor_grad)?;
    }
    Ok((critic_grad, actor_grad))
}

/// Pools transitions from several tasks and averages over all of them, so
/// each task contributes in proportion to its sample count.
pub fn centralised_gradients<T: Scalar>(
    nets: ActorCritic<'_, T>,
    per_task: &[(Vec<&Transition<T>>, Vec<T>)],
    entropy_coef: T,
) -> Result<(ParamVector<T>, ParamVector<T>)> {
    let mut all = Vec::new();
    let mut adv = Vec::new();
    for (tr, a) in per_task {
        if tr.len() != a.len() {
            return Err(Error::Dimension {
                expected: tr.len(),
                got: a.len(),
            });
        }
        all.extend(tr.iter().copied());
        adv.extend_from_slice(a);
    }
    if all.is_empty() {
        return Err(Error::InvalidArgument(
            "every task trajectory is empty".into(),
        ));
    }
    local_gradients(nets, &all, &adv, entropy_coef)
}
