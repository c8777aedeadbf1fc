use crate::error::{Error, Result};
use crate::nn::ActionSample;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition<T> {
    pub state: Vec<T>,
    pub action: ActionSample<T>,
    /// Reward received after taking `action`.
    pub reward: T,
    pub next_state: Vec<T>,
    /// True termination, not a time-limit cut.
    pub terminal: bool,
}

/// A contiguous run of transitions from one episode. `bootstrap` holds
/// `v(s_T)` when the run stops short of a terminal state.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub transitions: Vec<Transition<T>>,
    pub bootstrap: Option<T>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn new(transitions: Vec<Transition<T>>, bootstrap: Option<T>) -> Result<Self> {
        let t = Self {
            transitions,
            bootstrap,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn ends_terminal(&self) -> bool {
        self.transitions.last().is_some_and(|t| t.terminal)
    }

    pub fn rewards(&self) -> Vec<T> {
        self.transitions.iter().map(|t| t.reward).collect()
    }

    pub fn undiscounted_return(&self) -> T {
        self.transitions.iter().map(|t| t.reward).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.transitions.len();
        for (i, t) in self.transitions.iter().enumerate() {
            if !t.reward.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "non-finite reward at step {i}"
                )));
            }
            if t.terminal && i + 1 != n {
                return Err(Error::InvalidArgument(format!(
                    "terminal transition at step {i} of {n}"
                )));
            }
        }
        if self.ends_terminal() && self.bootstrap.is_some() {
            return Err(Error::InvalidArgument(
                "terminal trajectory carries a bootstrap value".into(),
            ));
        }
        Ok(())
    }
}

/// Monte-Carlo advantage `Σ_{j≥t} γ^{j−t} r_{j+1} − v(s_t)` over a finished
/// episode; `values[t] = v(s_t)`.
pub fn advantage_siac<T: Scalar>(rewards: &[T], values: &[T], gamma: T) -> Result<Vec<T>> {
    if rewards.is_empty() {
        return Err(Error::InvalidArgument("empty trajectory".into()));
    }
    discounted_minus_values(rewards, values, gamma, T::zero())
}

/// n-step advantage `Σ_{j≥t} γ^{j−t} r_{j+1} + γ^{T−t} v(s_T) − v(s_t)` with
/// `v(s_T) = 0` at a terminal.
pub fn advantage_a2c<T: Scalar>(traj: &Trajectory<T>, values: &[T], gamma: T) -> Result<Vec<T>> {
    if traj.is_empty() {
        return Err(Error::InvalidArgument("empty trajectory".into()));
    }
    traj.validate()?;
    let tail = match (traj.ends_terminal(), traj.bootstrap) {
        (true, _) => T::zero(),
        (false, Some(v)) => v,
        (false, None) => {
            return Err(Error::InvalidArgument(
                "non-terminal segment without a bootstrap value".into(),
            ))
        }
    };
    discounted_minus_values(&traj.rewards(), values, gamma, tail)
}

fn discounted_minus_values<T: Scalar>(
    rewards: &[T],
    values: &[T],
    gamma: T,
    tail: T,
) -> Result<Vec<T>> {
    if values.len() != rewards.len() {
        return Err(Error::Dimension {
            expected: rewards.len(),
            got: values.len(),
        });
    }
    let mut out = vec![T::zero(); rewards.len()];
    let mut ret = tail;
    for t in (0..rewards.len()).rev() {
        ret = rewards[t] + gamma * ret;
        out[t] = ret - values[t];
    }
    Ok(out)
}
