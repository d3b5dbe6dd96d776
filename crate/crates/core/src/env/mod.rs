//! Cooperative environments with a shared reward.

mod climbing;
mod gridworld;

use std::ops::Deref;

use serde::{Deserialize, Serialize};

pub use climbing::{ClimbingGame, CLIMBING_PAYOFF};
pub use gridworld::{CoopGridworld, GridAction, GridConfig};

use crate::error::Result;
use crate::scalar::Real;

/// One discrete action index per agent.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct JointAction(pub Vec<usize>);

impl JointAction {
    /// Copy of `self` with agent `agent` switched to `action`.
    pub fn with(&self, agent: usize, action: usize) -> Self {
        let mut v = self.0.clone();
        v[agent] = action;
        JointAction(v)
    }
}

impl Deref for JointAction {
    type Target = [usize];
    fn deref(&self) -> &[usize] {
        &self.0
    }
}

impl From<Vec<usize>> for JointAction {
    fn from(v: Vec<usize>) -> Self {
        JointAction(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvReset<T> {
    pub state: Vec<T>,
    pub obs: Vec<Vec<T>>,
    pub avail_actions: Vec<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvStep<T> {
    pub next_obs: Vec<Vec<T>>,
    pub next_state: Vec<T>,
    pub reward: T,
    pub terminal: bool,
    pub avail_actions: Vec<Vec<bool>>,
}

pub trait Env<T: Real>: Send {
    fn n_agents(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn obs_width(&self) -> usize;
    fn state_width(&self) -> usize;
    /// Episode step limit (the climbing game always ends after one step).
    fn horizon(&self) -> usize;
    fn reset(&mut self, seed: u64) -> EnvReset<T>;
    fn step(&mut self, actions: &JointAction) -> Result<EnvStep<T>>;
}

pub(crate) fn check_actions(actions: &JointAction, avail: &[Vec<bool>]) -> Result<()> {
    use crate::error::Error;
    if actions.len() != avail.len() {
        return Err(Error::invalid("joint_action", format!("expected {} actions, got {}", avail.len(), actions.len())));
    }
    for (agent, (&a, mask)) in actions.iter().zip(avail).enumerate() {
        if a >= mask.len() {
            return Err(Error::InvalidAction { agent, action: a, reason: "out of range" });
        }
        if !mask[a] {
            return Err(Error::InvalidAction { agent, action: a, reason: "unavailable" });
        }
    }
    Ok(())
}
