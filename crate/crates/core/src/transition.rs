use crate::env::JointAction;

/// One environment step as stored in the replay buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<T> {
    pub state: Vec<T>,
    pub obs: Vec<Vec<T>>,
    pub avail: Vec<Vec<bool>>,
    pub actions: JointAction,
    pub reward: T,
    pub next_state: Vec<T>,
    pub next_obs: Vec<Vec<T>>,
    pub next_avail: Vec<Vec<bool>>,
    pub terminal: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Episode<T> {
    pub transitions: Vec<Transition<T>>,
}

impl<T: Copy + std::iter::Sum> Episode<T> {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn total_reward(&self) -> T {
        self.transitions.iter().map(|t| t.reward).sum()
    }
}
