use super::{check_actions, Env, EnvReset, EnvStep, JointAction};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Rows index agent 0's action, columns agent 1's, in the order A, B, C.
pub const CLIMBING_PAYOFF: [[f64; 3]; 3] = [[0.0, 6.0, 5.0], [-30.0, 7.0, 0.0], [11.0, -30.0, 0.0]];

/// Two-agent, one-shot climbing game.
///
/// Observation of agent `i` has width 5: `[start, a_i == A, a_i == B,
/// a_i == C, terminal]`. The reset observation is `[1, 0, 0, 0, 0]`; after
/// the move it is the one-hot of the agent's own action with the terminal
/// flag set. The global state is the concatenation of both observations.
#[derive(Debug, Clone, Default)]
pub struct ClimbingGame {
    step_count: usize,
}

const OBS_WIDTH: usize = 5;

impl ClimbingGame {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn payoff(a0: usize, a1: usize) -> f64 {
        CLIMBING_PAYOFF[a0][a1]
    }

    fn start_obs<T: Real>() -> Vec<T> {
        let mut o = vec![T::zero(); OBS_WIDTH];
        o[0] = T::one();
        o
    }

    fn after_obs<T: Real>(action: usize) -> Vec<T> {
        let mut o = vec![T::zero(); OBS_WIDTH];
        o[1 + action] = T::one();
        o[4] = T::one();
        o
    }
}

impl<T: Real> Env<T> for ClimbingGame {
    fn n_agents(&self) -> usize {
        2
    }

    fn n_actions(&self) -> usize {
        3
    }

    fn obs_width(&self) -> usize {
        OBS_WIDTH
    }

    fn state_width(&self) -> usize {
        2 * OBS_WIDTH
    }

    fn horizon(&self) -> usize {
        1
    }

    fn reset(&mut self, _seed: u64) -> EnvReset<T> {
        self.step_count = 0;
        let obs = vec![Self::start_obs::<T>(), Self::start_obs::<T>()];
        EnvReset { state: obs.concat(), obs, avail_actions: vec![vec![true; 3]; 2] }
    }

    fn step(&mut self, actions: &JointAction) -> Result<EnvStep<T>> {
        if self.step_count >= 1 {
            return Err(Error::StepAfterTerminal);
        }
        check_actions(actions, &[vec![true; 3], vec![true; 3]])?;
        self.step_count += 1;
        let next_obs = vec![Self::after_obs::<T>(actions[0]), Self::after_obs::<T>(actions[1])];
        Ok(EnvStep {
            next_state: next_obs.concat(),
            next_obs,
            reward: T::lit(Self::payoff(actions[0], actions[1])),
            terminal: true,
            avail_actions: vec![vec![true; 3]; 2],
        })
    }
}
