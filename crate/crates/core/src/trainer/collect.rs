use rand::Rng as _;

use crate::env::{Env, JointAction};
use crate::error::{Error, Result};
use crate::nn::{ParamSet, Tensor};
use crate::rng::Rng;
use crate::scalar::Real;
use crate::transition::{Episode, Transition};
use crate::vd::{greedy_action, Networks};

/// Independent ε-greedy per agent: each agent flips its own coin and, on
/// heads, picks uniformly among its available actions.
pub fn select_actions<T: Real>(
    nets: &Networks,
    params: &ParamSet<T>,
    obs: &[Vec<T>],
    avail: &[Vec<bool>],
    epsilon: f64,
    rng: &mut Rng,
) -> Result<JointAction> {
    let inputs = obs.iter().map(|o| Tensor::from_rows(&[o])).collect::<Result<Vec<_>>>()?;
    let utilities = nets.utilities(params, inputs)?;
    let mut actions = Vec::with_capacity(obs.len());
    for (i, (u, mask)) in utilities.iter().zip(avail).enumerate() {
        let explore = epsilon > 0.0 && rng.random::<f64>() < epsilon;
        let a = if explore {
            let choices: Vec<usize> = (0..mask.len()).filter(|&j| mask[j]).collect();
            if choices.is_empty() {
                return Err(Error::AllMasked(i));
            }
            choices[rng.random_range(0..choices.len())]
        } else {
            greedy_action(i, u.row(0), mask)?
        };
        actions.push(a);
    }
    Ok(JointAction(actions))
}

/// Runs one episode from `env.reset(env_seed)` to termination.
pub fn collect_episode<T: Real>(
    env: &mut dyn Env<T>,
    nets: &Networks,
    params: &ParamSet<T>,
    epsilon: f64,
    env_seed: u64,
    rng: &mut Rng,
) -> Result<Episode<T>> {
    let start = env.reset(env_seed);
    let (mut state, mut obs, mut avail) = (start.state, start.obs, start.avail_actions);
    let mut transitions = Vec::with_capacity(env.horizon());
    loop {
        let actions = select_actions(nets, params, &obs, &avail, epsilon, rng)?;
        let step = env.step(&actions)?;
        let terminal = step.terminal;
        transitions.push(Transition {
            state: std::mem::take(&mut state),
            obs: std::mem::take(&mut obs),
            avail: std::mem::take(&mut avail),
            actions,
            reward: step.reward,
            next_state: step.next_state.clone(),
            next_obs: step.next_obs.clone(),
            next_avail: step.avail_actions.clone(),
            terminal,
        });
        if terminal {
            return Ok(Episode { transitions });
        }
        state = step.next_state;
        obs = step.next_obs;
        avail = step.avail_actions;
    }
}
