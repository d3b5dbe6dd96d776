//! Value decomposition: per-agent utilities, VDN and QMIX mixers,
//! decentralized greedy selection and the greedy TD target.

mod network;
mod select;
mod target;

pub use network::{AgentNet, Mixer, MixerKind, NetworkPair, NetworkSpec, Networks, QmixMixer, TargetUpdate};
pub use select::{greedy_action, igm_argmax, masked_utilities, UNAVAILABLE};
pub use target::{greedy_targets, greedy_td_target, stack_agent_obs, taken_q_tot, td_loss, td_loss_graph, NextStep};

use crate::error::{Error, Result};
use crate::rng::{substream, Stream};
use crate::scalar::Real;

/// A VDN pair whose agents are lookup tables: every agent observes the
/// constant `[1.0]` and its utilities are the given rows.
pub fn tabular_pair<T: Real>(main: &[Vec<T>], target: &[Vec<T>]) -> Result<NetworkPair<T>> {
    tabular_pair_with(main, target, MixerKind::Vdn, 1, 0)
}

/// Lookup-table agents under an arbitrary mixer. Mixer parameters are drawn
/// from `seed` and shared by main and target.
pub fn tabular_pair_with<T: Real>(
    main: &[Vec<T>],
    target: &[Vec<T>],
    mixer: MixerKind,
    state_width: usize,
    seed: u64,
) -> Result<NetworkPair<T>> {
    let n_agents = main.len();
    let n_actions = main.first().map_or(0, Vec::len);
    if target.len() != n_agents || main.iter().chain(target).any(|r| r.len() != n_actions) {
        return Err(Error::invalid("tables", "main and target tables must share one shape"));
    }
    let spec = NetworkSpec {
        n_agents,
        n_actions,
        obs_width: 1,
        state_width,
        agent_hidden: Vec::new(),
        mixer,
        mixer_embed: 4,
        hyper_hidden: 8,
    };
    let (nets, base) = Networks::init::<T>(spec, &mut substream(seed, Stream::Init))?;
    let fill = |tables: &[Vec<T>]| {
        let mut ps = base.clone();
        for (agent, table) in nets.agents().iter().zip(tables) {
            let (w, b) = agent.mlp().layers()[0];
            ps.get_mut(w).data_mut().copy_from_slice(table);
            ps.get_mut(b).data_mut().iter_mut().for_each(|x| *x = T::zero());
        }
        ps
    };
    let mut pair = NetworkPair::new(nets.clone(), fill(main));
    pair.target = fill(target);
    Ok(pair)
}
