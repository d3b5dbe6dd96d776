use super::network::{NetworkPair, Networks};
use super::select::igm_argmax;
use crate::env::JointAction;
use crate::error::{Error, Result};
use crate::nn::{Graph, NodeId, ParamSet, Tensor};
use crate::scalar::Real;
use crate::transition::Transition;

/// Stacks agent `i`'s observation of every item into `[B, obs_width]`.
pub fn stack_agent_obs<'a, T: Real + 'a>(
    items: impl Iterator<Item = &'a [Vec<T>]> + Clone,
    n_agents: usize,
) -> Result<Vec<Tensor<T>>> {
    (0..n_agents)
        .map(|i| {
            let rows: Vec<&[T]> = items.clone().map(|obs| obs[i].as_slice()).collect();
            Tensor::from_rows(&rows)
        })
        .collect()
}

/// Greedy anchors at the next step together with the target network's
/// utilities there. Only meaningful for non-terminal transitions.
#[derive(Debug, Clone)]
pub struct NextStep<T> {
    pub anchors: Vec<JointAction>,
    /// One `[B, |A|]` tensor per agent, from `θ⁻`.
    pub target_utilities: Vec<Tensor<T>>,
    pub states: Tensor<T>,
}

impl<T: Real> NextStep<T> {
    /// With `double_q` the main network picks the anchor and the target
    /// network evaluates it; otherwise the target network does both.
    pub fn compute(pair: &NetworkPair<T>, batch: &[&Transition<T>], double_q: bool) -> Result<Self> {
        let n = pair.nets.n_agents();
        let obs = stack_agent_obs(batch.iter().map(|t| t.next_obs.as_slice()), n)?;
        let target_utilities = pair.nets.utilities(&pair.target, obs.clone())?;
        let selector = if double_q { pair.nets.utilities(&pair.main, obs)? } else { target_utilities.clone() };
        let anchors = batch
            .iter()
            .enumerate()
            .map(|(b, t)| {
                let rows: Vec<&[T]> = selector.iter().map(|u| u.row(b)).collect();
                igm_argmax(&rows, &t.next_avail)
            })
            .collect::<Result<Vec<_>>>()?;
        let states = Tensor::from_rows(&batch.iter().map(|t| t.next_state.as_slice()).collect::<Vec<_>>())?;
        Ok(Self { anchors, target_utilities, states })
    }

    /// `Q_tar(τ′_b, c; θ⁻)` for each `(b, c)` request, in one mixer pass.
    pub fn joint_values(&self, nets: &Networks, target: &ParamSet<T>, requests: &[(usize, &JointAction)]) -> Result<Vec<T>> {
        if requests.is_empty() {
            return Ok(Vec::new());
        }
        let n = nets.n_agents();
        let mut q = Vec::with_capacity(requests.len() * n);
        let mut s = Vec::with_capacity(requests.len() * self.states.cols());
        for &(b, c) in requests {
            if c.len() != n {
                return Err(Error::shape("joint_values", n, c.len()));
            }
            q.extend(c.iter().enumerate().map(|(i, &a)| self.target_utilities[i].get2(b, a)));
            s.extend_from_slice(self.states.row(b));
        }
        let q = Tensor::new(vec![requests.len(), n], q)?;
        let s = Tensor::new(vec![requests.len(), self.states.cols()], s)?;
        nets.q_tot(target, q, s)
    }
}

/// `y = r + γ·Q_tar(τ′, u*′; θ⁻)` for every item (`y = r` when terminal).
pub fn greedy_targets<T: Real>(
    pair: &NetworkPair<T>,
    batch: &[&Transition<T>],
    rewards: &[T],
    gamma: T,
    double_q: bool,
) -> Result<Vec<T>> {
    if rewards.len() != batch.len() {
        return Err(Error::shape("greedy_targets", batch.len(), rewards.len()));
    }
    let live: Vec<usize> = (0..batch.len()).filter(|&b| !batch[b].terminal).collect();
    let mut targets = rewards.to_vec();
    if live.is_empty() {
        return Ok(targets);
    }
    let sub: Vec<&Transition<T>> = live.iter().map(|&b| batch[b]).collect();
    let next = NextStep::compute(pair, &sub, double_q)?;
    let requests: Vec<(usize, &JointAction)> = next.anchors.iter().enumerate().collect();
    let values = next.joint_values(&pair.nets, &pair.target, &requests)?;
    for (&b, v) in live.iter().zip(values) {
        targets[b] += gamma * v;
    }
    Ok(targets)
}

pub fn greedy_td_target<T: Real>(pair: &NetworkPair<T>, t: &Transition<T>, gamma: T, double_q: bool) -> Result<T> {
    Ok(greedy_targets(pair, &[t], &[t.reward], gamma, double_q)?[0])
}

/// Records `mean((Q_tot(τ, u; θ) − y)²)` on `g`; returns the loss node and
/// the `[B, 1]` `Q_tot` node.
pub fn td_loss_graph<T: Real>(
    nets: &Networks,
    g: &mut Graph<T>,
    params: &ParamSet<T>,
    batch: &[&Transition<T>],
    targets: &[T],
) -> Result<(NodeId, NodeId)> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if targets.len() != batch.len() {
        return Err(Error::shape("td_loss", batch.len(), targets.len()));
    }
    let n = nets.n_agents();
    let obs = stack_agent_obs(batch.iter().map(|t| t.obs.as_slice()), n)?;
    let utils = nets.utilities_graph(g, params, obs)?;
    let chosen = utils
        .into_iter()
        .enumerate()
        .map(|(i, u)| g.gather(u, batch.iter().map(|t| t.actions[i]).collect()))
        .collect::<Result<Vec<_>>>()?;
    let q = g.concat_cols(&chosen)?;
    let states = g.input(Tensor::from_rows(&batch.iter().map(|t| t.state.as_slice()).collect::<Vec<_>>())?);
    let q_tot = nets.mix_graph(g, params, q, states)?;
    let y = g.input(Tensor::new(vec![batch.len(), 1], targets.to_vec())?);
    let diff = g.sub(q_tot, y)?;
    let sq = g.square(diff);
    let loss = g.mean(sq)?;
    Ok((loss, q_tot))
}

pub fn td_loss<T: Real>(pair: &NetworkPair<T>, batch: &[&Transition<T>], targets: &[T]) -> Result<T> {
    let mut g = Graph::inference();
    let (loss, _) = td_loss_graph(&pair.nets, &mut g, &pair.main, batch, targets)?;
    Ok(g.value(loss).item())
}

/// `Q_tot(τ, u; θ)` of the taken actions.
pub fn taken_q_tot<T: Real>(nets: &Networks, params: &ParamSet<T>, batch: &[&Transition<T>]) -> Result<Vec<T>> {
    let mut g = Graph::inference();
    let zeros = vec![T::zero(); batch.len()];
    let (_, q) = td_loss_graph(nets, &mut g, params, batch, &zeros)?;
    Ok(g.take_value(q).into_data())
}
