use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, Graph, Mlp, MlpSpec, NodeId, ParamSet, Tensor};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MixerKind {
    Vdn,
    Qmix,
}

/// Architecture of the per-agent utility networks and the mixer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub n_agents: usize,
    pub n_actions: usize,
    pub obs_width: usize,
    pub state_width: usize,
    /// Hidden widths of each agent network; empty means a single linear map.
    pub agent_hidden: Vec<usize>,
    pub mixer: MixerKind,
    pub mixer_embed: usize,
    pub hyper_hidden: usize,
}

/// Per-agent utility network `Q_i(o_i, ·)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentNet {
    mlp: Mlp,
}

impl AgentNet {
    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn n_actions(&self) -> usize {
        self.mlp.spec().output_width()
    }
}

/// Monotonic two-layer mixer whose weights are produced from the global
/// state by hypernetworks and made non-negative with `abs`.
#[derive(Debug, Clone, PartialEq)]
pub struct QmixMixer {
    hyper_w1: Mlp,
    hyper_b1: Mlp,
    hyper_w2: Mlp,
    hyper_v: Mlp,
    n_agents: usize,
    embed: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Mixer {
    Vdn { n_agents: usize },
    Qmix(QmixMixer),
}

/// Structure shared by the main and target parameter sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Networks {
    spec: NetworkSpec,
    agents: Vec<AgentNet>,
    mixer: Mixer,
}

impl QmixMixer {
    fn init<T: Real>(spec: &NetworkSpec, params: &mut ParamSet<T>, rng: &mut impl Rng) -> Result<Self> {
        let (s, n, e, h) = (spec.state_width, spec.n_agents, spec.mixer_embed, spec.hyper_hidden);
        let relu = Activation::Relu;
        let id = Activation::Identity;
        Ok(Self {
            hyper_w1: Mlp::init(MlpSpec::new(vec![s, h, n * e], relu, id)?, "mixer.hyper_w1", params, rng),
            hyper_b1: Mlp::init(MlpSpec::new(vec![s, e], id, id)?, "mixer.hyper_b1", params, rng),
            hyper_w2: Mlp::init(MlpSpec::new(vec![s, h, e], relu, id)?, "mixer.hyper_w2", params, rng),
            hyper_v: Mlp::init(MlpSpec::new(vec![s, e, 1], relu, id)?, "mixer.hyper_v", params, rng),
            n_agents: n,
            embed: e,
        })
    }

    fn forward<T: Real>(&self, g: &mut Graph<T>, params: &ParamSet<T>, q: NodeId, state: NodeId) -> Result<NodeId> {
        let w1 = self.hyper_w1.forward(g, params, state)?;
        let w1 = g.abs(w1);
        let b1 = self.hyper_b1.forward(g, params, state)?;
        let hidden = g.row_vec_mat(q, w1, self.embed)?;
        let hidden = g.add(hidden, b1)?;
        let hidden = g.elu(hidden);
        let w2 = self.hyper_w2.forward(g, params, state)?;
        let w2 = g.abs(w2);
        let v = self.hyper_v.forward(g, params, state)?;
        let out = g.row_vec_mat(hidden, w2, 1)?;
        g.add(out, v)
    }

    /// Non-negative mixing weights `(|W1(s)|, |w2(s)|)` for one state,
    /// shaped `[n_agents·embed]` and `[embed]`.
    pub fn mixing_weights<T: Real>(&self, params: &ParamSet<T>, state: &[T]) -> Result<(Vec<T>, Vec<T>)> {
        let s = Tensor::from_rows(&[state])?;
        let w1 = self.hyper_w1.eval(params, s.clone())?.map(T::abs).into_data();
        let w2 = self.hyper_w2.eval(params, s)?.map(T::abs).into_data();
        Ok((w1, w2))
    }

    /// Test harness hook: forces every hypernetwork output to weight 1 and
    /// bias 0 regardless of state, so that with `embed = 1` the mixer
    /// computes `elu(Σ q_i)`.
    #[doc(hidden)]
    pub fn force_unit_weights<T: Real>(&self, params: &mut ParamSet<T>) {
        let set_last = |mlp: &Mlp, params: &mut ParamSet<T>, bias: T| {
            for (k, &(w, b)) in mlp.layers().iter().enumerate() {
                let last = k + 1 == mlp.layers().len();
                params.get_mut(w).data_mut().iter_mut().for_each(|x| *x = T::zero());
                let bv = if last { bias } else { T::zero() };
                params.get_mut(b).data_mut().iter_mut().for_each(|x| *x = bv);
            }
        };
        set_last(&self.hyper_w1, params, T::one());
        set_last(&self.hyper_w2, params, T::one());
        set_last(&self.hyper_b1, params, T::zero());
        set_last(&self.hyper_v, params, T::zero());
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }
}

impl Networks {
    /// Builds the architecture and a freshly initialized parameter set.
    pub fn init<T: Real>(spec: NetworkSpec, rng: &mut impl Rng) -> Result<(Self, ParamSet<T>)> {
        if spec.n_agents == 0 || spec.n_actions == 0 || spec.obs_width == 0 {
            return Err(Error::invalid("network", "agents, actions and observation width must be positive"));
        }
        let mut params = ParamSet::new();
        let mut widths = vec![spec.obs_width];
        widths.extend(&spec.agent_hidden);
        widths.push(spec.n_actions);
        let agents = (0..spec.n_agents)
            .map(|i| {
                let mlp_spec = MlpSpec::new(widths.clone(), Activation::Relu, Activation::Identity)?;
                Ok(AgentNet { mlp: Mlp::init(mlp_spec, &format!("agent{i}"), &mut params, rng) })
            })
            .collect::<Result<Vec<_>>>()?;
        let mixer = match spec.mixer {
            MixerKind::Vdn => Mixer::Vdn { n_agents: spec.n_agents },
            MixerKind::Qmix => {
                if spec.state_width == 0 || spec.mixer_embed == 0 || spec.hyper_hidden == 0 {
                    return Err(Error::invalid("network", "QMIX needs positive state, embed and hypernet widths"));
                }
                Mixer::Qmix(QmixMixer::init(&spec, &mut params, rng)?)
            }
        };
        Ok((Self { spec, agents, mixer }, params))
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn agents(&self) -> &[AgentNet] {
        &self.agents
    }

    pub fn mixer(&self) -> &Mixer {
        &self.mixer
    }

    pub fn n_agents(&self) -> usize {
        self.spec.n_agents
    }

    pub fn n_actions(&self) -> usize {
        self.spec.n_actions
    }

    /// Utility nodes `[B, |A|]`, one per agent; `obs[i]` is `[B, obs_width]`.
    pub fn utilities_graph<T: Real>(&self, g: &mut Graph<T>, params: &ParamSet<T>, obs: Vec<Tensor<T>>) -> Result<Vec<NodeId>> {
        if obs.len() != self.agents.len() {
            return Err(Error::shape("agent utilities", self.agents.len(), obs.len()));
        }
        obs.into_iter()
            .zip(&self.agents)
            .map(|(o, net)| {
                let x = g.input(o);
                net.mlp.forward(g, params, x)
            })
            .collect()
    }

    /// Unmasked utilities for a batch, evaluated without recording.
    pub fn utilities<T: Real>(&self, params: &ParamSet<T>, obs: Vec<Tensor<T>>) -> Result<Vec<Tensor<T>>> {
        let mut g = Graph::inference();
        let nodes = self.utilities_graph(&mut g, params, obs)?;
        Ok(nodes.into_iter().map(|n| g.take_value(n)).collect())
    }

    /// `Q_tot` node `[B, 1]` from per-agent utilities `q [B, N]` and `state [B, S]`.
    pub fn mix_graph<T: Real>(&self, g: &mut Graph<T>, params: &ParamSet<T>, q: NodeId, state: NodeId) -> Result<NodeId> {
        let qs = g.value(q).shape();
        if qs.len() != 2 || qs[1] != self.spec.n_agents {
            return Err(Error::shape("mix", format!("[_, {}]", self.spec.n_agents), qs));
        }
        match &self.mixer {
            Mixer::Vdn { .. } => g.row_sum(q),
            Mixer::Qmix(m) => {
                let ss = g.value(state).shape();
                if ss.len() != 2 || ss[1] != self.spec.state_width || ss[0] != qs[0] {
                    return Err(Error::shape("mix state", [qs[0], self.spec.state_width], ss));
                }
                m.forward(g, params, q, state)
            }
        }
    }

    /// Batched `Q_tot` without recording.
    pub fn q_tot<T: Real>(&self, params: &ParamSet<T>, q: Tensor<T>, states: Tensor<T>) -> Result<Vec<T>> {
        let mut g = Graph::inference();
        let qn = g.input(q);
        let sn = g.input(states);
        let out = self.mix_graph(&mut g, params, qn, sn)?;
        Ok(g.take_value(out).into_data())
    }

    /// `Q_tot` for one set of per-agent utilities.
    pub fn mix<T: Real>(&self, params: &ParamSet<T>, per_agent_q: &[T], state: &[T]) -> Result<T> {
        if per_agent_q.len() != self.spec.n_agents {
            return Err(Error::shape("mix", self.spec.n_agents, per_agent_q.len()));
        }
        let state = if state.is_empty() { vec![T::zero(); self.spec.state_width] } else { state.to_vec() };
        let q = Tensor::from_rows(&[per_agent_q])?;
        let s = Tensor::from_rows(&[state])?;
        Ok(self.q_tot(params, q, s)?[0])
    }
}

/// Main parameters `θ` and their target copy `θ⁻` over one architecture.
#[derive(Debug, Clone)]
pub struct NetworkPair<T> {
    pub nets: Networks,
    pub main: ParamSet<T>,
    pub target: ParamSet<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum TargetUpdate {
    /// Copy every `interval` training steps.
    Hard { interval: u64 },
    /// Polyak averaging after every training step.
    Soft { tau: f64 },
}

impl<T: Real> NetworkPair<T> {
    pub fn new(nets: Networks, main: ParamSet<T>) -> Self {
        let target = main.clone();
        Self { nets, main, target }
    }

    pub fn init(spec: NetworkSpec, rng: &mut impl Rng) -> Result<Self> {
        let (nets, main) = Networks::init(spec, rng)?;
        Ok(Self::new(nets, main))
    }

    /// Hard: `θ⁻ ← θ`. Soft: `θ⁻ ← τθ + (1 − τ)θ⁻`.
    pub fn update_target(&mut self, mode: TargetUpdate) -> Result<()> {
        match mode {
            TargetUpdate::Hard { .. } => self.target.copy_from(&self.main),
            TargetUpdate::Soft { tau } => self.target.blend_from(&self.main, T::lit(tau)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};

    fn spec(mixer: MixerKind, embed: usize) -> NetworkSpec {
        NetworkSpec {
            n_agents: 3,
            n_actions: 4,
            obs_width: 5,
            state_width: 6,
            agent_hidden: vec![8],
            mixer,
            mixer_embed: embed,
            hyper_hidden: 8,
        }
    }

    #[test]
    fn vdn_is_exact_sum() {
        let (nets, ps) = Networks::init::<f64>(spec(MixerKind::Vdn, 4), &mut substream(0, Stream::Init)).unwrap();
        assert_eq!(nets.mix(&ps, &[1.0, 2.0, 3.0], &[]).unwrap(), 6.0);
    }

    #[test]
    fn degenerate_qmix_sums() {
        let (nets, mut ps) = Networks::init::<f64>(spec(MixerKind::Qmix, 1), &mut substream(1, Stream::Init)).unwrap();
        let Mixer::Qmix(m) = nets.mixer() else { unreachable!() };
        m.force_unit_weights(&mut ps);
        let state = [0.3, -1.0, 2.0, 0.0, 0.5, 0.1];
        assert!((nets.mix(&ps, &[1.0, 2.0, 3.0], &state).unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn qmix_weights_non_negative() {
        let (nets, ps) = Networks::init::<f64>(spec(MixerKind::Qmix, 4), &mut substream(2, Stream::Init)).unwrap();
        let Mixer::Qmix(m) = nets.mixer() else { unreachable!() };
        let (w1, w2) = m.mixing_weights(&ps, &[1.0, -2.0, 0.5, 0.0, 3.0, -1.0]).unwrap();
        assert_eq!(w1.len(), 12);
        assert_eq!(w2.len(), 4);
        assert!(w1.iter().chain(&w2).all(|&w| w >= 0.0));
    }

    #[test]
    fn mix_width_mismatch() {
        let (nets, ps) = Networks::init::<f64>(spec(MixerKind::Qmix, 4), &mut substream(0, Stream::Init)).unwrap();
        assert!(nets.mix(&ps, &[1.0, 2.0], &[0.0; 6]).is_err());
        assert!(nets.mix(&ps, &[1.0, 2.0, 3.0], &[0.0; 5]).is_err());
    }

    #[test]
    fn target_updates() {
        let mut pair = NetworkPair::<f64>::init(spec(MixerKind::Qmix, 4), &mut substream(0, Stream::Init)).unwrap();
        for id in pair.main.ids().collect::<Vec<_>>() {
            pair.main.get_mut(id).data_mut().iter_mut().for_each(|x| *x = 1.0);
            pair.target.get_mut(id).data_mut().iter_mut().for_each(|x| *x = 0.0);
        }
        pair.update_target(TargetUpdate::Soft { tau: 0.01 }).unwrap();
        assert!(pair.target.flat_values().iter().all(|&x| (x - 0.01).abs() < 1e-15));
        pair.update_target(TargetUpdate::Soft { tau: 1.0 }).unwrap();
        assert_eq!(pair.target.flat_values(), pair.main.flat_values());
        pair.target.get_mut(crate::nn::ParamId(0)).data_mut()[0] = 5.0;
        pair.update_target(TargetUpdate::Hard { interval: 200 }).unwrap();
        let bits = |v: Vec<f64>| v.into_iter().map(f64::to_bits).collect::<Vec<_>>();
        assert_eq!(bits(pair.target.flat_values()), bits(pair.main.flat_values()));
    }
}
