//! Action-representation autoencoder.
//!
//! The encoder maps `(o_i, s, a_i)` to an embedding `f_i`: the context
//! `o_i ‖ s` (or `o_i` alone without state) passes through a ReLU trunk, the
//! one-hot action through a ReLU branch of the same width, and a linear
//! fusion layer maps the concatenation of both to the embedding. The
//! predictor maps `f_1 ‖ … ‖ f_N` through one ReLU hidden layer to the
//! concatenated next observations.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, Graph, Mlp, MlpSpec, NodeId, ParamSet, Tensor};
use crate::scalar::Real;
use crate::transition::Transition;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub n_agents: usize,
    pub n_actions: usize,
    pub obs_width: usize,
    pub state_width: usize,
    pub hidden: usize,
    pub embed: usize,
    pub use_state: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionEncoder {
    spec: EncoderSpec,
    trunk: Mlp,
    action_branch: Mlp,
    fusion: Mlp,
    predictor: Mlp,
}

impl ActionEncoder {
    pub fn init<T: Real>(spec: EncoderSpec, rng: &mut impl Rng) -> Result<(Self, ParamSet<T>)> {
        if spec.n_agents == 0 || spec.n_actions == 0 || spec.hidden == 0 || spec.embed == 0 {
            return Err(Error::invalid("encoder", "agents, actions, hidden and embed widths must be positive"));
        }
        let relu = Activation::Relu;
        let id = Activation::Identity;
        let mut params = ParamSet::new();
        let context = spec.obs_width + if spec.use_state { spec.state_width } else { 0 };
        let trunk = Mlp::init(MlpSpec::new(vec![context, spec.hidden], relu, relu)?, "enc.trunk", &mut params, rng);
        let action_branch =
            Mlp::init(MlpSpec::new(vec![spec.n_actions, spec.hidden], relu, relu)?, "enc.action", &mut params, rng);
        let fusion = Mlp::init(MlpSpec::new(vec![2 * spec.hidden, spec.embed], id, id)?, "enc.fusion", &mut params, rng);
        let predictor = Mlp::init(
            MlpSpec::new(vec![spec.n_agents * spec.embed, spec.hidden, spec.n_agents * spec.obs_width], relu, id)?,
            "pred",
            &mut params,
            rng,
        );
        Ok((Self { spec, trunk, action_branch, fusion, predictor }, params))
    }

    pub fn spec(&self) -> &EncoderSpec {
        &self.spec
    }

    pub fn context_width(&self) -> usize {
        self.spec.obs_width + if self.spec.use_state { self.spec.state_width } else { 0 }
    }

    /// Encoder input context `o_i ‖ s`, or `o_i` when the state is unused.
    pub fn context<T: Real>(&self, obs: &[T], state: &[T]) -> Result<Vec<T>> {
        if obs.len() != self.spec.obs_width {
            return Err(Error::shape("encode obs", self.spec.obs_width, obs.len()));
        }
        let mut c = obs.to_vec();
        if self.spec.use_state {
            if state.len() != self.spec.state_width {
                return Err(Error::shape("encode state", self.spec.state_width, state.len()));
            }
            c.extend_from_slice(state);
        }
        Ok(c)
    }

    fn one_hot<T: Real>(&self, actions: &[usize]) -> Result<Tensor<T>> {
        let a = self.spec.n_actions;
        let mut data = vec![T::zero(); actions.len() * a];
        for (r, &j) in actions.iter().enumerate() {
            if j >= a {
                return Err(Error::shape("encode action", format!("< {a}"), j));
            }
            data[r * a + j] = T::one();
        }
        Tensor::new(vec![actions.len(), a], data)
    }

    /// Embedding node `[R, embed]` for context rows `[R, context]` and actions.
    pub fn embed_graph<T: Real>(
        &self,
        g: &mut Graph<T>,
        params: &ParamSet<T>,
        contexts: Tensor<T>,
        actions: &[usize],
    ) -> Result<NodeId> {
        if contexts.rows() != actions.len() {
            return Err(Error::shape("encode", contexts.rows(), actions.len()));
        }
        let onehot = g.input(self.one_hot(actions)?);
        let ctx = g.input(contexts);
        let h_ctx = self.trunk.forward(g, params, ctx)?;
        let h_act = self.action_branch.forward(g, params, onehot)?;
        let merged = g.concat_cols(&[h_ctx, h_act])?;
        self.fusion.forward(g, params, merged)
    }

    pub fn encode_batch<T: Real>(&self, params: &ParamSet<T>, contexts: Tensor<T>, actions: &[usize]) -> Result<Tensor<T>> {
        let mut g = Graph::inference();
        let f = self.embed_graph(&mut g, params, contexts, actions)?;
        Ok(g.take_value(f))
    }

    /// `E_φ(o, s, a)`.
    pub fn encode<T: Real>(&self, params: &ParamSet<T>, obs: &[T], state: &[T], action: usize) -> Result<Vec<T>> {
        let ctx = Tensor::from_rows(&[self.context(obs, state)?])?;
        Ok(self.encode_batch(params, ctx, &[action])?.into_data())
    }

    /// Predicted next joint observation `[B, N·obs_width]` from the batch's
    /// current observations, state and taken actions.
    pub fn predict_graph<T: Real>(&self, g: &mut Graph<T>, params: &ParamSet<T>, batch: &[&Transition<T>]) -> Result<NodeId> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let mut embeddings = Vec::with_capacity(self.spec.n_agents);
        for i in 0..self.spec.n_agents {
            let rows = batch.iter().map(|t| self.context(&t.obs[i], &t.state)).collect::<Result<Vec<_>>>()?;
            let actions: Vec<usize> = batch.iter().map(|t| t.actions[i]).collect();
            embeddings.push(self.embed_graph(g, params, Tensor::from_rows(&rows)?, &actions)?);
        }
        let f = g.concat_cols(&embeddings)?;
        self.predictor.forward(g, params, f)
    }

    /// `mean_b Σ_i ‖ô′_i − o′_i‖²` recorded on `g`.
    pub fn ae_loss_graph<T: Real>(&self, g: &mut Graph<T>, params: &ParamSet<T>, batch: &[&Transition<T>]) -> Result<NodeId> {
        let pred = self.predict_graph(g, params, batch)?;
        let rows: Vec<Vec<T>> = batch.iter().map(|t| t.next_obs.concat()).collect();
        let target = g.input(Tensor::from_rows(&rows)?);
        let diff = g.sub(pred, target)?;
        let sq = g.square(diff);
        let total = g.sum(sq);
        Ok(g.scale(total, T::one() / T::lit(batch.len() as f64)))
    }

    pub fn ae_loss<T: Real>(&self, params: &ParamSet<T>, batch: &[&Transition<T>]) -> Result<T> {
        let mut g = Graph::inference();
        let loss = self.ae_loss_graph(&mut g, params, batch)?;
        Ok(g.value(loss).item())
    }

    pub fn predictor(&self) -> &Mlp {
        &self.predictor
    }
}
