use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::{Graph, NodeId};
use super::params::{ParamId, ParamSet};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
    Tanh,
}

/// Fully connected stack: `layer_widths[0]` is the input width, the last
/// entry the output width.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub layer_widths: Vec<usize>,
    pub activation: Activation,
    pub final_activation: Activation,
}

impl MlpSpec {
    pub fn new(layer_widths: Vec<usize>, activation: Activation, final_activation: Activation) -> Result<Self> {
        if layer_widths.len() < 2 {
            return Err(Error::invalid("layer_widths", "need input and output width"));
        }
        if layer_widths.contains(&0) {
            return Err(Error::invalid("layer_widths", "widths must be positive"));
        }
        Ok(Self { layer_widths, activation, final_activation })
    }

    pub fn input_width(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_widths.last().expect("validated non-empty")
    }

    pub fn num_layers(&self) -> usize {
        self.layer_widths.len() - 1
    }
}

/// An [`MlpSpec`] bound to its parameters inside a [`ParamSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    spec: MlpSpec,
    layers: Vec<(ParamId, ParamId)>,
}

impl Mlp {
    /// Registers weights `{prefix}.w{k}` (shape `[in, out]`) and biases
    /// `{prefix}.b{k}` initialized from `U(±1/√fan_in)`.
    pub fn init<T: Real>(spec: MlpSpec, prefix: &str, params: &mut ParamSet<T>, rng: &mut impl Rng) -> Self {
        let layers = spec
            .layer_widths
            .windows(2)
            .enumerate()
            .map(|(k, w)| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                let wid = params.add_uniform(format!("{prefix}.w{k}"), vec![w[0], w[1]], bound, rng);
                let bid = params.add_uniform(format!("{prefix}.b{k}"), vec![w[1]], bound, rng);
                (wid, bid)
            })
            .collect();
        Self { spec, layers }
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[(ParamId, ParamId)] {
        &self.layers
    }

    pub fn forward<T: Real>(&self, g: &mut Graph<T>, params: &ParamSet<T>, input: NodeId) -> Result<NodeId> {
        let x = g.value(input);
        if x.shape().len() != 2 || x.cols() != self.spec.input_width() {
            return Err(Error::shape("mlp_forward", format!("[_, {}]", self.spec.input_width()), x.shape()));
        }
        x.check_finite("mlp input")?;
        let mut h = input;
        let last = self.layers.len() - 1;
        for (k, &(w, b)) in self.layers.iter().enumerate() {
            params.get(w).check_finite(params.name(w))?;
            params.get(b).check_finite(params.name(b))?;
            let wn = g.param(params, w);
            let bn = g.param(params, b);
            let z = g.matmul(h, wn)?;
            let z = g.add_row(z, bn)?;
            let act = if k == last { self.spec.final_activation } else { self.spec.activation };
            h = match act {
                Activation::Relu => g.relu(z),
                Activation::Tanh => g.tanh(z),
                Activation::Identity => z,
            };
        }
        Ok(h)
    }

    /// Forward pass without recording, for action selection and evaluation.
    pub fn eval<T: Real>(&self, params: &ParamSet<T>, input: Tensor<T>) -> Result<Tensor<T>> {
        let mut g = Graph::inference();
        let x = g.input(input);
        let y = self.forward(&mut g, params, x)?;
        Ok(g.take_value(y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};

    fn zero_all(ps: &mut ParamSet<f64>) {
        for id in ps.ids().collect::<Vec<_>>() {
            ps.get_mut(id).data_mut().iter_mut().for_each(|x| *x = 0.0);
        }
    }

    #[test]
    fn zero_net_gives_zero_output() {
        let mut ps = ParamSet::new();
        let spec = MlpSpec::new(vec![3, 5, 2], Activation::Relu, Activation::Identity).unwrap();
        let mlp = Mlp::init(spec, "m", &mut ps, &mut substream(0, Stream::Init));
        zero_all(&mut ps);
        let y = mlp.eval(&ps, Tensor::from_f64(vec![2, 3], &[1.0, -2.0, 3.0, 0.5, 0.5, 9.0]).unwrap()).unwrap();
        assert_eq!(y.data(), &[0.0; 4]);
    }

    #[test]
    fn identity_layer_is_identity() {
        let mut ps = ParamSet::new();
        let spec = MlpSpec::new(vec![3, 3], Activation::Identity, Activation::Identity).unwrap();
        let mlp = Mlp::init(spec, "m", &mut ps, &mut substream(0, Stream::Init));
        zero_all(&mut ps);
        let (w, _) = mlp.layers()[0];
        for i in 0..3 {
            ps.get_mut(w).data_mut()[i * 3 + i] = 1.0;
        }
        let x = Tensor::from_f64(vec![1, 3], &[0.25, -7.0, 3.5]).unwrap();
        assert_eq!(mlp.eval(&ps, x.clone()).unwrap().data(), x.data());
    }

    #[test]
    fn width_mismatch_and_non_finite_rejected() {
        let mut ps = ParamSet::new();
        let spec = MlpSpec::new(vec![2, 2], Activation::Identity, Activation::Identity).unwrap();
        let mlp = Mlp::init(spec, "m", &mut ps, &mut substream(0, Stream::Init));
        assert!(matches!(mlp.eval(&ps, Tensor::zeros(vec![1, 3])), Err(Error::Shape { .. })));
        let bad = Tensor::from_f64(vec![1, 2], &[f64::INFINITY, 0.0]).unwrap();
        assert!(matches!(mlp.eval(&ps, bad), Err(Error::NonFinite(_))));
        let (w, _) = mlp.layers()[0];
        ps.get_mut(w).data_mut()[0] = f64::NAN;
        assert!(matches!(mlp.eval(&ps, Tensor::zeros(vec![1, 2])), Err(Error::NonFinite(_))));
    }

    #[test]
    fn spec_needs_two_widths() {
        assert!(MlpSpec::new(vec![4], Activation::Relu, Activation::Identity).is_err());
    }

    #[test]
    fn init_is_bounded_by_fan_in() {
        let mut ps = ParamSet::<f64>::new();
        let spec = MlpSpec::new(vec![16, 4], Activation::Relu, Activation::Identity).unwrap();
        Mlp::init(spec, "m", &mut ps, &mut substream(3, Stream::Init));
        assert!(ps.flat_values().iter().all(|x| x.abs() <= 0.25));
    }
}
