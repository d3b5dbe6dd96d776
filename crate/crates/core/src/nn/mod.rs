//! Dense tensors, reverse-mode differentiation and the small set of layers
//! the agent networks, the mixer and the action autoencoder are built from.

mod checkpoint;
mod graph;
mod mlp;
mod optim;
mod params;
mod tensor;

pub use checkpoint::{read_checkpoint, to_bytes, write_checkpoint, MAGIC, VERSION};
pub use graph::{Graph, NodeId};
pub use mlp::{Activation, Mlp, MlpSpec};
pub use optim::{Optimizer, OptimizerKind};
pub use params::{ParamId, ParamSet};
pub use tensor::Tensor;
