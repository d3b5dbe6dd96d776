//! Value-decomposition multi-agent Q-learning with similarity-weighted targets.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar for the common case.

pub mod analysis;
pub mod config;
pub mod env;
pub mod error;
pub mod nn;
pub mod qsim;
pub mod rng;
pub mod scalar;
pub mod trainer;
pub mod transition;
pub mod vd;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Tensor64 = nn::Tensor<f64>;
pub type Tensor32 = nn::Tensor<f32>;
pub type ParamSet64 = nn::ParamSet<f64>;
pub type ParamSet32 = nn::ParamSet<f32>;
pub type NetworkPair64 = vd::NetworkPair<f64>;
pub type NetworkPair32 = vd::NetworkPair<f32>;
pub type Transition64 = transition::Transition<f64>;
pub type Learner64 = trainer::Learner<f64>;
pub type Trainer64 = trainer::Trainer<f64>;
pub type Trainer32 = trainer::Trainer<f32>;
