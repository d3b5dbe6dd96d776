use serde::{Deserialize, Serialize};

use super::params::ParamSet;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First-order optimizer with per-parameter moment buffers.
#[derive(Debug, Clone)]
pub struct Optimizer<T> {
    kind: OptimizerKind,
    lr: T,
    clip_norm: Option<T>,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
    steps: u64,
}

impl<T: Real> Optimizer<T> {
    pub fn new(kind: OptimizerKind, lr: f64, params: &ParamSet<T>) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::invalid("lr", "learning rate must be positive"));
        }
        let zeros: Vec<Vec<T>> = params.iter().map(|(_, t)| vec![T::zero(); t.len()]).collect();
        Ok(Self { kind, lr: T::lit(lr), clip_norm: None, first: zeros.clone(), second: zeros, steps: 0 })
    }

    /// Rescales the full gradient to at most `max_norm` before each step.
    pub fn with_clip_norm(mut self, max_norm: Option<f64>) -> Self {
        self.clip_norm = max_norm.map(T::lit);
        self
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn learning_rate(&self) -> T {
        self.lr
    }

    /// Applies one update from the gradients accumulated in `params` and
    /// returns the pre-clipping gradient norm. Gradients are left in place.
    pub fn step(&mut self, params: &mut ParamSet<T>) -> Result<T> {
        if self.first.len() != params.len() {
            return Err(Error::shape("optimizer_step", self.first.len(), params.len()));
        }
        let mut sq = T::zero();
        for (i, (name, t)) in params.iter().enumerate() {
            if self.first[i].len() != t.len() {
                return Err(Error::shape("optimizer_step", self.first[i].len(), t.len()));
            }
            if let Some(g) = t.grad() {
                if g.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFinite(format!("gradient of {name}")));
                }
                sq += g.iter().map(|&x| x * x).sum::<T>();
            }
        }
        let norm = sq.sqrt();
        let scale = match self.clip_norm {
            Some(max) if norm > max => max / norm,
            _ => T::one(),
        };

        self.steps += 1;
        let lr = self.lr;
        let tensors = params.tensors_mut();
        match self.kind {
            OptimizerKind::Sgd => {
                for t in tensors.iter_mut() {
                    let Some(g) = t.grad().map(<[T]>::to_vec) else { continue };
                    for (p, gi) in t.data_mut().iter_mut().zip(g) {
                        *p -= lr * gi * scale;
                    }
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let (b1, b2, eps) = (T::lit(beta1), T::lit(beta2), T::lit(eps));
                let bc1 = T::one() - b1.powi(self.steps as i32);
                let bc2 = T::one() - b2.powi(self.steps as i32);
                for (i, t) in tensors.iter_mut().enumerate() {
                    let Some(g) = t.grad().map(<[T]>::to_vec) else { continue };
                    let (m, v) = (&mut self.first[i], &mut self.second[i]);
                    for (j, (p, gi)) in t.data_mut().iter_mut().zip(g).enumerate() {
                        let gi = gi * scale;
                        m[j] = b1 * m[j] + (T::one() - b1) * gi;
                        v[j] = b2 * v[j] + (T::one() - b2) * gi * gi;
                        let mhat = m[j] / bc1;
                        let vhat = v[j] / bc2;
                        *p -= lr * mhat / (vhat.sqrt() + eps);
                    }
                }
            }
        }
        Ok(norm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor;

    fn single(value: f64, grad: f64) -> ParamSet<f64> {
        let mut ps = ParamSet::new();
        let id = ps.add("p", Tensor::from_f64(vec![1], &[value]).unwrap());
        ps.get_mut(id).accumulate_grad(&[grad]);
        ps
    }

    #[test]
    fn sgd_arithmetic() {
        let mut ps = single(1.0, 2.0);
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.1, &ps).unwrap();
        opt.step(&mut ps).unwrap();
        assert!((ps.flat_values()[0] - 0.8).abs() < 1e-15);
        assert_eq!(opt.steps(), 1);
    }

    #[test]
    fn zero_gradient_leaves_values() {
        for kind in [OptimizerKind::Sgd, OptimizerKind::adam()] {
            let mut ps = single(0.3, 0.0);
            let mut opt = Optimizer::new(kind, 0.01, &ps).unwrap();
            opt.step(&mut ps).unwrap();
            opt.step(&mut ps).unwrap();
            assert_eq!(ps.flat_values()[0], 0.3);
        }
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        // t = 1: m̂ = g, v̂ = g², update = lr·g/(|g| + eps)
        let mut ps = single(0.0, 1.0);
        let mut opt = Optimizer::new(OptimizerKind::adam(), 0.0005, &ps).unwrap();
        opt.step(&mut ps).unwrap();
        let expected = -0.0005 * 1.0 / (1.0 + 1e-8);
        assert!((ps.flat_values()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut ps = single(0.0, f64::NAN);
        let mut opt = Optimizer::new(OptimizerKind::adam(), 0.1, &ps).unwrap();
        assert!(matches!(opt.step(&mut ps), Err(Error::NonFinite(_))));
        assert_eq!(ps.flat_values()[0], 0.0);
    }

    #[test]
    fn clipping_bounds_sgd_step() {
        let mut ps = single(0.0, 100.0);
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 1.0, &ps).unwrap().with_clip_norm(Some(10.0));
        let norm = opt.step(&mut ps).unwrap();
        assert_eq!(norm, 100.0);
        assert!((ps.flat_values()[0] + 10.0).abs() < 1e-12);
    }
}
