use crate::config::Variant;
use crate::error::{Error, Result};
use crate::nn::{Graph, Optimizer, OptimizerKind, ParamSet};
use crate::qsim::{qsim_targets, ActionEncoder, QsimSettings, WeightRule};
use crate::scalar::Real;
use crate::transition::Transition;
use crate::vd::{greedy_targets, td_loss_graph, NetworkPair, TargetUpdate};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerConfig {
    pub variant: Variant,
    pub gamma: f64,
    pub double_q: bool,
    pub threshold: f64,
    pub top_n: Option<usize>,
    pub target_update: TargetUpdate,
    pub lr: f64,
    pub grad_clip: Option<f64>,
}

/// Losses and statistics of one update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainRecord<T> {
    pub td_loss: T,
    /// `None` when the variant has no encoder.
    pub ae_loss: Option<T>,
    pub mean_target: T,
    pub mean_qtot: T,
}

/// Networks, encoder and their separate optimizers.
#[derive(Debug, Clone)]
pub struct Learner<T> {
    pub pair: NetworkPair<T>,
    pub encoder: Option<(ActionEncoder, ParamSet<T>)>,
    theta_opt: Optimizer<T>,
    phi_opt: Option<Optimizer<T>>,
    config: LearnerConfig,
    updates: u64,
}

impl<T: Real> Learner<T> {
    pub fn new(pair: NetworkPair<T>, encoder: Option<(ActionEncoder, ParamSet<T>)>, config: LearnerConfig) -> Result<Self> {
        if config.variant.uses_encoder() != encoder.is_some() {
            return Err(Error::invalid("encoder", format!("variant {} encoder mismatch", config.variant.name())));
        }
        let theta_opt = Optimizer::new(OptimizerKind::adam(), config.lr, &pair.main)?.with_clip_norm(config.grad_clip);
        let phi_opt = encoder
            .as_ref()
            .map(|(_, p)| Optimizer::new(OptimizerKind::adam(), config.lr, p).map(|o| o.with_clip_norm(config.grad_clip)))
            .transpose()?;
        Ok(Self { pair, encoder, theta_opt, phi_opt, config, updates: 0 })
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// The weighting rule at inverse temperature `kappa`; `None` for the
    /// greedy baseline.
    pub fn weight_rule(&self, kappa: f64) -> Option<WeightRule<T>> {
        match self.config.variant {
            Variant::Greedy => None,
            Variant::QsimMean => Some(WeightRule::uniform()),
            Variant::Qsim | Variant::QsimTopN | Variant::QsimNoState => {
                Some(WeightRule::new(T::lit(kappa), T::lit(self.config.threshold), self.config.top_n))
            }
        }
    }

    /// TD targets on (already transformed) `rewards`.
    pub fn targets(&self, batch: &[&Transition<T>], rewards: &[T], kappa: f64) -> Result<Vec<T>> {
        let gamma = T::lit(self.config.gamma);
        match (self.weight_rule(kappa), &self.encoder) {
            (Some(rule), Some((enc, phi))) => {
                let settings = QsimSettings { rule, gamma, double_q: self.config.double_q };
                Ok(qsim_targets(&self.pair, enc, phi, batch, rewards, &settings)?.targets)
            }
            _ => greedy_targets(&self.pair, batch, rewards, gamma, self.config.double_q),
        }
    }

    /// One autoencoder update; returns the loss before the step.
    pub fn ae_step(&mut self, batch: &[&Transition<T>]) -> Result<Option<T>> {
        let (Some((enc, phi)), Some(opt)) = (&mut self.encoder, &mut self.phi_opt) else { return Ok(None) };
        let mut g = Graph::new();
        let loss = enc.ae_loss_graph(&mut g, phi, batch)?;
        phi.zero_grad();
        g.backward(loss, phi)?;
        opt.step(phi)?;
        Ok(Some(g.value(loss).item()))
    }

    /// Autoencoder update, target construction, then the TD update and
    /// target-network synchronization.
    pub fn train_step(&mut self, batch: &[&Transition<T>], rewards: &[T], kappa: f64) -> Result<TrainRecord<T>> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let ae_loss = self.ae_step(batch)?;
        let targets = self.targets(batch, rewards, kappa)?;

        let mut g = Graph::new();
        let (loss, q_tot) = td_loss_graph(&self.pair.nets, &mut g, &self.pair.main, batch, &targets)?;
        self.pair.main.zero_grad();
        g.backward(loss, &mut self.pair.main)?;
        self.theta_opt.step(&mut self.pair.main)?;
        self.updates += 1;
        match self.config.target_update {
            TargetUpdate::Soft { .. } => self.pair.update_target(self.config.target_update)?,
            TargetUpdate::Hard { interval } if self.updates.is_multiple_of(interval) => {
                self.pair.update_target(self.config.target_update)?
            }
            TargetUpdate::Hard { .. } => {}
        }

        let n = T::lit(batch.len() as f64);
        let q = g.value(q_tot).data();
        Ok(TrainRecord {
            td_loss: g.value(loss).item(),
            ae_loss,
            mean_target: targets.iter().copied().sum::<T>() / n,
            mean_qtot: q.iter().copied().sum::<T>() / n,
        })
    }
}
