use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng as _;
use serde_json::json;

use super::buffer::ReplayBuffer;
use super::collect::{collect_episode, select_actions};
use super::learner::{Learner, LearnerConfig, TrainRecord};
use super::schedule::RewardNormalizer;
use crate::analysis::delta_q;
use crate::config::{EnvConfig, ExperimentConfig, Variant};
use crate::env::{ClimbingGame, CoopGridworld, Env, JointAction};
use crate::error::{Error, Result};
use crate::nn::{write_checkpoint, ParamSet};
use crate::qsim::{export_embeddings, ActionEncoder, EncoderSpec};
use crate::rng::{substream, Rng, Stream};
use crate::scalar::Real;
use crate::transition::{Episode, Transition};
use crate::vd::{taken_q_tot, NetworkPair, NetworkSpec};

pub const METRICS_HEADER: [&str; 11] =
    ["step", "variant", "seed", "eval_return", "td_loss", "ae_loss", "mean_target", "mean_qtot", "delta_q", "epsilon", "kappa"];

/// One evaluation row. Training statistics average the updates since the
/// previous row and are empty when there were none.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub step: u64,
    pub variant: Variant,
    pub seed: u64,
    pub eval_return: f64,
    pub td_loss: Option<f64>,
    pub ae_loss: Option<f64>,
    pub mean_target: Option<f64>,
    pub mean_qtot: Option<f64>,
    pub delta_q: f64,
    pub epsilon: f64,
    /// Empty for the greedy baseline.
    pub kappa: Option<f64>,
}

impl MetricsRow {
    pub fn record(&self) -> [String; 11] {
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        [
            self.step.to_string(),
            self.variant.name().to_string(),
            self.seed.to_string(),
            self.eval_return.to_string(),
            opt(self.td_loss),
            opt(self.ae_loss),
            opt(self.mean_target),
            opt(self.mean_qtot),
            self.delta_q.to_string(),
            self.epsilon.to_string(),
            opt(self.kappa),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub mean_return: f64,
    /// Mean over episodes of the per-episode mean `δ_q`.
    pub delta_q: f64,
}

pub fn build_env<T: Real>(env: &EnvConfig) -> Result<Box<dyn Env<T>>> {
    Ok(match env {
        EnvConfig::Climbing => Box::new(ClimbingGame::new()),
        EnvConfig::Gridworld(g) => Box::new(CoopGridworld::new(g.clone())?),
    })
}

/// Fresh networks and (for similarity variants) encoder, drawn from the
/// seed's init stream.
pub fn build_learner<T: Real>(cfg: &ExperimentConfig, env: &dyn Env<T>, seed: u64) -> Result<Learner<T>> {
    let mut rng = substream(seed, Stream::Init);
    let spec = NetworkSpec {
        n_agents: env.n_agents(),
        n_actions: env.n_actions(),
        obs_width: env.obs_width(),
        state_width: env.state_width(),
        agent_hidden: cfg.network.agent_hidden.clone(),
        mixer: cfg.mixer,
        mixer_embed: cfg.network.mixer_embed,
        hyper_hidden: cfg.network.hyper_hidden,
    };
    let pair = NetworkPair::init(spec, &mut rng)?;
    let encoder = if cfg.variant.uses_encoder() {
        let spec = EncoderSpec {
            n_agents: env.n_agents(),
            n_actions: env.n_actions(),
            obs_width: env.obs_width(),
            state_width: env.state_width(),
            hidden: cfg.network.ae_hidden,
            embed: cfg.network.ae_embed,
            use_state: cfg.use_state && cfg.variant != Variant::QsimNoState,
        };
        Some(ActionEncoder::init(spec, &mut rng)?)
    } else {
        None
    };
    Learner::new(
        pair,
        encoder,
        LearnerConfig {
            variant: cfg.variant,
            gamma: cfg.gamma,
            double_q: cfg.double_q,
            threshold: cfg.threshold,
            top_n: cfg.top_n,
            target_update: cfg.target_update,
            lr: cfg.lr,
            grad_clip: cfg.grad_clip,
        },
    )
}

#[derive(Debug, Default)]
struct Accum {
    n: usize,
    td: f64,
    ae: f64,
    target: f64,
    qtot: f64,
}

impl Accum {
    fn add<T: Real>(&mut self, r: &TrainRecord<T>) {
        self.n += 1;
        self.td += r.td_loss.as_f64();
        self.ae += r.ae_loss.map_or(0.0, Real::as_f64);
        self.target += r.mean_target.as_f64();
        self.qtot += r.mean_qtot.as_f64();
    }

    fn mean(&self, x: f64) -> Option<f64> {
        (self.n > 0).then(|| x / self.n as f64)
    }
}

/// Training state of one `(config, seed)` run.
pub struct Trainer<T: Real> {
    cfg: ExperimentConfig,
    seed: u64,
    env: Box<dyn Env<T>>,
    eval_env: Box<dyn Env<T>>,
    learner: Learner<T>,
    buffer: ReplayBuffer<T>,
    normalizer: RewardNormalizer,
    env_rng: Rng,
    explore_rng: Rng,
    sample_rng: Rng,
    eval_seeds: Vec<u64>,
    step: u64,
    episodes: u64,
    accum: Accum,
}

impl<T: Real> Trainer<T> {
    pub fn new(cfg: &ExperimentConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let env = build_env::<T>(&cfg.env)?;
        let eval_env = build_env::<T>(&cfg.env)?;
        let learner = build_learner(cfg, env.as_ref(), seed)?;
        let mut eval_rng = substream(seed, Stream::Eval);
        let eval_seeds = (0..cfg.eval_episodes).map(|_| eval_rng.random()).collect();
        Ok(Self {
            cfg: cfg.clone(),
            seed,
            env,
            eval_env,
            learner,
            buffer: ReplayBuffer::new(cfg.buffer)?,
            normalizer: RewardNormalizer::default(),
            env_rng: substream(seed, Stream::Env),
            explore_rng: substream(seed, Stream::Explore),
            sample_rng: substream(seed, Stream::Sample),
            eval_seeds,
            step: 0,
            episodes: 0,
            accum: Accum::default(),
        })
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    pub fn learner(&self) -> &Learner<T> {
        &self.learner
    }

    pub fn buffer(&self) -> &ReplayBuffer<T> {
        &self.buffer
    }

    pub fn epsilon(&self) -> f64 {
        self.cfg.epsilon.value(self.step)
    }

    pub fn kappa(&self) -> f64 {
        self.cfg.kappa.value(self.step)
    }

    /// Reward as seen by the TD targets and by `δ_q`.
    pub fn transform_reward(&self, r: T) -> T {
        if self.cfg.reward_standardization {
            T::lit(self.normalizer.normalize(r.as_f64()))
        } else {
            r
        }
    }

    /// Collects one exploration episode into the buffer, then performs one
    /// update once the buffer holds a full batch.
    pub fn iterate(&mut self) -> Result<Option<TrainRecord<T>>> {
        let eps = self.epsilon();
        let env_seed = self.env_rng.random();
        let episode = collect_episode(
            self.env.as_mut(),
            &self.learner.pair.nets,
            &self.learner.pair.main,
            eps,
            env_seed,
            &mut self.explore_rng,
        )?;
        self.step += episode.len() as u64;
        self.episodes += 1;
        if self.cfg.reward_standardization {
            let rewards: Vec<f64> = episode.transitions.iter().map(|t| t.reward.as_f64()).collect();
            self.normalizer.update(&rewards);
        }
        self.buffer.push(episode);
        if self.buffer.len() < self.cfg.batch_size {
            return Ok(None);
        }
        let kappa = self.kappa();
        let sampled = self.buffer.sample(self.cfg.batch_size, &mut self.sample_rng)?;
        let batch: Vec<&Transition<T>> = sampled.iter().flat_map(|e| e.transitions.iter()).collect();
        let rewards: Vec<T> = batch.iter().map(|t| self.transform_reward(t.reward)).collect();
        let record = self.learner.train_step(&batch, &rewards, kappa)?;
        self.accum.add(&record);
        Ok(Some(record))
    }

    /// Greedy (`ε = 0`) episodes on the fixed evaluation seeds; they never
    /// enter the buffer.
    pub fn evaluate(&mut self) -> Result<Evaluation> {
        let gamma = T::lit(self.cfg.gamma);
        let mut unused = substream(self.seed, Stream::Eval);
        let (mut ret, mut dq) = (0.0, 0.0);
        for &s in &self.eval_seeds {
            let pair = &self.learner.pair;
            let ep = collect_episode(self.eval_env.as_mut(), &pair.nets, &pair.main, 0.0, s, &mut unused)?;
            ret += ep.total_reward().as_f64();
            dq += self.episode_delta_q(&ep, gamma)?;
        }
        let n = self.eval_seeds.len() as f64;
        Ok(Evaluation { mean_return: ret / n, delta_q: dq / n })
    }

    fn episode_delta_q(&self, ep: &Episode<T>, gamma: T) -> Result<f64> {
        let batch: Vec<&Transition<T>> = ep.transitions.iter().collect();
        let q = taken_q_tot(&self.learner.pair.nets, &self.learner.pair.main, &batch)?;
        let rewards: Vec<T> = batch.iter().map(|t| self.transform_reward(t.reward)).collect();
        let total: f64 = (0..batch.len()).map(|t| delta_q(q[t], &rewards[t..], gamma).as_f64()).sum();
        Ok(total / batch.len() as f64)
    }

    fn metrics_row(&mut self, step: u64, eval: Evaluation) -> MetricsRow {
        let a = std::mem::take(&mut self.accum);
        let uses_encoder = self.cfg.variant.uses_encoder();
        MetricsRow {
            step,
            variant: self.cfg.variant,
            seed: self.seed,
            eval_return: eval.mean_return,
            td_loss: a.mean(a.td),
            ae_loss: if uses_encoder { a.mean(a.ae) } else { None },
            mean_target: a.mean(a.target),
            mean_qtot: a.mean(a.qtot),
            delta_q: eval.delta_q,
            epsilon: self.epsilon(),
            kappa: self.learner.weight_rule(self.kappa()).map(|r| r.kappa.as_f64()),
        }
    }

    /// Trains to `step_max`, emitting a row at every multiple of
    /// `eval_interval` from 0 through `step_max`. A row is evaluated at the
    /// first episode boundary at or after its nominal step. `step_max = 0`
    /// emits nothing.
    pub fn run(&mut self, mut sink: impl FnMut(&MetricsRow) -> Result<()>) -> Result<()> {
        let (max, interval) = (self.cfg.step_max, self.cfg.eval_interval);
        if max == 0 {
            return Ok(());
        }
        let mut next = 0;
        loop {
            if next <= self.step && next <= max {
                let eval = self.evaluate()?;
                while next <= self.step && next <= max {
                    let row = self.metrics_row(next, eval);
                    sink(&row)?;
                    next += interval;
                }
            }
            if self.step >= max {
                break;
            }
            self.iterate()?;
        }
        Ok(())
    }

    /// Decentralized greedy joint action at the first step of the episode
    /// seeded with `env_seed`.
    pub fn greedy_joint_action(&mut self, env_seed: u64) -> Result<JointAction> {
        let start = self.eval_env.reset(env_seed);
        let pair = &self.learner.pair;
        let mut unused = substream(self.seed, Stream::Eval);
        select_actions(&pair.nets, &pair.main, &start.obs, &start.avail_actions, 0.0, &mut unused)
    }

    /// `theta.*` main network parameters followed by `phi.*` encoder
    /// parameters.
    pub fn checkpoint_params(&self) -> ParamSet<T> {
        let mut all = ParamSet::new();
        all.extend_prefixed("theta.", self.learner.pair.main.clone());
        if let Some((_, phi)) = &self.learner.encoder {
            all.extend_prefixed("phi.", phi.clone());
        }
        all
    }

    pub fn export_embeddings(&mut self, out: impl std::io::Write) -> Result<()> {
        let Some((enc, phi)) = &self.learner.encoder else {
            return Err(Error::invalid("export_embeddings", "variant has no encoder"));
        };
        let start = self.eval_env.reset(self.eval_seeds[0]);
        export_embeddings(enc, phi, &start.obs, &start.state, out)
    }
}

/// Artifacts of one seed.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub seed: u64,
    pub dir: PathBuf,
    pub rows: Vec<MetricsRow>,
    pub final_greedy: JointAction,
}

pub fn seed_dir(output_dir: &Path, seed: u64) -> PathBuf {
    output_dir.join(format!("seed_{seed}"))
}

/// The run manifest: config echo and its hash.
pub fn manifest(cfg: &ExperimentConfig, seed: u64) -> serde_json::Value {
    json!({
        "seed": seed,
        "env": cfg.env.name(),
        "variant": cfg.variant.name(),
        "config_hash": cfg.content_hash(),
        "config": cfg.echo(),
        "artifacts": { "metrics": "metrics.csv", "checkpoint": "final.ckpt" },
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Runs one seed and writes `seed_<n>/{manifest.json, metrics.csv,
/// final.ckpt}` (plus `embeddings.csv` when enabled) under `output_dir`.
pub fn run_seed<T: Real>(cfg: &ExperimentConfig, seed: u64) -> Result<RunOutcome> {
    let dir = seed_dir(&cfg.output_dir, seed);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let manifest_text = serde_json::to_string_pretty(&manifest(cfg, seed)).expect("json value serializes");
    write_file(&dir.join("manifest.json"), format!("{manifest_text}\n").as_bytes())?;

    let metrics_path = dir.join("metrics.csv");
    let file = fs::File::create(&metrics_path).map_err(|e| Error::io(&metrics_path, e))?;
    let csv_err = |e: csv::Error| Error::Data { path: metrics_path.clone(), message: e.to_string() };
    let mut writer = csv::Writer::from_writer(std::io::BufWriter::new(file));
    writer.write_record(METRICS_HEADER).map_err(csv_err)?;

    let mut trainer = Trainer::<T>::new(cfg, seed)?;
    let mut rows = Vec::new();
    trainer.run(|row| {
        writer.write_record(row.record()).map_err(csv_err)?;
        rows.push(row.clone());
        Ok(())
    })?;
    writer.flush().map_err(|e| Error::io(&metrics_path, e))?;

    let ckpt = dir.join("final.ckpt");
    let mut f = std::io::BufWriter::new(fs::File::create(&ckpt).map_err(|e| Error::io(&ckpt, e))?);
    write_checkpoint(&trainer.checkpoint_params(), &mut f).map_err(|e| Error::io(&ckpt, e))?;
    f.flush().map_err(|e| Error::io(&ckpt, e))?;

    if cfg.export_embeddings && cfg.variant.uses_encoder() {
        let path = dir.join("embeddings.csv");
        let f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        trainer.export_embeddings(std::io::BufWriter::new(f))?;
    }
    let final_greedy = trainer.greedy_joint_action(0)?;
    Ok(RunOutcome { seed, dir, rows, final_greedy })
}
