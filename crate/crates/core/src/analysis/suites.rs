use rand::Rng as _;
use serde::Serialize;

use crate::env::JointAction;
use crate::error::Result;
use crate::nn::{Graph, NodeId, ParamSet, Tensor};
use crate::qsim::{ActionEncoder, EncoderSpec};
use crate::rng::{substream, Rng, Stream};
use crate::transition::Transition;
use crate::vd::{igm_argmax, td_loss_graph, MixerKind, NetworkSpec, Networks};

/// Outcome of one property suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub name: &'static str,
    pub samples: u64,
    pub violations: u64,
    /// Suite-specific worst statistic (max relative error, min increase, …).
    pub worst: f64,
}

fn random_batch(rng: &mut Rng, n: usize, a: usize, obs_w: usize, state_w: usize, len: usize) -> Vec<Transition<f64>> {
    let vec_of = |w: usize, rng: &mut Rng| (0..w).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
    (0..len)
        .map(|_| Transition {
            state: vec_of(state_w, rng),
            obs: (0..n).map(|_| vec_of(obs_w, rng)).collect(),
            avail: vec![vec![true; a]; n],
            actions: JointAction((0..n).map(|_| rng.random_range(0..a)).collect()),
            reward: rng.random_range(-1.0..1.0),
            next_state: vec_of(state_w, rng),
            next_obs: (0..n).map(|_| vec_of(obs_w, rng)).collect(),
            next_avail: vec![vec![true; a]; n],
            terminal: false,
        })
        .collect()
}

/// Max relative error `|g − ĝ| / max(|g|, |ĝ|, floor)` between the tape's
/// gradient and central differences with step `h`.
/// Scalar loss built on a fresh graph.
pub type LossFn<'a> = dyn Fn(&mut Graph<f64>, &ParamSet<f64>) -> Result<NodeId> + 'a;

pub fn max_gradient_error(
    params: &ParamSet<f64>,
    loss: &LossFn,
    h: f64,
    floor: f64,
) -> Result<f64> {
    let mut p = params.clone();
    p.zero_grad();
    let mut g = Graph::new();
    let l = loss(&mut g, &p)?;
    g.backward(l, &mut p)?;
    let analytic = p.flat_grads();
    let eval = |p: &ParamSet<f64>| -> Result<f64> {
        let mut g = Graph::inference();
        let l = loss(&mut g, p)?;
        Ok(g.value(l).item())
    };
    let mut worst = 0.0f64;
    let mut k = 0;
    let ids: Vec<_> = p.ids().collect();
    for id in ids {
        for j in 0..p.get(id).len() {
            let orig = p.get(id).data()[j];
            p.get_mut(id).data_mut()[j] = orig + h;
            let up = eval(&p)?;
            p.get_mut(id).data_mut()[j] = orig - h;
            let down = eval(&p)?;
            p.get_mut(id).data_mut()[j] = orig;
            let fd = (up - down) / (2.0 * h);
            let a = analytic[k];
            worst = worst.max((a - fd).abs() / a.abs().max(fd.abs()).max(floor));
            k += 1;
        }
    }
    Ok(worst)
}

/// Reverse-mode gradients of TD and autoencoder losses on random small
/// networks against central finite differences.
pub fn gradient_check(draws: u64, seed: u64, tolerance: f64) -> Result<SuiteReport> {
    let mut rng = substream(seed, Stream::Indexed(4));
    let mut report = SuiteReport { name: "gradient", samples: draws, violations: 0, worst: 0.0 };
    for d in 0..draws {
        let n = rng.random_range(1..=3);
        let a = rng.random_range(2..=4);
        let (obs_w, state_w) = (rng.random_range(1..=4), rng.random_range(1..=4));
        let len = rng.random_range(1..=4);
        let batch = random_batch(&mut rng, n, a, obs_w, state_w, len);
        let refs: Vec<&Transition<f64>> = batch.iter().collect();
        let mut init = substream(seed ^ d, Stream::Init);
        let err = if d % 2 == 0 {
            let spec = NetworkSpec {
                n_agents: n,
                n_actions: a,
                obs_width: obs_w,
                state_width: state_w,
                agent_hidden: vec![rng.random_range(2..=5)],
                mixer: if d % 4 == 0 { MixerKind::Qmix } else { MixerKind::Vdn },
                mixer_embed: rng.random_range(1..=4),
                hyper_hidden: rng.random_range(2..=5),
            };
            let (nets, params) = Networks::init::<f64>(spec, &mut init)?;
            let targets: Vec<f64> = refs.iter().map(|_| rng.random_range(-2.0..2.0)).collect();
            max_gradient_error(&params, &|g, p| Ok(td_loss_graph(&nets, g, p, &refs, &targets)?.0), 1e-6, 1e-6)?
        } else {
            let spec = EncoderSpec {
                n_agents: n,
                n_actions: a,
                obs_width: obs_w,
                state_width: state_w,
                hidden: rng.random_range(2..=6),
                embed: rng.random_range(1..=4),
                use_state: rng.random(),
            };
            let (enc, params) = ActionEncoder::init::<f64>(spec, &mut init)?;
            max_gradient_error(&params, &|g, p| enc.ae_loss_graph(g, p, &refs), 1e-6, 1e-6)?
        };
        report.worst = report.worst.max(err);
        if err >= tolerance {
            report.violations += 1;
        }
    }
    Ok(report)
}

/// Raising any single agent utility never lowers the QMIX output.
pub fn qmix_monotonicity(draws: u64, seed: u64) -> Result<SuiteReport> {
    let mut rng = substream(seed, Stream::Indexed(5));
    let mut report = SuiteReport { name: "qmix-monotonicity", samples: draws, violations: 0, worst: f64::INFINITY };
    for d in 0..draws {
        let n = rng.random_range(1..=5);
        let state_w = rng.random_range(1..=6);
        let spec = NetworkSpec {
            n_agents: n,
            n_actions: 2,
            obs_width: 1,
            state_width: state_w,
            agent_hidden: vec![],
            mixer: MixerKind::Qmix,
            mixer_embed: rng.random_range(1..=8),
            hyper_hidden: rng.random_range(1..=8),
        };
        let (nets, params) = Networks::init::<f64>(spec, &mut substream(seed ^ d, Stream::Init))?;
        let state: Vec<f64> = (0..state_w).map(|_| rng.random_range(-2.0..2.0)).collect();
        let q: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let i = rng.random_range(0..n);
        let delta = rng.random_range(1e-3..3.0);
        let mut raised = q.clone();
        raised[i] += delta;
        let inc = nets.mix(&params, &raised, &state)? - nets.mix(&params, &q, &state)?;
        report.worst = report.worst.min(inc);
        if inc < 0.0 {
            report.violations += 1;
        }
    }
    Ok(report)
}

/// Decentralized argmax against a brute-force search of the VDN joint
/// value over every available joint action (`|U| ≤ 10⁴`).
pub fn igm_exactness(draws: u64, seed: u64) -> Result<SuiteReport> {
    let mut rng = substream(seed, Stream::Indexed(6));
    let mut report = SuiteReport { name: "igm", samples: draws, violations: 0, worst: 0.0 };
    for d in 0..draws {
        let n = rng.random_range(1..=4);
        let max_a = (10_000f64.powf(1.0 / n as f64).floor() as usize).clamp(2, 10);
        let a = rng.random_range(2..=max_a);
        let spec = NetworkSpec {
            n_agents: n,
            n_actions: a,
            obs_width: 1,
            state_width: 1,
            agent_hidden: vec![],
            mixer: MixerKind::Vdn,
            mixer_embed: 1,
            hyper_hidden: 1,
        };
        let (nets, mut params) = Networks::init::<f64>(spec, &mut substream(seed ^ d, Stream::Init))?;
        for agent in nets.agents() {
            let (w, _) = agent.mlp().layers()[0];
            params.get_mut(w).data_mut().iter_mut().for_each(|x| *x = rng.random_range(-10.0..10.0));
        }
        let masks: Vec<Vec<bool>> = (0..n)
            .map(|_| {
                let mut m: Vec<bool> = (0..a).map(|_| rng.random::<f64>() < 0.8).collect();
                if !m.iter().any(|&x| x) {
                    m[0] = true;
                }
                m
            })
            .collect();
        let utils = nets.utilities(&params, vec![Tensor::from_rows(&[[1.0]])?; n])?;
        let rows: Vec<&[f64]> = utils.iter().map(|u| u.row(0)).collect();
        let igm = igm_argmax(&rows, &masks)?;

        let joints: Vec<Vec<usize>> = (0..a.pow(n as u32))
            .map(|mut code| {
                (0..n)
                    .map(|_| {
                        let j = code % a;
                        code /= a;
                        j
                    })
                    .collect()
            })
            .filter(|c: &Vec<usize>| c.iter().zip(&masks).all(|(&j, m)| m[j]))
            .collect();
        let q: Vec<f64> = joints.iter().flat_map(|c| c.iter().enumerate().map(|(i, &j)| rows[i][j])).collect();
        let q_tot = nets.q_tot(&params, Tensor::new(vec![joints.len(), n], q)?, Tensor::zeros(vec![joints.len(), 1]))?;
        let best = (0..joints.len()).fold(0, |b, k| if q_tot[k] > q_tot[b] { k } else { b });
        if joints[best] != igm.0 {
            report.violations += 1;
        }
    }
    Ok(report)
}
