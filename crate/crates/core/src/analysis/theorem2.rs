use rand::Rng as _;
use serde::Serialize;

use crate::env::JointAction;
use crate::error::Result;
use crate::qsim::{qsim_targets_from_scores, weighted_value, QsimSettings, WeightRule};
use crate::rng::{substream, Rng, Stream};
use crate::transition::Transition;
use crate::vd::{greedy_targets, tabular_pair_with, MixerKind, NetworkPair};

pub const TOLERANCE: f64 = 1e-9;

/// Deliberate defects for exercising the harness itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fault {
    #[default]
    None,
    /// Sum per-agent weights without the `1/N` mixture, so the total is `N`.
    SkipAgentNormalization,
}

/// One randomized check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Instance {
    pub agents: usize,
    pub actions: usize,
    pub mixer: &'static str,
    pub kappa: f64,
    pub threshold: f64,
    pub top_n: Option<usize>,
    pub tables: Vec<Vec<f64>>,
    pub masks: Vec<Vec<bool>>,
    pub scores: Vec<f64>,
    pub anchor: Vec<usize>,
    pub v_qsim: f64,
    pub v_greedy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem2Report {
    pub samples: u64,
    pub violations: u64,
    /// `min(V_Greedy − V_QSIM)` over all samples; negative means a violation.
    pub worst_margin: f64,
    #[serde(skip)]
    pub counterexample: Option<Instance>,
}

fn random_instance(rng: &mut Rng) -> (Vec<Vec<f64>>, Vec<Vec<bool>>, MixerKind) {
    let agents = rng.random_range(1..=4);
    let actions = rng.random_range(2..=5);
    let tables = (0..agents).map(|_| (0..actions).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
    let masks = (0..agents)
        .map(|_| {
            let mut m: Vec<bool> = (0..actions).map(|_| rng.random::<f64>() < 0.8).collect();
            if !m.iter().any(|&x| x) {
                m[rng.random_range(0..actions)] = true;
            }
            m
        })
        .collect();
    let mixer = if rng.random::<bool>() { MixerKind::Vdn } else { MixerKind::Qmix };
    (tables, masks, mixer)
}

fn transition(n: usize, state: Vec<f64>, masks: Vec<Vec<bool>>) -> Transition<f64> {
    Transition {
        state: state.clone(),
        obs: vec![vec![1.0]; n],
        avail: masks.clone(),
        actions: JointAction(vec![0; n]),
        reward: 0.0,
        next_state: state,
        next_obs: vec![vec![1.0]; n],
        next_avail: masks,
        terminal: false,
    }
}

/// `(V_QSIM, V_Greedy, anchor, scores)` for one instance with `γ = 1`,
/// `r = 0`; the anchor is the target network's own greedy action.
pub fn evaluate_instance(
    pair: &NetworkPair<f64>,
    t: &Transition<f64>,
    rule: WeightRule<f64>,
    scores: &mut dyn FnMut(usize) -> Vec<f64>,
    fault: Fault,
) -> Result<(f64, f64, Vec<usize>, Vec<f64>)> {
    let settings = QsimSettings { rule, gamma: 1.0, double_q: false };
    let mut used = Vec::new();
    let out = qsim_targets_from_scores(pair, &[t], &[0.0], &settings, |sets| {
        used = scores(sets[0].1.len());
        Ok(vec![used.clone()])
    })?;
    let detail = out.details[0].as_ref().expect("non-terminal");
    let v_qsim = match fault {
        Fault::None => detail.value,
        Fault::SkipAgentNormalization => weighted_value(&detail.weights.weights, &detail.candidate_values)?,
    };
    let v_greedy = greedy_targets(pair, &[t], &[0.0], 1.0, false)?[0];
    Ok((v_qsim, v_greedy, detail.set.anchor().0.clone(), detail.weights.scores.clone()))
}

/// Randomized falsification of `V_QSIM ≤ V_Greedy`. Every sample also
/// checks that weights concentrated on the anchor reproduce `V_Greedy`
/// exactly; a failure of either counts as a violation.
pub fn verify_theorem2(samples: u64, seed: u64, fault: Fault) -> Result<Theorem2Report> {
    let mut rng = substream(seed, Stream::Indexed(2));
    let mut report = Theorem2Report { samples, violations: 0, worst_margin: f64::INFINITY, counterexample: None };
    for k in 0..samples {
        let (tables, masks, mixer) = random_instance(&mut rng);
        let (n, a) = (tables.len(), tables[0].len());
        let state_width = 3;
        let state: Vec<f64> = (0..state_width).map(|_| rng.random_range(-1.0..1.0)).collect();
        let main: Vec<Vec<f64>> = tables.iter().map(|r| r.iter().map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
        let pair = tabular_pair_with(&main, &tables, mixer, state_width, seed ^ k)?;
        let t = transition(n, state, masks.clone());

        let kappa = rng.random_range(0.0..10.0);
        let threshold = rng.random_range(-1.2..1.2);
        let top_n = if rng.random::<bool>() { Some(rng.random_range(1..=a)) } else { None };
        let rule = WeightRule::new(kappa, threshold, top_n);
        let mut draw = |len: usize| (0..len).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
        let (v_qsim, v_greedy, anchor, scores) = evaluate_instance(&pair, &t, rule, &mut draw, fault)?;

        // anchor-only weights: every deviation falls below the threshold
        let concentrated = WeightRule::new(kappa, 1.5, None);
        let (v_anchor, _, _, _) = evaluate_instance(&pair, &t, concentrated, &mut |len| vec![0.0; len], fault)?;

        let margin = v_greedy - v_qsim;
        let equality_ok = (v_anchor - v_greedy).abs() <= TOLERANCE * (1.0 + v_greedy.abs());
        report.worst_margin = report.worst_margin.min(margin);
        if margin < -TOLERANCE || !equality_ok {
            report.violations += 1;
            if report.counterexample.is_none() {
                report.counterexample = Some(Instance {
                    agents: n,
                    actions: a,
                    mixer: match mixer {
                        MixerKind::Vdn => "vdn",
                        MixerKind::Qmix => "qmix",
                    },
                    kappa,
                    threshold,
                    top_n,
                    tables,
                    masks,
                    scores,
                    anchor,
                    v_qsim,
                    v_greedy,
                });
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_sample_report() {
        let r = verify_theorem2(1, 0, Fault::None).unwrap();
        assert_eq!((r.samples, r.violations), (1, 0));
        assert!(r.worst_margin >= -TOLERANCE);
    }

    #[test]
    fn injected_fault_is_caught() {
        let r = verify_theorem2(200, 5, Fault::SkipAgentNormalization).unwrap();
        assert!(r.violations > 0);
        assert!(r.counterexample.is_some());
    }
}
