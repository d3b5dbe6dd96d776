use super::encoder::ActionEncoder;
use super::near_greedy::NearGreedySet;
use super::similarity::{entry_scores, weights_from_scores, SimilarityWeights, WeightRule};
use crate::env::JointAction;
use crate::error::{Error, Result};
use crate::nn::{ParamSet, Tensor};
use crate::scalar::Real;
use crate::transition::Transition;
use crate::vd::{NetworkPair, NextStep};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QsimSettings<T> {
    pub rule: WeightRule<T>,
    pub gamma: T,
    pub double_q: bool,
}

/// Everything that went into one non-terminal target.
#[derive(Debug, Clone, PartialEq)]
pub struct QsimDetail<T> {
    pub set: NearGreedySet,
    pub weights: SimilarityWeights<T>,
    /// `Q_tar(τ′, c; θ⁻)` per entry of `set`.
    pub candidate_values: Vec<T>,
    /// `Σ W·Q_tar(c)`.
    pub value: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QsimTargets<T> {
    pub targets: Vec<T>,
    /// `None` for terminal transitions.
    pub details: Vec<Option<QsimDetail<T>>>,
}

/// `Σ_k w_k·v_k`.
pub fn weighted_value<T: Real>(weights: &[T], values: &[T]) -> Result<T> {
    if weights.len() != values.len() {
        return Err(Error::shape("weighted_value", weights.len(), values.len()));
    }
    Ok(weights.iter().zip(values).map(|(&w, &v)| w * v).sum())
}

/// Similarity-weighted targets `Y = r + γ·Σ_{(i,j)} (w_ij / N)·Q_tar(τ′, c^j_i)`,
/// with `Y = r` for terminal transitions. Scores come from `scores`, which
/// receives the near-greedy set of every non-terminal item (with its batch
/// index) and returns one score vector per set.
pub fn qsim_targets_from_scores<T: Real>(
    pair: &NetworkPair<T>,
    batch: &[&Transition<T>],
    rewards: &[T],
    settings: &QsimSettings<T>,
    scores: impl FnOnce(&[(usize, &NearGreedySet)]) -> Result<Vec<Vec<T>>>,
) -> Result<QsimTargets<T>> {
    if rewards.len() != batch.len() {
        return Err(Error::shape("qsim_targets", batch.len(), rewards.len()));
    }
    let mut targets = rewards.to_vec();
    let mut details = vec![None; batch.len()];
    let live: Vec<usize> = (0..batch.len()).filter(|&b| !batch[b].terminal).collect();
    if live.is_empty() {
        return Ok(QsimTargets { targets, details });
    }
    let sub: Vec<&Transition<T>> = live.iter().map(|&b| batch[b]).collect();
    let next = NextStep::compute(pair, &sub, settings.double_q)?;
    let sets = next
        .anchors
        .iter()
        .zip(&sub)
        .map(|(anchor, t)| NearGreedySet::build(anchor, &t.next_avail))
        .collect::<Result<Vec<_>>>()?;

    let indexed: Vec<(usize, &NearGreedySet)> = live.iter().copied().zip(&sets).collect();
    let all_scores = scores(&indexed)?;
    if all_scores.len() != sets.len() {
        return Err(Error::shape("qsim scores", sets.len(), all_scores.len()));
    }

    let requests: Vec<(usize, &JointAction)> =
        sets.iter().enumerate().flat_map(|(k, set)| set.entries().iter().map(move |e| (k, &e.joint))).collect();
    let values = next.joint_values(&pair.nets, &pair.target, &requests)?;

    let mut offset = 0;
    for ((&b, set), s) in live.iter().zip(sets).zip(all_scores) {
        let weights = weights_from_scores(&set, &s, &settings.rule)?;
        let candidate_values = values[offset..offset + set.len()].to_vec();
        offset += set.len();
        let value = weighted_value(&weights.global(), &candidate_values)?;
        targets[b] += settings.gamma * value;
        details[b] = Some(QsimDetail { set, weights, candidate_values, value });
    }
    Ok(QsimTargets { targets, details })
}

/// [`qsim_targets_from_scores`] with cosine scores from the encoder, computed
/// in one batched pass over every `(item, agent, action)` entry.
pub fn qsim_targets<T: Real>(
    pair: &NetworkPair<T>,
    encoder: &ActionEncoder,
    enc_params: &ParamSet<T>,
    batch: &[&Transition<T>],
    rewards: &[T],
    settings: &QsimSettings<T>,
) -> Result<QsimTargets<T>> {
    qsim_targets_from_scores(pair, batch, rewards, settings, |sets| {
        let mut rows = Vec::new();
        let mut actions = Vec::new();
        for &(b, set) in sets {
            let t = batch[b];
            for e in set.entries() {
                rows.push(encoder.context(&t.next_obs[e.agent], &t.next_state)?);
                actions.push(e.action);
            }
        }
        if rows.is_empty() {
            return Ok(vec![Vec::new(); sets.len()]);
        }
        let embeddings = encoder.encode_batch(enc_params, Tensor::from_rows(&rows)?, &actions)?;
        let mut offset = 0;
        Ok(sets
            .iter()
            .map(|&(_, set)| {
                let s = entry_scores(set, &embeddings, offset);
                offset += set.len();
                s
            })
            .collect())
    })
}

/// Single-transition `Y_QSIM` on the raw reward.
pub fn qsim_target<T: Real>(
    pair: &NetworkPair<T>,
    encoder: &ActionEncoder,
    enc_params: &ParamSet<T>,
    t: &Transition<T>,
    settings: &QsimSettings<T>,
) -> Result<T> {
    Ok(qsim_targets(pair, encoder, enc_params, &[t], &[t.reward], settings)?.targets[0])
}
