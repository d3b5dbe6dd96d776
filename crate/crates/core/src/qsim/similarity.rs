use super::encoder::ActionEncoder;
use super::near_greedy::NearGreedySet;
use crate::error::{Error, Result};
use crate::nn::{ParamSet, Tensor};
use crate::scalar::Real;

/// How similarity scores become weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightRule<T> {
    /// Inverse temperature `κ ≥ 0`.
    pub kappa: T,
    /// Entries scoring below this are dropped (the anchor never is).
    /// Any value `≤ −1` keeps everything.
    pub threshold: T,
    /// Keep only the `n` best surviving entries per agent.
    pub top_n: Option<usize>,
}

impl<T: Real> WeightRule<T> {
    pub fn new(kappa: T, threshold: T, top_n: Option<usize>) -> Self {
        Self { kappa, threshold, top_n }
    }

    /// `κ = 0` with nothing masked: uniform weights over each agent's deviations.
    pub fn uniform() -> Self {
        Self { kappa: T::zero(), threshold: -T::one(), top_n: None }
    }
}

/// Scores and weights aligned with the entries of a [`NearGreedySet`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityWeights<T> {
    /// Cosine similarity to the agent's anchor embedding, in `[-1, 1]`.
    pub scores: Vec<T>,
    /// Per-agent softmax weights; each agent's entries sum to one.
    pub weights: Vec<T>,
    pub kept: Vec<bool>,
    pub n_agents: usize,
}

impl<T: Real> SimilarityWeights<T> {
    /// Weights over the whole set: per-agent weights divided by `N`, so the
    /// total is one.
    pub fn global(&self) -> Vec<T> {
        let n = T::lit(self.n_agents as f64);
        self.weights.iter().map(|&w| w / n).collect()
    }
}

/// Cosine similarity; zero when either vector has zero norm. Clamped to `[-1, 1]`.
pub fn cosine<T: Real>(a: &[T], b: &[T]) -> T {
    let dot: T = a.iter().zip(b).map(|(&x, &y)| x * y).sum();
    let na: T = a.iter().map(|&x| x * x).sum::<T>().sqrt();
    let nb: T = b.iter().map(|&x| x * x).sum::<T>().sqrt();
    if na == T::zero() || nb == T::zero() {
        return T::zero();
    }
    (dot / (na * nb)).max(-T::one()).min(T::one())
}

/// Turns raw per-entry scores into weights. The anchor entry of every agent
/// is forced to score 1 and always survives masking.
pub fn weights_from_scores<T: Real>(set: &NearGreedySet, scores: &[T], rule: &WeightRule<T>) -> Result<SimilarityWeights<T>> {
    if scores.len() != set.len() {
        return Err(Error::shape("similarity_weights", set.len(), scores.len()));
    }
    if rule.kappa.is_nan() || rule.kappa < T::zero() {
        return Err(Error::invalid("kappa", "must be non-negative"));
    }
    if rule.top_n == Some(0) {
        return Err(Error::invalid("top_n", "must be positive"));
    }
    let mut scores = scores.to_vec();
    let mut kept = vec![false; set.len()];
    let mut weights = vec![T::zero(); set.len()];

    for agent in 0..set.n_agents() {
        let range = set.agent_range(agent);
        let anchor = set.anchor_entry(agent);
        scores[anchor] = T::one();

        let mut survivors: Vec<usize> = range.filter(|&k| k == anchor || scores[k] >= rule.threshold).collect();
        if let Some(n) = rule.top_n {
            // anchor first, then by descending score, ties by entry order
            survivors.sort_by(|&a, &b| {
                (b == anchor).cmp(&(a == anchor)).then(scores[b].partial_cmp(&scores[a]).expect("finite scores")).then(a.cmp(&b))
            });
            survivors.truncate(n);
            survivors.sort_unstable();
        }

        let top = survivors.iter().map(|&k| rule.kappa * scores[k]).fold(T::neg_infinity(), T::max);
        let exps: Vec<T> = survivors.iter().map(|&k| (rule.kappa * scores[k] - top).exp()).collect();
        let total: T = exps.iter().copied().sum();
        for (&k, e) in survivors.iter().zip(exps) {
            kept[k] = true;
            weights[k] = e / total;
        }
    }
    Ok(SimilarityWeights { scores, weights, kept, n_agents: set.n_agents() })
}

/// Scores every entry by the cosine between `E_φ(o′_i, s′, a^j_i)` and
/// `E_φ(o′_i, s′, a*_i)`, then applies [`weights_from_scores`].
pub fn similarity_weights<T: Real>(
    encoder: &ActionEncoder,
    params: &ParamSet<T>,
    next_obs: &[Vec<T>],
    next_state: &[T],
    set: &NearGreedySet,
    rule: &WeightRule<T>,
) -> Result<SimilarityWeights<T>> {
    let rows = set
        .entries()
        .iter()
        .map(|e| encoder.context(&next_obs[e.agent], next_state))
        .collect::<Result<Vec<_>>>()?;
    let actions: Vec<usize> = set.entries().iter().map(|e| e.action).collect();
    let embeddings = encoder.encode_batch(params, Tensor::from_rows(&rows)?, &actions)?;
    let scores = entry_scores(set, &embeddings, 0);
    weights_from_scores(set, &scores, rule)
}

/// Cosine scores for one set whose entry embeddings occupy rows
/// `offset..offset + set.len()` of `embeddings`.
pub(crate) fn entry_scores<T: Real>(set: &NearGreedySet, embeddings: &Tensor<T>, offset: usize) -> Vec<T> {
    let mut scores = vec![T::zero(); set.len()];
    for agent in 0..set.n_agents() {
        let anchor = embeddings.row(offset + set.anchor_entry(agent));
        for k in set.agent_range(agent) {
            scores[k] = cosine(anchor, embeddings.row(offset + k));
        }
    }
    scores
}
