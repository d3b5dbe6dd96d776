//! Similarity-weighted TD targets over the near-greedy joint-action space.

mod encoder;
mod export;
mod kappa;
mod near_greedy;
mod similarity;
mod target;

pub use encoder::{ActionEncoder, EncoderSpec};
pub use export::export_embeddings;
pub use kappa::KappaSchedule;
pub use near_greedy::{build_near_greedy, NearGreedyEntry, NearGreedySet};
pub use similarity::{cosine, similarity_weights, weights_from_scores, SimilarityWeights, WeightRule};
pub use target::{qsim_target, qsim_targets, qsim_targets_from_scores, weighted_value, QsimDetail, QsimSettings, QsimTargets};
