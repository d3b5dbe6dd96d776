//! Episode collection, replay, interleaved encoder and TD updates, and the
//! per-seed run loop.

mod buffer;
mod collect;
mod learner;
mod run;
mod schedule;

pub use buffer::ReplayBuffer;
pub use collect::{collect_episode, select_actions};
pub use learner::{Learner, LearnerConfig, TrainRecord};
pub use run::{build_env, build_learner, manifest, run_seed, seed_dir, Evaluation, MetricsRow, RunOutcome, Trainer, METRICS_HEADER};
pub use schedule::{EpsilonSchedule, RewardNormalizer};
