//! Maximization-bias estimation, the lower-bound falsification harness,
//! estimation-error summaries and numerical property suites.

mod bias;
mod delta_q;
mod suites;
mod sum;
mod theorem2;

pub use bias::{bias_bound, bias_sweep, mc_max_bias, write_bias_csv, BiasEstimate, BiasSweepConfig, BIAS_HEADER, DEFAULT_CAP};
pub use delta_q::{
    compare_delta_q, delta_q, load_run_set, quantile, read_delta_q, Series, DeltaQComparison, RunSet, Spread, StepMedians,
};
pub use suites::{gradient_check, igm_exactness, max_gradient_error, qmix_monotonicity, LossFn, SuiteReport};
pub use sum::{neumaier_sum, NeumaierSum};
pub use theorem2::{evaluate_instance, verify_theorem2, Fault, Instance, Theorem2Report, TOLERANCE};
