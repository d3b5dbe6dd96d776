use std::io::Write;

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::sum::NeumaierSum;
use crate::error::{Error, Result};
use crate::rng::{substream, Stream};

/// Largest joint-action count `|A|^N` a trial may draw.
pub const DEFAULT_CAP: u64 = 10_000_000;
const CHUNK: u64 = 2048;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasEstimate {
    pub agents: u32,
    pub actions: u32,
    pub sigma: f64,
    pub trials: u64,
    /// Mean over trials of the maximum of `|A|^N` iid `N(0, σ²)` draws.
    pub empirical: f64,
    pub std_err: f64,
    /// `σ·√(2N ln|A|)`.
    pub bound: f64,
}

impl BiasEstimate {
    /// `empirical / bound`; `NaN` when the bound is zero.
    pub fn ratio(&self) -> f64 {
        if self.bound == 0.0 {
            f64::NAN
        } else {
            self.empirical / self.bound
        }
    }
}

pub fn bias_bound(agents: u32, actions: u32, sigma: f64) -> f64 {
    sigma * (2.0 * agents as f64 * (actions as f64).ln()).sqrt()
}

/// Monte Carlo maximization bias with identical true values. Trials are
/// split into fixed chunks with their own substreams and reduced in chunk
/// order, so the result is independent of the thread count.
pub fn mc_max_bias(agents: u32, actions: u32, sigma: f64, trials: u64, seed: u64, cap: u64) -> Result<BiasEstimate> {
    if agents == 0 || actions == 0 {
        return Err(Error::invalid("agents/actions", "must be positive"));
    }
    if trials == 0 {
        return Err(Error::invalid("trials", "must be positive"));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::invalid("sigma", "must be finite and non-negative"));
    }
    let size = (actions as f64).powi(agents as i32);
    if size > cap as f64 {
        return Err(Error::CapExceeded { size, cap });
    }
    let draws = size as usize;
    let chunks = trials.div_ceil(CHUNK);
    let partial: Vec<(NeumaierSum, NeumaierSum)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(seed, Stream::Indexed(c));
            let n = CHUNK.min(trials - c * CHUNK);
            let (mut s, mut s2) = (NeumaierSum::default(), NeumaierSum::default());
            for _ in 0..n {
                let mut best = f64::NEG_INFINITY;
                for _ in 0..draws {
                    let z: f64 = rng.sample(StandardNormal);
                    best = best.max(z);
                }
                let x = sigma * best;
                s.add(x);
                s2.add(x * x);
            }
            (s, s2)
        })
        .collect();
    let (mut s, mut s2) = (NeumaierSum::default(), NeumaierSum::default());
    for (a, b) in &partial {
        s.merge(a);
        s2.merge(b);
    }
    let n = trials as f64;
    let mean = s.value() / n;
    let var = if trials > 1 { ((s2.value() - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    Ok(BiasEstimate {
        agents,
        actions,
        sigma,
        trials,
        empirical: mean,
        std_err: (var / n).sqrt(),
        bound: bias_bound(agents, actions, sigma),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasSweepConfig {
    pub agent_counts: Vec<u32>,
    pub action_sizes: Vec<u32>,
    pub sigma: f64,
    pub trials: u64,
    pub seed: u64,
    pub cap: u64,
}

/// One estimate per `(N, |A|)` pair, `|A|`-major. Each pair gets its own
/// seed offset so rows are independent.
pub fn bias_sweep(cfg: &BiasSweepConfig) -> Result<Vec<BiasEstimate>> {
    for &a in &cfg.action_sizes {
        for &n in &cfg.agent_counts {
            let size = (a as f64).powi(n as i32);
            if size > cfg.cap as f64 {
                return Err(Error::CapExceeded { size, cap: cfg.cap });
            }
        }
    }
    let mut rows = Vec::new();
    for &a in &cfg.action_sizes {
        for &n in &cfg.agent_counts {
            let seed = cfg.seed.wrapping_add(((a as u64) << 32) | n as u64);
            rows.push(mc_max_bias(n, a, cfg.sigma, cfg.trials, seed, cfg.cap)?);
        }
    }
    Ok(rows)
}

pub const BIAS_HEADER: [&str; 8] = ["N", "A", "sigma", "trials", "empirical_bias", "std_err", "bound", "ratio"];

pub fn write_bias_csv(rows: &[BiasEstimate], out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BIAS_HEADER)?;
    for r in rows {
        w.write_record([
            r.agents.to_string(),
            r.actions.to_string(),
            r.sigma.to_string(),
            r.trials.to_string(),
            r.empirical.to_string(),
            r.std_err.to_string(),
            r.bound.to_string(),
            r.ratio().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_closed_form() {
        assert!((bias_bound(2, 3, 1.0) - (4.0 * 3f64.ln()).sqrt()).abs() < 1e-15);
        assert!((bias_bound(2, 3, 1.0) - 2.09629).abs() < 1e-5);
        assert_eq!(bias_bound(1, 1, 1.0), 0.0);
    }

    #[test]
    fn zero_sigma_is_exactly_zero() {
        let e = mc_max_bias(3, 4, 0.0, 1000, 1, DEFAULT_CAP).unwrap();
        assert_eq!((e.empirical, e.std_err, e.bound), (0.0, 0.0, 0.0));
    }

    #[test]
    fn cap_is_enforced() {
        assert!(matches!(mc_max_bias(5, 10, 1.0, 1, 0, 1000), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn scales_linearly_in_sigma() {
        let a = mc_max_bias(2, 3, 1.0, 5000, 9, DEFAULT_CAP).unwrap();
        let b = mc_max_bias(2, 3, 2.0, 5000, 9, DEFAULT_CAP).unwrap();
        assert!((b.empirical - 2.0 * a.empirical).abs() < 1e-12);
        assert!((b.bound - 2.0 * a.bound).abs() < 1e-12);
    }

    #[test]
    fn thread_count_does_not_change_result() {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| mc_max_bias(2, 4, 1.0, 10_000, 3, DEFAULT_CAP).unwrap())
        };
        assert_eq!(run(1), run(3));
    }
}
