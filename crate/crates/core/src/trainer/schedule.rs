use serde::{Deserialize, Serialize};

/// Linear ε anneal from `start` to `end` over `anneal_steps` environment steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub anneal_steps: u64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self { start: 1.0, end: 0.05, anneal_steps: 50_000 }
    }
}

impl EpsilonSchedule {
    pub fn value(&self, step: u64) -> f64 {
        if step >= self.anneal_steps {
            return self.end;
        }
        self.start + (self.end - self.start) * (step as f64 / self.anneal_steps as f64)
    }
}

/// Running reward mean and variance; rewards are standardized as
/// `(r − μ) / σ`. Starts at `μ = 0, σ² = 1` with a tiny pseudo-count, so the
/// first observations dominate immediately.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardNormalizer {
    mean: f64,
    var: f64,
    count: f64,
}

impl Default for RewardNormalizer {
    fn default() -> Self {
        Self { mean: 0.0, var: 1.0, count: 1e-4 }
    }
}

impl RewardNormalizer {
    /// Merges a batch of rewards (parallel-variance update).
    pub fn update(&mut self, rewards: &[f64]) {
        if rewards.is_empty() {
            return;
        }
        let n = rewards.len() as f64;
        let mean = rewards.iter().sum::<f64>() / n;
        let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
        let delta = mean - self.mean;
        let total = self.count + n;
        let m2 = self.var * self.count + var * n + delta * delta * self.count * n / total;
        self.mean += delta * n / total;
        self.var = m2 / total;
        self.count = total;
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn std(&self) -> f64 {
        self.var.sqrt()
    }

    pub fn normalize(&self, r: f64) -> f64 {
        let sd = self.std();
        if sd > 1e-8 {
            (r - self.mean) / sd
        } else {
            r - self.mean
        }
    }
}
