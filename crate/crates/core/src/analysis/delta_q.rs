use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{parse_config, ExperimentConfig};
use crate::qsim::KappaSchedule;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// `δ_q = Q̂ − Σ_k γ^k r_k` over the realized reward suffix.
pub fn delta_q<T: Real>(q_hat: T, rewards: &[T], gamma: T) -> T {
    let ret = rewards.iter().rev().fold(T::zero(), |acc, &r| r + gamma * acc);
    q_hat - ret
}

/// Type-7 (linear interpolation) sample quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Spread {
    pub n: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Self { n: v.len(), median: quantile(&v, 0.5), q1: quantile(&v, 0.25), q3: quantile(&v, 0.75) }
    }

    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

/// `(step, δ_q)` rows of one seed.
pub type Series = Vec<(u64, f64)>;

/// `δ_q` series of every seed of one training output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSet {
    pub label: String,
    pub config: Option<ExperimentConfig>,
    /// `(seed, [(step, δ_q)])`, seeds ascending.
    pub series: Vec<(u64, Series)>,
}

fn data_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Data { path: path.to_path_buf(), message: message.into() }
}

/// Reads `step, variant, seed, …, delta_q, …` rows from one metrics CSV.
pub fn read_delta_q(path: &Path) -> Result<(String, u64, Series)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| data_err(path, e.to_string()))?;
    let headers = r.headers().map_err(|e| data_err(path, e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| data_err(path, format!("missing column `{name}`")));
    let (c_step, c_var, c_seed, c_dq) = (col("step")?, col("variant")?, col("seed")?, col("delta_q")?);
    let (mut variant, mut seed, mut rows) = (String::new(), 0, Vec::new());
    for rec in r.records() {
        let rec = rec.map_err(|e| data_err(path, e.to_string()))?;
        let num = |c: usize| rec.get(c).unwrap_or("").trim().to_string();
        let step: u64 = num(c_step).parse().map_err(|_| data_err(path, format!("bad step `{}`", num(c_step))))?;
        let dq: f64 = num(c_dq).parse().map_err(|_| data_err(path, format!("bad delta_q `{}`", num(c_dq))))?;
        seed = num(c_seed).parse().map_err(|_| data_err(path, format!("bad seed `{}`", num(c_seed))))?;
        variant = num(c_var);
        rows.push((step, dq));
    }
    Ok((variant, seed, rows))
}

/// Loads every `seed_*/metrics.csv` under `dir`, plus the config echo from
/// the first manifest found.
pub fn load_run_set(dir: &Path) -> Result<RunSet> {
    let mut subdirs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("seed_")))
        .collect();
    subdirs.sort();
    if subdirs.is_empty() {
        return Err(data_err(dir, "no seed_<n> run directories"));
    }
    let mut config = None;
    let mut label = String::new();
    let mut series = Vec::new();
    for sub in subdirs {
        let manifest = sub.join("manifest.json");
        if config.is_none() && manifest.exists() {
            let text = fs::read_to_string(&manifest).map_err(|e| Error::io(&manifest, e))?;
            let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| data_err(&manifest, e.to_string()))?;
            let echo = v.get("config").and_then(|c| c.as_str()).ok_or_else(|| data_err(&manifest, "missing `config`"))?;
            config = Some(parse_config(echo)?);
        }
        let (variant, seed, rows) = read_delta_q(&sub.join("metrics.csv"))?;
        label = variant;
        series.push((seed, rows));
    }
    series.sort_by_key(|(s, _)| *s);
    Ok(RunSet { label, config, series })
}

/// Fields allowed to differ between compared runs.
fn algorithm_neutral(c: &ExperimentConfig) -> ExperimentConfig {
    let mut c = c.clone();
    c.variant = crate::config::Variant::Greedy;
    c.double_q = true;
    c.kappa = KappaSchedule::default();
    c.threshold = 0.0;
    c.top_n = None;
    c.use_state = true;
    c.output_dir = PathBuf::new();
    c
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepMedians {
    pub step: u64,
    pub baseline: f64,
    pub candidate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaQComparison {
    pub baseline: String,
    pub candidate: String,
    pub per_step: Vec<StepMedians>,
    /// Pooled over seeds, rows with `step ≥ 0.75·last_step`.
    pub final_quarter_baseline: Spread,
    pub final_quarter_candidate: Spread,
    /// `candidate − baseline` final-quarter medians.
    pub gap: f64,
    pub candidate_lower: bool,
}

fn by_step(set: &RunSet) -> BTreeMap<u64, Vec<f64>> {
    let mut m: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for (_, rows) in &set.series {
        for &(s, d) in rows {
            m.entry(s).or_default().push(d);
        }
    }
    m
}

fn final_quarter(set: &RunSet, last: u64) -> Vec<f64> {
    let cut = last as f64 * 0.75;
    set.series.iter().flat_map(|(_, rows)| rows.iter().filter(|(s, _)| *s as f64 >= cut).map(|&(_, d)| d)).collect()
}

/// Per-step medians and final-quarter spreads. Configs, when both are
/// known, must agree on everything except the algorithm settings.
pub fn compare_delta_q(baseline: &RunSet, candidate: &RunSet) -> Result<DeltaQComparison> {
    if let (Some(a), Some(b)) = (&baseline.config, &candidate.config) {
        if algorithm_neutral(a) != algorithm_neutral(b) {
            return Err(Error::Mismatch("configs differ outside the algorithm settings".into()));
        }
    }
    let (a, b) = (by_step(baseline), by_step(candidate));
    if a.keys().ne(b.keys()) {
        return Err(Error::Mismatch("runs report different evaluation steps".into()));
    }
    let Some(&last) = a.keys().next_back() else {
        return Err(Error::Mismatch("no metrics rows".into()));
    };
    let per_step = a
        .iter()
        .zip(&b)
        .map(|((&step, x), (_, y))| StepMedians { step, baseline: Spread::of(x).median, candidate: Spread::of(y).median })
        .collect();
    let fb = Spread::of(&final_quarter(baseline, last));
    let fc = Spread::of(&final_quarter(candidate, last));
    Ok(DeltaQComparison {
        baseline: baseline.label.clone(),
        candidate: candidate.label.clone(),
        per_step,
        final_quarter_baseline: fb,
        final_quarter_candidate: fc,
        gap: fc.median - fb.median,
        candidate_lower: fc.median < fb.median,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_q_examples() {
        assert_eq!(delta_q(5.0, &[4.0], 0.3), 1.0);
        assert_eq!(delta_q(0.0, &[1.0, 1.0], 0.5), -1.5);
        assert_eq!(delta_q(1.5, &[1.0, 1.0], 0.5), 0.0);
    }

    #[test]
    fn type7_quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.25), 1.75);
        assert_eq!(quantile(&v, 0.75), 3.25);
        assert_eq!(quantile(&[7.0], 0.3), 7.0);
    }

    #[test]
    fn self_comparison_has_zero_gap() {
        let set = RunSet { label: "x".into(), config: None, series: vec![(1, vec![(0, 1.0), (10, 2.0)]), (2, vec![(0, 3.0), (10, 5.0)])] };
        let c = compare_delta_q(&set, &set).unwrap();
        assert_eq!(c.gap, 0.0);
        assert!(!c.candidate_lower);
        assert_eq!(c.per_step[1].baseline, 3.5);
    }
}
