//! Subcommand implementations behind the `qsim-lab` binary.

use std::fs;
use std::io::Write;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;

use qsim_core::analysis::{
    bias_sweep, compare_delta_q, gradient_check, igm_exactness, load_run_set, qmix_monotonicity, verify_theorem2,
    write_bias_csv, BiasSweepConfig, Fault, DEFAULT_CAP,
};
use qsim_core::config::load_config;
use qsim_core::trainer::run_seed;
use qsim_core::Error;

pub const THREADS_ENV: &str = "QSIM_LAB_THREADS";

#[derive(Debug, Parser)]
#[command(name = "qsim-lab", version, about = "Similarity-weighted value decomposition experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train every seed of a config; one `seed_<n>/` directory per seed.
    Train(TrainArgs),
    /// Monte Carlo maximization bias against its closed-form bound.
    AnalyzeBias(BiasArgs),
    /// Lower-bound falsification plus gradient, monotonicity and IGM suites.
    Verify(VerifyArgs),
    /// Median estimation error of two training output directories.
    CompareDeltaQ(CompareArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// TOML experiment config.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `output_dir`.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BiasArgs {
    /// Agent counts: `3`, `1..5` (inclusive) or `1,2,4`.
    #[arg(long, value_parser = parse_counts, default_value = "1..5")]
    pub agents: Counts,
    /// Per-agent action counts, same syntax.
    #[arg(long, value_parser = parse_counts, default_value = "5")]
    pub actions: Counts,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest allowed `|A|^N`.
    #[arg(long, default_value_t = DEFAULT_CAP)]
    pub cap: u64,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON destination; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Harness self-test: drop the 1/N agent normalization.
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Output directory of the baseline run.
    #[arg(long)]
    pub baseline: PathBuf,
    /// Output directory of the candidate run.
    #[arg(long)]
    pub candidate: PathBuf,
    /// JSON destination; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Positive counts parsed from `n`, `a..b` (inclusive) or comma lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counts(pub Vec<u32>);

pub fn parse_counts(s: &str) -> Result<Counts, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim) {
        let range: RangeInclusive<u32> = match part.split_once("..") {
            Some((a, b)) => {
                let a: u32 = a.trim().parse().map_err(|_| format!("bad range start in `{part}`"))?;
                let b: u32 = b.trim().trim_start_matches('=').parse().map_err(|_| format!("bad range end in `{part}`"))?;
                if a > b {
                    return Err(format!("empty range `{part}`"));
                }
                a..=b
            }
            None => {
                let n: u32 = part.parse().map_err(|_| format!("expected a count, got `{part}`"))?;
                n..=n
            }
        };
        if *range.start() == 0 {
            return Err("counts must be positive".into());
        }
        out.extend(range);
    }
    Ok(Counts(out))
}

/// Exit status with a message for standard error.
#[derive(Debug)]
pub enum Failure {
    /// Exit 1.
    Violation(String),
    /// Exit 2.
    Usage(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Violation(_) => 1,
            Failure::Usage(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Violation(m) | Failure::Usage(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Usage(format!("{}: {e}", path.display()))
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
            }
            fs::write(p, bytes).map_err(|e| io_failure(p, e))
        }
        None => std::io::stdout().write_all(bytes).map_err(|e| io_failure(Path::new("<stdout>"), e)),
    }
}

/// Builds the global thread pool from `QSIM_LAB_THREADS` when set.
pub fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Usage(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
    // a pool may already exist when called twice in one process
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn execute(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match cli.command {
        Command::Train(a) => train(a),
        Command::AnalyzeBias(a) => analyze_bias(a),
        Command::Verify(a) => verify(a),
        Command::CompareDeltaQ(a) => compare(a),
    }
}

fn train(args: TrainArgs) -> Result<(), Failure> {
    let mut cfg = load_config(&args.config)?;
    if let Some(d) = args.output_dir {
        cfg.output_dir = d;
    }
    fs::create_dir_all(&cfg.output_dir).map_err(|e| io_failure(&cfg.output_dir, e))?;
    eprintln!(
        "training {} on {} for {} seed(s) into {}",
        cfg.variant.name(),
        cfg.env.name(),
        cfg.seeds.len(),
        cfg.output_dir.display()
    );
    let results: Vec<_> = cfg.seeds.par_iter().map(|&seed| run_seed::<f64>(&cfg, seed)).collect();
    let mut failed = Vec::new();
    for (seed, r) in cfg.seeds.iter().zip(results) {
        match r {
            Ok(out) => {
                let last = out.rows.last().map_or(String::from("-"), |r| r.eval_return.to_string());
                eprintln!("seed {seed}: final eval return {last}, greedy {:?}", out.final_greedy.0);
            }
            Err(e) => failed.push(format!("seed {seed}: {e}")),
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Usage(failed.join("\n")))
    }
}

fn analyze_bias(args: BiasArgs) -> Result<(), Failure> {
    let sweep = BiasSweepConfig {
        agent_counts: args.agents.0,
        action_sizes: args.actions.0,
        sigma: args.sigma,
        trials: args.trials,
        seed: args.seed,
        cap: args.cap,
    };
    let rows = bias_sweep(&sweep).map_err(|e| match e {
        Error::CapExceeded { size, cap } => Failure::Usage(format!(
            "joint action space |A|^N = {size} exceeds the cap {cap}; lower --agents/--actions or raise --cap"
        )),
        other => other.into(),
    })?;
    let mut buf = Vec::new();
    write_bias_csv(&rows, &mut buf).map_err(|e| Failure::Usage(e.to_string()))?;
    emit(args.out.as_deref(), &buf)
}

fn verify(args: VerifyArgs) -> Result<(), Failure> {
    let fault = if args.inject_fault { Fault::SkipAgentNormalization } else { Fault::None };
    eprintln!("verifying the lower bound on {} samples", args.samples);
    let t2 = verify_theorem2(args.samples, args.seed, fault)?;
    eprintln!("running gradient, monotonicity and IGM suites");
    let suites = [gradient_check(100, args.seed, 1e-4)?, qmix_monotonicity(1000, args.seed)?, igm_exactness(500, args.seed)?];
    let suite_violations: u64 = suites.iter().map(|s| s.violations).sum();
    let mut report = json!({
        "samples": t2.samples,
        "violations": t2.violations,
        "worst_margin": t2.worst_margin,
        "suites": suites,
    });
    if let Some(c) = &t2.counterexample {
        report["counterexample"] = serde_json::to_value(c).expect("instance serializes");
    }
    let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    emit(args.out.as_deref(), text.as_bytes())?;
    if t2.violations + suite_violations > 0 {
        let detail = t2.counterexample.map(|c| serde_json::to_string(&c).expect("instance serializes")).unwrap_or_default();
        return Err(Failure::Violation(format!(
            "{} lower-bound violation(s), {suite_violations} suite violation(s) {detail}",
            t2.violations
        )));
    }
    Ok(())
}

fn compare(args: CompareArgs) -> Result<(), Failure> {
    let base = load_run_set(&args.baseline)?;
    let cand = load_run_set(&args.candidate)?;
    let c = compare_delta_q(&base, &cand)?;
    eprintln!(
        "final-quarter median delta_q: {} {:.6} vs {} {:.6}",
        c.baseline, c.final_quarter_baseline.median, c.candidate, c.final_quarter_candidate.median
    );
    let text = serde_json::to_string_pretty(&c).expect("comparison serializes") + "\n";
    emit(args.out.as_deref(), text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn count_syntax() {
        assert_eq!(parse_counts("1..5").unwrap().0, vec![1, 2, 3, 4, 5]);
        assert_eq!(parse_counts("3").unwrap().0, vec![3]);
        assert_eq!(parse_counts("1,2..3").unwrap().0, vec![1, 2, 3]);
        assert!(parse_counts("0").is_err());
        assert!(parse_counts("5..2").is_err());
        assert!(parse_counts("x").is_err());
    }
}
