use proptest::prelude::*;
use qsim_core::analysis::{
    bias_bound, bias_sweep, compare_delta_q, delta_q, mc_max_bias, quantile, verify_theorem2, BiasSweepConfig, Fault,
    RunSet, Spread, DEFAULT_CAP,
};

/// `E[max of n iid N(0,1)] = ∫ x·n·φ(x)·Φ(x)^(n−1) dx`, by the trapezoid rule
/// with `Φ` accumulated on the same grid.
fn expected_max_normal(n: u32) -> f64 {
    let (lo, hi, steps) = (-12.0f64, 12.0f64, 240_000);
    let h = (hi - lo) / steps as f64;
    let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let (mut cdf, mut total) = (0.0, 0.0);
    let mut prev = 0.0;
    for k in 1..=steps {
        let (x0, x1) = (lo + (k - 1) as f64 * h, lo + k as f64 * h);
        cdf += 0.5 * h * (phi(x0) + phi(x1));
        let f = x1 * n as f64 * phi(x1) * cdf.powi(n as i32 - 1);
        total += 0.5 * h * (prev + f);
        prev = f;
    }
    total
}

#[test]
fn oracle_integration_matches_closed_form() {
    assert!((expected_max_normal(2) - 1.0 / std::f64::consts::PI.sqrt()).abs() < 1e-6);
    assert!((expected_max_normal(3) - 1.5 / std::f64::consts::PI.sqrt()).abs() < 1e-6);
}

#[test]
fn two_normals_spot_check() {
    let est = mc_max_bias(1, 2, 1.0, 1_000_000, 7, DEFAULT_CAP).unwrap();
    assert!((est.empirical - expected_max_normal(2)).abs() < 0.01);
}

#[test]
fn estimates_agree_with_integration_oracle() {
    for (n, a) in [(1u32, 5u32), (2, 3), (3, 2), (2, 5)] {
        let est = mc_max_bias(n, a, 1.0, 100_000, 3, DEFAULT_CAP).unwrap();
        let want = expected_max_normal(a.pow(n));
        assert!((est.empirical - want).abs() < 4.0 * est.std_err, "N={n} A={a}: {} vs {want}", est.empirical);
        assert!(est.empirical <= est.bound);
    }
}

#[test]
fn sigma_scales_linearly() {
    let a = mc_max_bias(2, 3, 1.0, 20_000, 1, DEFAULT_CAP).unwrap();
    let b = mc_max_bias(2, 3, 2.5, 20_000, 1, DEFAULT_CAP).unwrap();
    assert!((b.empirical - 2.5 * a.empirical).abs() < 1e-9);
}

#[test]
fn bound_values() {
    assert!((bias_bound(2, 3, 1.0) - 2.09629).abs() < 1e-5);
    assert_eq!(bias_bound(3, 1, 1.0), 0.0);
    assert!((bias_bound(1, 5, 2.0) - 2.0 * (2.0 * 5f64.ln()).sqrt()).abs() < 1e-15);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let run = |threads| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| mc_max_bias(3, 4, 1.0, 30_000, 11, DEFAULT_CAP).unwrap())
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn sweep_rejects_oversized_spaces() {
    let cfg = BiasSweepConfig { agent_counts: vec![1, 9], action_sizes: vec![10], sigma: 1.0, trials: 10, seed: 0, cap: DEFAULT_CAP };
    assert!(bias_sweep(&cfg).is_err());
}

#[test]
fn quantiles_are_type_seven() {
    let v = [1.0, 2.0, 3.0, 4.0];
    assert_eq!(quantile(&v, 0.25), 1.75);
    assert_eq!(quantile(&v, 0.5), 2.5);
    assert_eq!(quantile(&v, 1.0), 4.0);
    let s = Spread::of(&[4.0, 1.0, 3.0, 2.0, 5.0]);
    assert_eq!((s.median, s.q1, s.q3, s.iqr()), (3.0, 2.0, 4.0, 2.0));
}

fn set(label: &str, seeds: &[Vec<(u64, f64)>]) -> RunSet {
    RunSet { label: label.into(), config: None, series: seeds.iter().cloned().enumerate().map(|(i, s)| (i as u64 + 1, s)).collect() }
}

#[test]
fn comparison_uses_final_quarter_medians() {
    let base = set("greedy", &[vec![(0, 5.0), (100, 4.0), (200, 3.0), (300, 2.0), (400, 1.5)], vec![(0, 5.0), (100, 4.0), (200, 3.0), (300, 2.5), (400, 1.0)]]);
    let cand = set("qsim", &[vec![(0, 5.0), (100, 3.0), (200, 2.0), (300, 0.5), (400, 0.1)], vec![(0, 5.0), (100, 3.0), (200, 2.0), (300, 0.7), (400, 0.3)]]);
    let c = compare_delta_q(&base, &cand).unwrap();
    // final quarter is step >= 300: baseline {2, 1.5, 2.5, 1}, candidate {0.5, 0.1, 0.7, 0.3}
    assert_eq!(c.final_quarter_baseline.median, 1.75);
    assert!((c.final_quarter_candidate.median - 0.4).abs() < 1e-15);
    assert!(c.candidate_lower);
    assert_eq!(c.per_step.len(), 5);
    assert_eq!(c.per_step[1].baseline, 4.0);
    assert!((c.gap - (0.4 - 1.75)).abs() < 1e-15);

    let short = set("x", &[vec![(0, 1.0)]]);
    assert!(compare_delta_q(&base, &short).is_err());
}

#[test]
fn theorem2_holds_and_fault_is_caught() {
    let ok = verify_theorem2(2000, 5, Fault::None).unwrap();
    assert_eq!((ok.samples, ok.violations), (2000, 0));
    assert!(ok.worst_margin >= -1e-9);
    let bad = verify_theorem2(2000, 5, Fault::SkipAgentNormalization).unwrap();
    assert!(bad.violations > 0);
    assert!(bad.worst_margin < -1e-9);
}

proptest! {
    #[test]
    fn delta_q_matches_forward_discounting(q in -50.0f64..50.0, rewards in prop::collection::vec(-10.0f64..10.0, 0..30), gamma in 0.0f64..1.0) {
        let ret: f64 = rewards.iter().enumerate().map(|(k, r)| gamma.powi(k as i32) * r).sum();
        prop_assert!((delta_q(q, &rewards, gamma) - (q - ret)).abs() < 1e-9);
    }

    #[test]
    fn quantile_is_monotone_and_bounded(mut v in prop::collection::vec(-1e3f64..1e3, 1..40), p in 0.0f64..1.0, d in 0.0f64..0.5) {
        v.sort_by(f64::total_cmp);
        let (a, b) = (quantile(&v, p), quantile(&v, (p + d).min(1.0)));
        prop_assert!(a <= b + 1e-12);
        prop_assert!(v[0] <= a && a <= v[v.len() - 1]);
    }
}
