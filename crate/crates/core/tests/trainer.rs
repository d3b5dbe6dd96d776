use qsim_core::config::{EnvConfig, ExperimentConfig, NetworkConfig, Variant};
use qsim_core::env::{ClimbingGame, CoopGridworld, Env, GridConfig, JointAction};
use qsim_core::nn::Tensor;
use qsim_core::qsim::KappaSchedule;
use qsim_core::rng::{substream, Stream};
use qsim_core::trainer::{build_learner, collect_episode, select_actions, MetricsRow, Trainer};
use qsim_core::vd::{MixerKind, NetworkPair, NetworkSpec, TargetUpdate};
use qsim_core::Transition64;

fn small_grid(variant: Variant, seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::defaults(EnvConfig::Gridworld(GridConfig::default()), variant, vec![seed]);
    cfg.network = NetworkConfig { agent_hidden: vec![8], mixer_embed: 4, hyper_hidden: 8, ae_hidden: 8, ae_embed: 4 };
    cfg.batch_size = 4;
    cfg.step_max = 300;
    cfg.eval_interval = 100;
    cfg.eval_episodes = 2;
    cfg
}

fn grid_pair(mixer: MixerKind, seed: u64) -> (CoopGridworld, NetworkPair<f64>) {
    let env = CoopGridworld::new(GridConfig::default()).unwrap();
    let spec = NetworkSpec {
        n_agents: 2,
        n_actions: Env::<f64>::n_actions(&env),
        obs_width: Env::<f64>::obs_width(&env),
        state_width: Env::<f64>::state_width(&env),
        agent_hidden: vec![6],
        mixer,
        mixer_embed: 3,
        hyper_hidden: 5,
    };
    (env, NetworkPair::init(spec, &mut substream(seed, Stream::Init)).unwrap())
}

#[test]
fn full_exploration_is_uniform_over_available_actions() {
    let (mut env, pair) = grid_pair(MixerKind::Vdn, 1);
    let start = Env::<f64>::reset(&mut env, 0);
    let n = start.avail_actions[0].len();
    // mask one action of agent 1 to check exclusion
    let mut avail = start.avail_actions.clone();
    avail[1][0] = false;
    let mut counts = vec![vec![0usize; n]; 2];
    let mut rng = substream(9, Stream::Explore);
    let draws = 10_000;
    for _ in 0..draws {
        let a = select_actions(&pair.nets, &pair.main, &start.obs, &avail, 1.0, &mut rng).unwrap();
        counts[0][a[0]] += 1;
        counts[1][a[1]] += 1;
    }
    assert_eq!(counts[1][0], 0);
    for (agent, c) in counts.iter().enumerate() {
        let cats: Vec<usize> = (0..n).filter(|&j| avail[agent][j]).collect();
        let expected = draws as f64 / cats.len() as f64;
        let chi2: f64 = cats.iter().map(|&j| (c[j] as f64 - expected).powi(2) / expected).sum();
        // 0.999 quantile of chi-square with 4 degrees of freedom
        assert!(chi2 < 18.47, "agent {agent}: chi2 {chi2}");
    }
}

#[test]
fn zero_epsilon_is_greedy_and_draws_nothing() {
    let (mut env, pair) = grid_pair(MixerKind::Qmix, 2);
    let start = Env::<f64>::reset(&mut env, 3);
    let mut rng = substream(1, Stream::Explore);
    let before = rng.clone();
    let a = select_actions(&pair.nets, &pair.main, &start.obs, &start.avail_actions, 0.0, &mut rng).unwrap();
    assert_eq!(rng, before);
    for i in 0..2 {
        let u = pair.nets.utilities(&pair.main, vec![Tensor::from_rows(&[&start.obs[i]]).unwrap(); 2]).unwrap();
        let row = u[i].row(0);
        let best = (0..row.len()).filter(|&j| start.avail_actions[i][j]).fold(None, |b: Option<usize>, j| match b {
            Some(k) if row[k] >= row[j] => Some(k),
            _ => Some(j),
        });
        assert_eq!(a[i], best.unwrap());
    }
}

#[test]
fn greedy_episodes_repeat_exactly() {
    let (mut env, pair) = grid_pair(MixerKind::Qmix, 4);
    let mut rng = substream(1, Stream::Explore);
    let a = collect_episode(&mut env, &pair.nets, &pair.main, 0.0, 17, &mut rng).unwrap();
    let b = collect_episode(&mut env, &pair.nets, &pair.main, 0.0, 17, &mut rng).unwrap();
    assert_eq!(a, b);
    assert!(a.len() <= 25);
}

#[test]
fn climbing_episode_has_one_transition() {
    let mut env = ClimbingGame::new();
    let (nets, params) = qsim_core::vd::Networks::init::<f64>(
        NetworkSpec { n_agents: 2, n_actions: 3, obs_width: 5, state_width: 10, agent_hidden: vec![4], mixer: MixerKind::Qmix, mixer_embed: 2, hyper_hidden: 3 },
        &mut substream(0, Stream::Init),
    )
    .unwrap();
    let ep = collect_episode(&mut env, &nets, &params, 1.0, 0, &mut substream(0, Stream::Explore)).unwrap();
    assert_eq!(ep.len(), 1);
    assert!(ep.transitions[0].terminal);
    assert_eq!(ep.total_reward(), ClimbingGame::payoff(ep.transitions[0].actions[0], ep.transitions[0].actions[1]));
}

fn run_rows(cfg: &ExperimentConfig, seed: u64) -> Vec<MetricsRow> {
    let mut t = Trainer::<f64>::new(cfg, seed).unwrap();
    let mut rows = Vec::new();
    t.run(|r| {
        rows.push(r.clone());
        Ok(())
    })
    .unwrap();
    rows
}

#[test]
fn runs_are_deterministic_and_row_counts_follow_interval() {
    let cfg = small_grid(Variant::Qsim, 3);
    let a = run_rows(&cfg, 3);
    assert_eq!(a, run_rows(&cfg, 3));
    assert_eq!(a.len(), (300 / 100) + 1);
    let steps: Vec<u64> = a.iter().map(|r| r.step).collect();
    assert_eq!(steps, vec![0, 100, 200, 300]);
    assert_ne!(a, run_rows(&cfg, 4));

    let mut odd = cfg.clone();
    odd.step_max = 250;
    assert_eq!(run_rows(&odd, 3).len(), 3);
    let mut none = cfg;
    none.step_max = 0;
    assert!(run_rows(&none, 3).is_empty());
}

fn transitions(env: &mut CoopGridworld, pair: &NetworkPair<f64>, episodes: u64) -> Vec<Transition64> {
    let mut rng = substream(5, Stream::Explore);
    (0..episodes)
        .flat_map(|s| collect_episode(env, &pair.nets, &pair.main, 1.0, s, &mut rng).unwrap().transitions)
        .collect()
}

/// Brute-force `max_u Q_tar(s′, u)` over every available joint action.
fn brute_max(pair: &NetworkPair<f64>, t: &Transition64) -> f64 {
    let util = pair.nets.utilities(&pair.target, t.next_obs.iter().map(|o| Tensor::from_rows(&[o]).unwrap()).collect()).unwrap();
    let n = t.next_avail[0].len();
    let mut best = f64::NEG_INFINITY;
    for a in (0..n).filter(|&a| t.next_avail[0][a]) {
        for b in (0..n).filter(|&b| t.next_avail[1][b]) {
            best = best.max(pair.nets.mix(&pair.target, &[util[0].row(0)[a], util[1].row(0)[b]], &t.next_state).unwrap());
        }
    }
    best
}

#[test]
fn greedy_update_matches_hand_stepped_reference() {
    let mut cfg = small_grid(Variant::Greedy, 6);
    cfg.double_q = false;
    cfg.grad_clip = None;
    cfg.target_update = TargetUpdate::Soft { tau: 0.25 };
    let mut env = CoopGridworld::new(GridConfig::default()).unwrap();
    let mut learner = build_learner::<f64>(&cfg, &env, 6).unwrap();
    // de-synchronize target from main so the two roles are distinguishable
    for id in learner.pair.target.ids().collect::<Vec<_>>() {
        learner.pair.target.get_mut(id).data_mut().iter_mut().for_each(|x| *x *= 0.5);
    }
    let data = transitions(&mut env, &learner.pair, 3);
    let batch: Vec<&Transition64> = data.iter().collect();
    let rewards: Vec<f64> = data.iter().map(|t| t.reward).collect();

    let targets: Vec<f64> =
        data.iter().map(|t| if t.terminal { t.reward } else { t.reward + 0.99 * brute_max(&learner.pair, t) }).collect();
    let got = learner.targets(&batch, &rewards, 0.0).unwrap();
    for (g, w) in got.iter().zip(&targets) {
        assert!((g - w).abs() < 1e-10);
    }

    let nets = learner.pair.nets.clone();
    let taken = |params: &qsim_core::ParamSet64| -> Vec<f64> {
        data.iter()
            .map(|t| {
                let util = nets.utilities(params, t.obs.iter().map(|o| Tensor::from_rows(&[o]).unwrap()).collect()).unwrap();
                nets.mix(params, &[util[0].row(0)[t.actions[0]], util[1].row(0)[t.actions[1]]], &t.state).unwrap()
            })
            .collect()
    };
    let mse = |params: &qsim_core::ParamSet64| -> f64 {
        taken(params).iter().zip(&targets).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / data.len() as f64
    };
    let q = taken(&learner.pair.main);
    let n = data.len() as f64;
    let loss = q.iter().zip(&targets).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n;

    let (main0, target0) = (learner.pair.main.clone(), learner.pair.target.clone());
    let rec = learner.train_step(&batch, &rewards, 0.0).unwrap();
    assert!((rec.td_loss - loss).abs() < 1e-10);
    assert!((rec.mean_target - targets.iter().sum::<f64>() / n).abs() < 1e-10);
    assert!((rec.mean_qtot - q.iter().sum::<f64>() / n).abs() < 1e-10);
    assert_eq!(rec.ae_loss, None);

    // first Adam step: each coordinate moves by at most lr, against the gradient
    let mut probe = main0.clone();
    for id in main0.ids() {
        for j in 0..main0.get(id).len() {
            let x0 = main0.get(id).data()[j];
            let x1 = learner.pair.main.get(id).data()[j];
            probe.get_mut(id).data_mut()[j] = x0 + 1e-6;
            let up = mse(&probe);
            probe.get_mut(id).data_mut()[j] = x0 - 1e-6;
            let down = mse(&probe);
            probe.get_mut(id).data_mut()[j] = x0;
            let g = (up - down) / 2e-6;
            let step = x1 - x0;
            assert!(step.abs() <= 0.0005 * (1.0 + 1e-6));
            if g.abs() > 1e-4 {
                assert!(step * g < 0.0 && step.abs() > 0.0005 * 0.99, "{id:?}[{j}]: g {g}, step {step}");
            }
        }
        // Polyak: target <- 0.25 main' + 0.75 target
        for ((&t1, &t0), &m1) in learner.pair.target.get(id).data().iter().zip(target0.get(id).data()).zip(learner.pair.main.get(id).data()) {
            assert!((t1 - (0.25 * m1 + 0.75 * t0)).abs() < 1e-14);
        }
    }
    assert!(mse(&learner.pair.main) < loss);
    assert_eq!(learner.updates(), 1);
}

#[test]
fn qsim_mean_equals_qsim_at_zero_kappa_without_mask() {
    let mean = small_grid(Variant::QsimMean, 8);
    let mut zero = small_grid(Variant::Qsim, 8);
    zero.kappa = KappaSchedule::Constant { value: 0.0 };
    zero.threshold = -1.0;
    let (mut a, mut b) = (Trainer::<f64>::new(&mean, 8).unwrap(), Trainer::<f64>::new(&zero, 8).unwrap());
    let mut updates = 0;
    while updates < 20 {
        let ra = a.iterate().unwrap();
        let rb = b.iterate().unwrap();
        assert_eq!(ra, rb);
        updates += ra.is_some() as usize;
    }
    assert_eq!(a.checkpoint_params(), b.checkpoint_params());
}

#[test]
fn greedy_joint_action_is_reproducible() {
    let cfg = small_grid(Variant::Greedy, 2);
    let mut t = Trainer::<f64>::new(&cfg, 2).unwrap();
    for _ in 0..10 {
        t.iterate().unwrap();
    }
    let a: JointAction = t.greedy_joint_action(5).unwrap();
    assert_eq!(a, t.greedy_joint_action(5).unwrap());
    assert_eq!(a.len(), 2);
}
