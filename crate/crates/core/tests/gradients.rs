use proptest::prelude::*;
use qsim_core::nn::{Activation, Graph, Mlp, MlpSpec, ParamSet, Tensor};
use qsim_core::rng::{substream, Stream};
use qsim_core::vd::{MixerKind, NetworkSpec, Networks};

/// Central differences over every parameter value of `loss`.
fn finite_differences(params: &ParamSet<f64>, loss: &dyn Fn(&ParamSet<f64>) -> f64, h: f64) -> Vec<f64> {
    let mut p = params.clone();
    let mut out = Vec::new();
    for id in params.ids() {
        for j in 0..params.get(id).len() {
            let x = p.get(id).data()[j];
            p.get_mut(id).data_mut()[j] = x + h;
            let up = loss(&p);
            p.get_mut(id).data_mut()[j] = x - h;
            let down = loss(&p);
            p.get_mut(id).data_mut()[j] = x;
            out.push((up - down) / (2.0 * h));
        }
    }
    out
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-6)).fold(0.0, f64::max)
}

#[test]
fn mlp_tanh_gradients_match_finite_differences() {
    for draw in 0..100u64 {
        let mut rng = substream(draw, Stream::Init);
        let widths = vec![3, 4 + (draw as usize % 3), 2];
        let mut params = ParamSet::new();
        let mlp = Mlp::init(MlpSpec::new(widths, Activation::Tanh, Activation::Identity).unwrap(), "m", &mut params, &mut rng);
        let x = Tensor::from_f64(vec![2, 3], &[0.3, -0.7, 1.1, 0.05, 0.9, -0.4]).unwrap();
        let loss = |p: &ParamSet<f64>, g: &mut Graph<f64>| {
            let xi = g.input(x.clone());
            let y = mlp.forward(g, p, xi).unwrap();
            let sq = g.square(y);
            g.sum(sq)
        };
        let mut p = params.clone();
        let mut g = Graph::new();
        let l = loss(&p, &mut g);
        g.backward(l, &mut p).unwrap();
        let fd = finite_differences(&params, &|q| {
            let mut g = Graph::inference();
            let l = loss(q, &mut g);
            g.value(l).item()
        }, 1e-6);
        let err = rel_err(&p.flat_grads(), &fd);
        assert!(err < 1e-4, "draw {draw}: {err}");
    }
}

#[test]
fn qmix_gradients_match_finite_differences() {
    let spec = NetworkSpec {
        n_agents: 3,
        n_actions: 2,
        obs_width: 1,
        state_width: 2,
        agent_hidden: vec![],
        mixer: MixerKind::Qmix,
        mixer_embed: 3,
        hyper_hidden: 4,
    };
    let (nets, params) = Networks::init::<f64>(spec, &mut substream(11, Stream::Init)).unwrap();
    let q = Tensor::from_f64(vec![2, 3], &[0.5, -1.0, 2.0, 1.5, 0.2, -0.3]).unwrap();
    let s = Tensor::from_f64(vec![2, 2], &[0.1, 0.7, -0.6, 0.4]).unwrap();
    let loss = |p: &ParamSet<f64>, g: &mut Graph<f64>| {
        let (qn, sn) = (g.input(q.clone()), g.input(s.clone()));
        let y = nets.mix_graph(g, p, qn, sn).unwrap();
        let sq = g.square(y);
        g.mean(sq).unwrap()
    };
    let mut p = params.clone();
    let mut g = Graph::new();
    let l = loss(&p, &mut g);
    g.backward(l, &mut p).unwrap();
    let fd = finite_differences(&params, &|q| {
        let mut g = Graph::inference();
        let l = loss(q, &mut g);
        g.value(l).item()
    }, 1e-6);
    assert!(rel_err(&p.flat_grads(), &fd) < 1e-4);
}

proptest! {
    #[test]
    fn matmul_matches_naive(a in prop::collection::vec(-5.0f64..5.0, 6), b in prop::collection::vec(-5.0f64..5.0, 8)) {
        let mut g = Graph::inference();
        let an = g.input(Tensor::new(vec![3, 2], a.clone()).unwrap());
        let bn = g.input(Tensor::new(vec![2, 4], b.clone()).unwrap());
        let c = g.matmul(an, bn).unwrap();
        for i in 0..3 {
            for j in 0..4 {
                let want = a[i * 2] * b[j] + a[i * 2 + 1] * b[4 + j];
                prop_assert!((g.value(c).get2(i, j) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn qmix_is_monotone_in_every_utility(
        q in prop::collection::vec(-5.0f64..5.0, 3),
        state in prop::collection::vec(-2.0f64..2.0, 2),
        i in 0usize..3,
        delta in 1e-3f64..3.0,
        seed in any::<u64>(),
    ) {
        let spec = NetworkSpec { n_agents: 3, n_actions: 2, obs_width: 1, state_width: 2, agent_hidden: vec![], mixer: MixerKind::Qmix, mixer_embed: 4, hyper_hidden: 5 };
        let (nets, params) = Networks::init::<f64>(spec, &mut substream(seed, Stream::Init)).unwrap();
        let mut raised = q.clone();
        raised[i] += delta;
        prop_assert!(nets.mix(&params, &raised, &state).unwrap() >= nets.mix(&params, &q, &state).unwrap());
    }
}

#[test]
fn f32_networks_run() {
    let spec = NetworkSpec { n_agents: 2, n_actions: 3, obs_width: 4, state_width: 2, agent_hidden: vec![5], mixer: MixerKind::Qmix, mixer_embed: 2, hyper_hidden: 3 };
    let (nets, params) = Networks::init::<f32>(spec, &mut substream(1, Stream::Init)).unwrap();
    let u = nets.utilities(&params, vec![Tensor::<f32>::zeros(vec![1, 4]); 2]).unwrap();
    assert_eq!(u[0].shape(), &[1, 3]);
    assert!(nets.mix(&params, &[1.0f32, 2.0], &[0.5, 0.5]).unwrap().is_finite());
}
