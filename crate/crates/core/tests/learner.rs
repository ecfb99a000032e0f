use marlx::learner::{
    argmax, load_checkpoint, save_checkpoint, select_actions, AgentNet, Checkpoint, Episode, MixerNet, QmixLearner,
    ReplayBuffer, ReplayConfig, SumTree, TrainConfig,
};
use marlx::numkit::{Activation, Matrix, Mlp, SeededRng};
use marlx::Error;
use proptest::prelude::*;

fn linear(rows: &[&[f64]], bias: &[f64]) -> Mlp {
    Mlp::from_parts(
        vec![Matrix::from_rows(rows).unwrap()],
        vec![bias.to_vec()],
        Activation::Relu,
        Activation::Identity,
    )
    .unwrap()
}

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp() - 1.0
    }
}

/// Two agents, one observation feature, two actions, one state feature, E = 2.
struct Tiny {
    w: [[f64; 2]; 5],
    b: [f64; 2],
    hw1: [f64; 4],
    hb1: [f64; 2],
    hw2: [f64; 2],
    hv: f64,
}

impl Tiny {
    fn nets(&self) -> (AgentNet, MixerNet) {
        let rows: Vec<&[f64]> = self.w.iter().map(|r| r.as_slice()).collect();
        let agent = AgentNet::from_mlp(linear(&rows, &self.b), 1, 2, 2).unwrap();
        let mixer = MixerNet::from_parts(
            linear(&[&self.hw1], &[0.0; 4]),
            linear(&[&self.hb1], &[0.0; 2]),
            linear(&[&self.hw2], &[0.0; 2]),
            linear(&[&[self.hv]], &[0.0]),
            2,
        )
        .unwrap();
        (agent, mixer)
    }

    fn q(&self, obs: f64, agent: usize, last: Option<usize>) -> [f64; 2] {
        let mut x = [obs, 0.0, 0.0, 0.0, 0.0];
        x[1 + agent] = 1.0;
        if let Some(a) = last {
            x[3 + a] = 1.0;
        }
        let mut out = self.b;
        for (xi, row) in x.iter().zip(&self.w) {
            out[0] += xi * row[0];
            out[1] += xi * row[1];
        }
        out
    }

    fn mix(&self, q: [f64; 2], s: f64) -> f64 {
        let mut total = self.hv * s;
        for k in 0..2 {
            let h = q[0] * (self.hw1[k] * s).abs() + q[1] * (self.hw1[2 + k] * s).abs() + self.hb1[k] * s;
            total += elu(h) * (self.hw2[k] * s).abs();
        }
        total
    }

    fn loss(&self, episodes: &[&Episode], weights: &[f64], gamma: f64) -> f64 {
        let mut sum = 0.0;
        let mut m = 0.0;
        for (e, w) in episodes.iter().zip(weights) {
            for t in 0..e.len() {
                let last = |i: usize| (t > 0).then(|| e.action(t - 1, i));
                let q = [
                    self.q(e.obs(t, 0)[0], 0, last(0))[e.action(t, 0)],
                    self.q(e.obs(t, 1)[0], 1, last(1))[e.action(t, 1)],
                ];
                let q_tot = self.mix(q, e.state(t)[0]);
                let nq = |i: usize| {
                    let v = self.q(e.obs(t + 1, i)[0], i, Some(e.action(t, i)));
                    v[0].max(v[1])
                };
                let boot = self.mix([nq(0), nq(1)], e.state(t + 1)[0]);
                let cont = if e.terminated[t] { 0.0 } else { 1.0 };
                let y = e.rewards[t] + gamma * cont * boot;
                sum += w * (q_tot - y).powi(2);
                m += 1.0;
            }
        }
        sum / m
    }
}

fn tiny() -> Tiny {
    Tiny {
        w: [[0.5, -0.3], [0.2, 0.1], [-0.4, 0.6], [0.3, 0.0], [-0.1, 0.25]],
        b: [0.05, -0.02],
        hw1: [0.7, -0.2, 0.4, -0.9],
        hb1: [-0.3, 0.8],
        hw2: [1.1, -0.6],
        hv: 0.35,
    }
}

fn episode(obs: &[[f64; 2]], states: &[f64], actions: &[[usize; 2]], rewards: &[f64], terminal: bool) -> Episode {
    let mut e = Episode::new(2, 1, 1);
    for t in 0..actions.len() {
        e.push_observation(&[vec![obs[t][0]], vec![obs[t][1]]], &[states[t]]).unwrap();
        e.push_transition(&actions[t], rewards[t], terminal && t + 1 == actions.len()).unwrap();
    }
    let n = actions.len();
    e.push_observation(&[vec![obs[n][0]], vec![obs[n][1]]], &[states[n]]).unwrap();
    e
}

fn two_episodes() -> (Episode, Episode) {
    let a = episode(
        &[[0.1, -0.2], [0.4, 0.3], [-0.5, 0.9]],
        &[1.0, -0.5, 0.7],
        &[[0, 1], [1, 1]],
        &[1.0, -2.0],
        true,
    );
    let b = episode(&[[0.3, 0.3], [0.8, -0.1]], &[0.2, 1.5], &[[1, 0]], &[0.5], false);
    (a, b)
}

#[test]
fn td_loss_matches_hand_computation() {
    let t = tiny();
    let (agent, mixer) = t.nets();
    for gamma in [0.0, 0.5, 0.99] {
        let cfg = TrainConfig {
            gamma,
            ..TrainConfig::default()
        };
        let l = QmixLearner::from_nets(cfg, agent.clone(), mixer.clone()).unwrap();
        let (a, b) = two_episodes();
        let weights = [0.7, 1.0];
        let got = l.td_loss(&[&a, &b], &weights).unwrap();
        let want = t.loss(&[&a, &b], &weights, gamma);
        assert!((got - want).abs() < 1e-12, "gamma {gamma}: {got} vs {want}");
    }
}

#[test]
fn train_step_reports_loss_and_priorities() {
    let t = tiny();
    let (agent, mixer) = t.nets();
    let cfg = TrainConfig {
        gamma: 0.9,
        ..TrainConfig::default()
    };
    let mut l = QmixLearner::from_nets(cfg.clone(), agent, mixer).unwrap();
    let (a, b) = two_episodes();
    let before = l.td_loss(&[&a, &b], &[1.0, 1.0]).unwrap();
    let report = l.td_train_step(&[&a, &b], &[1.0, 1.0]).unwrap();
    assert!((report.loss - before).abs() < 1e-15);
    assert_eq!(report.priorities.len(), 2);
    assert!(report.priorities.iter().all(|p| *p >= cfg.replay.priority_eps));
    assert!(report.grad_norm > 0.0);
    let after = l.td_loss(&[&a, &b], &[1.0, 1.0]).unwrap();
    assert_ne!(after, before);
}

#[test]
fn target_networks_sync_on_schedule() {
    let cfg = TrainConfig {
        target_update: 3,
        agent_hidden: vec![8],
        mixer_embed: 4,
        hypernet_hidden: 0,
        ..TrainConfig::default()
    };
    let mut l = QmixLearner::new(cfg, 1, 1, 2, 2, &SeededRng::new(2)).unwrap();
    let (a, _) = two_episodes();
    let initial = l.target_agent().clone();
    l.td_train_step(&[&a], &[1.0]).unwrap();
    l.td_train_step(&[&a], &[1.0]).unwrap();
    assert_eq!(l.target_agent(), &initial);
    l.td_train_step(&[&a], &[1.0]).unwrap();
    assert_eq!(l.target_agent().mlp().param_slices(), l.agent().mlp().param_slices());
    assert_eq!(l.target_mixer().param_slices(), l.mixer().param_slices());
    assert_eq!(l.train_steps(), 3);
}

#[test]
fn learner_rejects_mismatched_batches() {
    let t = tiny();
    let (agent, mixer) = t.nets();
    let l = QmixLearner::from_nets(TrainConfig::default(), agent, mixer).unwrap();
    let (a, b) = two_episodes();
    assert!(matches!(l.td_loss(&[&a, &b], &[1.0]), Err(Error::Shape { .. })));
    let mut partial = Episode::new(2, 1, 1);
    partial.push_observation(&[vec![0.0], vec![0.0]], &[0.0]).unwrap();
    partial.push_transition(&[0, 0], 0.0, false).unwrap();
    assert!(l.td_loss(&[&partial], &[1.0]).is_err());
}

#[test]
fn per_sampling_frequencies_match_priorities() {
    let cfg = ReplayConfig {
        capacity: 8,
        alpha: 0.6,
        ..ReplayConfig::default()
    };
    let mut buf = ReplayBuffer::new(cfg).unwrap();
    let priorities = [0.5, 1.0, 2.0, 4.0, 0.1, 3.0, 1.5, 0.8];
    for (i, p) in priorities.iter().enumerate() {
        let (e, _) = two_episodes();
        let slot = buf.add(e).unwrap();
        assert_eq!(slot, i);
        buf.update_priorities(&[slot], &[*p]).unwrap();
    }
    let masses: Vec<f64> = priorities.iter().map(|p| p.powf(0.6)).collect();
    let z: f64 = masses.iter().sum();
    let n = 100_000;
    let mut counts = [0usize; 8];
    let mut rng = SeededRng::new(7);
    for _ in 0..n / 8 {
        for i in buf.sample(8, &mut rng).unwrap().indices {
            counts[i] += 1;
        }
    }
    for i in 0..8 {
        let p = masses[i] / z;
        let mean = n as f64 * p;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((counts[i] as f64 - mean).abs() < 3.0 * sd, "slot {i}: {} vs {mean}", counts[i]);
        assert!((buf.probability(i) - p).abs() < 1e-12);
    }
}

#[test]
fn importance_weights_follow_the_closed_form() {
    let cfg = ReplayConfig {
        capacity: 4,
        alpha: 1.0,
        beta_start: 0.5,
        ..ReplayConfig::default()
    };
    let mut buf = ReplayBuffer::new(cfg).unwrap();
    for p in [1.0, 2.0, 3.0, 4.0] {
        let (e, _) = two_episodes();
        let s = buf.add(e).unwrap();
        buf.update_priorities(&[s], &[p]).unwrap();
    }
    for (progress, beta) in [(0.0, 0.5), (0.5, 0.75), (1.0, 1.0), (2.0, 1.0)] {
        buf.anneal_beta(progress);
        assert_eq!(buf.beta(), beta);
        let batch = buf.sample(4, &mut SeededRng::new(3)).unwrap();
        for (&i, &w) in batch.indices.iter().zip(&batch.weights) {
            let p = (i + 1) as f64 / 10.0;
            let want = (4.0 * p).powf(-beta) / (4.0 * 0.1f64).powf(-beta);
            assert!((w - want).abs() < 1e-12);
            assert!(w <= 1.0);
        }
    }
}

#[test]
fn new_episodes_get_the_max_priority_and_ring_overwrites() {
    let cfg = ReplayConfig {
        capacity: 3,
        alpha: 1.0,
        ..ReplayConfig::default()
    };
    let mut buf = ReplayBuffer::new(cfg).unwrap();
    let (e, _) = two_episodes();
    let s0 = buf.add(e.clone()).unwrap();
    assert_eq!(buf.priority(s0), 1.0);
    buf.update_priorities(&[s0], &[5.0]).unwrap();
    let s1 = buf.add(e.clone()).unwrap();
    assert_eq!(buf.priority(s1), 5.0);
    buf.update_priorities(&[s1], &[0.5]).unwrap();
    let s2 = buf.add(e.clone()).unwrap();
    assert_eq!(buf.priority(s2), 5.0);
    let (_, short) = two_episodes();
    assert_eq!(buf.add(short.clone()).unwrap(), 0);
    assert_eq!(buf.len(), 3);
    assert_eq!(buf.episode(0), &short);
    assert!(matches!(buf.sample(4, &mut SeededRng::new(0)), Err(Error::EmptyReplay { .. })));
    assert!(buf.update_priorities(&[0], &[f64::NAN]).is_err());
}

#[test]
fn epsilon_one_is_uniform() {
    let mut rng = SeededRng::new(1);
    let net = AgentNet::new(3, 2, 5, &[8], &mut rng).unwrap();
    let obs = vec![vec![0.1, 0.2, 0.3], vec![0.0, -1.0, 0.5]];
    let n = 50_000;
    let mut counts = [[0usize; 5]; 2];
    let mut rng = SeededRng::new(2);
    for _ in 0..n {
        let a = select_actions(&net, &obs, None, 1.0, &mut rng).unwrap();
        counts[0][a[0]] += 1;
        counts[1][a[1]] += 1;
    }
    let mean = n as f64 / 5.0;
    let sd = (n as f64 * 0.2 * 0.8).sqrt();
    for row in counts {
        for c in row {
            assert!((c as f64 - mean).abs() < 3.0 * sd, "{c} vs {mean}");
        }
    }
}

#[test]
fn greedy_selection_is_argmax_and_draws_nothing() {
    let mut rng = SeededRng::new(4);
    let net = AgentNet::new(2, 3, 4, &[6], &mut rng).unwrap();
    let obs = vec![vec![0.5, -0.5], vec![1.0, 0.0], vec![0.0, 0.2]];
    let last = [1, 3, 0];
    let q = net.q_values(&obs, Some(&last)).unwrap();
    let mut a = SeededRng::new(9);
    let mut b = SeededRng::new(9);
    let acts = select_actions(&net, &obs, Some(&last), 0.0, &mut a).unwrap();
    for (i, act) in acts.iter().enumerate() {
        assert_eq!(*act, argmax(q.row(i)));
    }
    assert_eq!(a.uniform(), b.uniform());
    assert!(select_actions(&net, &obs, None, 1.5, &mut a).is_err());
    assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
}

#[test]
fn agent_inputs_carry_id_and_last_action() {
    let mut rng = SeededRng::new(5);
    let net = AgentNet::new(2, 2, 3, &[4], &mut rng).unwrap();
    let x = net.build_inputs(&[vec![0.1, 0.2], vec![0.3, 0.4]], Some(&[2, 0])).unwrap();
    assert_eq!(x.row(0), &[0.1, 0.2, 1.0, 0.0, 0.0, 0.0, 1.0]);
    assert_eq!(x.row(1), &[0.3, 0.4, 0.0, 1.0, 1.0, 0.0, 0.0]);
    let first = net.build_inputs(&[vec![0.1, 0.2], vec![0.3, 0.4]], None).unwrap();
    assert_eq!(&first.row(1)[4..], &[0.0, 0.0, 0.0]);
}

#[test]
fn unit_weight_mixer_is_scaled_elu_of_sum() {
    let mut rng = SeededRng::new(6);
    let m = MixerNet::new(3, 4, 5, 8, &mut rng).unwrap().with_unit_weights();
    for q in [[0.5, 0.25, 1.0], [-1.0, -0.5, 0.2]] {
        let s: f64 = q.iter().sum();
        let got = m.mix(&q, &[0.0; 4]).unwrap();
        assert!((got - 5.0 * elu(s)).abs() < 1e-12);
    }
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let cfg = TrainConfig {
        agent_hidden: vec![7, 5],
        mixer_embed: 3,
        hypernet_hidden: 4,
        ..TrainConfig::default()
    };
    let mut l = QmixLearner::new(cfg, 2, 3, 2, 4, &SeededRng::new(8)).unwrap();
    l.agent_mut().mlp_mut().param_slices_mut()[1][0] = 1.0 / 3.0;
    let mut nets = vec![("agent".to_string(), l.agent().mlp().clone())];
    for (name, m) in ["w1", "b1", "w2", "v"].iter().zip(l.mixer().hypernets()) {
        nets.push((format!("mixer.{name}"), m.clone()));
    }
    let ckpt = Checkpoint {
        config_text: "name = x\nalgo = qmix\n".into(),
        nets,
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ckpt.txt");
    save_checkpoint(&path, &ckpt).unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(back.config_text, ckpt.config_text);
    assert_eq!(back.nets.len(), ckpt.nets.len());
    for ((na, a), (nb, b)) in back.nets.iter().zip(&ckpt.nets) {
        assert_eq!(na, nb);
        assert_eq!(a.sizes(), b.sizes());
        assert_eq!(a.param_slices(), b.param_slices());
    }
    assert_eq!(back.to_text(), ckpt.to_text());
    let text = ckpt.to_text();
    let cut = &text[..text.len() / 2];
    assert!(Checkpoint::from_text(cut).is_err());
}

proptest! {
    #[test]
    fn mixer_is_monotone_in_every_agent_q(
        seed in 0u64..100_000,
        n in 1usize..5,
        s_dim in 1usize..8,
        embed in 1usize..12,
        hidden in 0usize..12,
    ) {
        let mut rng = SeededRng::new(seed);
        let m = MixerNet::new(n, s_dim, embed, hidden, &mut rng).unwrap();
        let q: Vec<f64> = (0..n).map(|_| rng.uniform_range(-5.0, 5.0)).collect();
        let s: Vec<f64> = (0..s_dim).map(|_| rng.uniform_range(-2.0, 2.0)).collect();
        let base = m.mix(&q, &s).unwrap();
        for i in 0..n {
            let mut qp = q.clone();
            qp[i] += 1e-5;
            prop_assert!((m.mix(&qp, &s).unwrap() - base) / 1e-5 >= -1e-8);
        }
    }

    #[test]
    fn sum_tree_total_tracks_leaves(ops in prop::collection::vec((0usize..16, 0.0f64..10.0), 1..200)) {
        let mut tree = SumTree::new(16);
        let mut leaves = [0.0f64; 16];
        for (i, v) in ops {
            tree.set(i, v);
            leaves[i] = v;
            let total: f64 = leaves.iter().sum();
            prop_assert!((tree.total() - total).abs() <= 1e-9 * total.max(1.0));
        }
        let total: f64 = leaves.iter().sum();
        if total > 0.0 {
            let mut acc = 0.0;
            for (i, l) in leaves.iter().enumerate() {
                if *l > 0.0 {
                    prop_assert_eq!(tree.find(acc + 0.5 * l), i);
                }
                acc += l;
            }
        }
    }
}
