use marlx::envs::particle::{EAST, NORTH, STAY, WEST};
use marlx::envs::rel_overgen::{LEFT, RIGHT};
use marlx::envs::{
    box_push_reward, coordinated_placement_reward, placement_strategy_returns, rel_overgen_reward, Color, Entity,
    Environment, ParticleConfig, ParticleWorld, ParticleWorldState, RelOvergen, RelOvergenConfig, StartMode,
    TrajectoryWriter,
};
use marlx::numkit::SeededRng;
use proptest::prelude::*;

fn reference_reward(p: &[usize], d: f64, delta: f64, spike: &[usize], plateau: &[usize]) -> f64 {
    let sq = |t: &[usize]| -> f64 { p.iter().zip(t).map(|(a, b)| (*a as f64 - *b as f64).powi(2)).sum() };
    f64::max(12.0 - delta / d * sq(spike), 0.0 - 1.0 / (8.0 * d) * sq(plateau))
}

#[test]
fn rel_overgen_table_is_exhaustively_the_closed_form() {
    for (d, delta) in [(40, 30.0), (40, 50.0), (20, 60.0), (7, 3.0)] {
        let cfg = RelOvergenConfig::new(2, d, delta);
        for x in 0..d {
            for y in 0..d {
                let want = reference_reward(&[x, y], d as f64, delta, &[0, 0], &[d - 1, d - 1]);
                assert_eq!(rel_overgen_reward(&[x, y], &cfg).unwrap(), want, "({x},{y}) D={d}");
            }
        }
    }
}

#[test]
fn rel_overgen_headline_values() {
    let cfg = RelOvergenConfig::new(2, 40, 30.0);
    assert_eq!(rel_overgen_reward(&[0, 0], &cfg).unwrap(), 12.0);
    assert_eq!(rel_overgen_reward(&[39, 39], &cfg).unwrap(), 0.0);
    assert_eq!(rel_overgen_reward(&[1, 0], &cfg).unwrap(), 11.25);
    let four = RelOvergenConfig::new(4, 20, 60.0);
    assert_eq!(rel_overgen_reward(&[0; 4], &four).unwrap(), 12.0);
    assert_eq!(rel_overgen_reward(&[19; 4], &four).unwrap(), 0.0);
}

#[test]
fn scripted_rel_overgen_trace() {
    let mut cfg = RelOvergenConfig::new(2, 10, 5.0);
    cfg.episode_length = 6;
    let mut env = RelOvergen::new(cfg.clone()).unwrap();
    env.set_positions(&[2, 8]).unwrap();
    let script = [[LEFT, RIGHT], [LEFT, RIGHT], [LEFT, LEFT], [1, LEFT], [RIGHT, 1], [LEFT, RIGHT]];
    let expected = [[1, 9], [0, 9], [0, 8], [0, 7], [1, 7], [0, 8]];
    for (t, (a, p)) in script.iter().zip(&expected).enumerate() {
        let s = env.step(a).unwrap();
        assert_eq!(env.positions(), p);
        assert_eq!(s.reward, reference_reward(p, 10.0, 5.0, &[0, 0], &[9, 9]));
        assert_eq!(s.step_index, t + 1);
        assert_eq!(s.done, t == 5);
        assert!(!s.terminated);
        for (i, o) in s.joint_observation.iter().enumerate() {
            assert_eq!(o.iter().sum::<f64>(), 1.0);
            assert_eq!(o[p[i]], 1.0);
        }
        assert_eq!(s.global_state, s.joint_obs_concat());
    }
    assert!(env.step(&[1, 1]).is_err());
}

#[test]
fn parked_on_plateau_returns_zero() {
    let cfg = RelOvergenConfig::new(2, 20, 60.0);
    let mut env = RelOvergen::new(cfg).unwrap();
    env.set_positions(&[19, 19]).unwrap();
    let mut total = 0.0;
    loop {
        let s = env.step(&[1, 1]).unwrap();
        total += s.reward;
        if s.done {
            assert_eq!(s.step_index, 100);
            break;
        }
    }
    assert_eq!(total, 0.0);
}

#[test]
fn rel_overgen_resets() {
    let mut cfg = RelOvergenConfig::new(3, 20, 60.0);
    cfg.start = StartMode::Center;
    let mut env = RelOvergen::new(cfg.clone()).unwrap();
    env.reset(&mut SeededRng::new(1));
    assert_eq!(env.positions(), &[9, 9, 9]);

    cfg.start = StartMode::Uniform;
    let mut env = RelOvergen::new(cfg).unwrap();
    let mut counts = vec![0usize; 20];
    let mut rng = SeededRng::new(2);
    for _ in 0..2000 {
        let s = env.reset(&mut rng);
        assert_eq!(s.joint_observation.len(), 3);
        for p in env.positions() {
            counts[*p] += 1;
        }
    }
    assert!(counts.iter().all(|c| *c > 200 && *c < 400), "{counts:?}");
}

#[test]
fn rel_overgen_rejects_bad_actions() {
    let mut env = RelOvergen::new(RelOvergenConfig::new(2, 5, 1.0)).unwrap();
    env.reset(&mut SeededRng::new(0));
    assert!(env.step(&[0]).is_err());
    assert!(env.step(&[0, 3]).is_err());
}

fn free_world(accel: f64, max_speed: f64) -> ParticleWorld {
    let mut cfg = ParticleConfig::placement();
    cfg.dynamics.accel = accel;
    cfg.dynamics.max_speed = max_speed;
    ParticleWorld::new(cfg).unwrap()
}

fn park(world: &mut ParticleWorld, a: [f64; 2], b: [f64; 2]) {
    let mut s = world.state().clone();
    if s.landmarks.is_empty() {
        world.reset(&mut SeededRng::new(0));
        s = world.state().clone();
    }
    s.agents = vec![Entity { pos: a, vel: [0.0; 2] }, Entity { pos: b, vel: [0.0; 2] }];
    s.t = 0;
    world.set_state(s).unwrap();
}

#[test]
fn damped_integration_matches_closed_form() {
    let mut world = free_world(1.0, 10.0);
    park(&mut world, [-0.8, 0.0], [0.0, -0.8]);
    let (rho, a, dt) = (0.75f64, 1.0, 0.1);
    let mut x = -0.8;
    let mut y = -0.8;
    for k in 1..=20 {
        world.step(&[EAST, NORTH]).unwrap();
        let v = a * dt * (1.0 - rho.powi(k)) / (1.0 - rho);
        x += v * dt;
        y += v * dt;
        let s = world.state();
        assert!((s.agents[0].vel[0] - v).abs() < 1e-12);
        assert!((s.agents[0].pos[0] - x).abs() < 1e-12);
        assert!((s.agents[1].pos[1] - y).abs() < 1e-12);
        assert_eq!(s.agents[0].pos[1], 0.0);
        assert_eq!(s.agents[1].pos[0], 0.0);
    }
}

#[test]
fn speed_is_clamped() {
    let mut world = free_world(5.0, 1.0);
    park(&mut world, [-0.9, 0.0], [0.0, 0.0]);
    let mut speeds = Vec::new();
    for _ in 0..5 {
        world.step(&[EAST, STAY]).unwrap();
        speeds.push(world.state().agents[0].vel[0]);
    }
    assert_eq!(speeds[0], 0.5);
    assert_eq!(speeds[1], 0.875);
    assert!(speeds[2..].iter().all(|v| *v == 1.0));
}

#[test]
fn walls_are_inelastic() {
    let mut world = free_world(5.0, 1.0);
    park(&mut world, [0.9, 0.0], [0.0, 0.0]);
    for _ in 0..5 {
        world.step(&[EAST, STAY]).unwrap();
    }
    let a = world.state().agents[0];
    assert_eq!(a.pos[0], 0.95);
    assert_eq!(a.vel[0], 0.0);
    world.step(&[WEST, STAY]).unwrap();
    assert!(world.state().agents[0].pos[0] < 0.95);
}

fn placement_at(a: [f64; 2], b: [f64; 2]) -> f64 {
    let cfg = ParticleConfig::placement();
    let mut world = ParticleWorld::new(cfg.clone()).unwrap();
    world.reset(&mut SeededRng::new(0));
    let mut s = world.state().clone();
    s.agents = vec![Entity { pos: a, vel: [0.0; 2] }, Entity { pos: b, vel: [0.0; 2] }];
    coordinated_placement_reward(&s, &cfg.dynamics)
}

fn landmark_of(color: Color, k: usize) -> [f64; 2] {
    let mut world = ParticleWorld::new(ParticleConfig::placement()).unwrap();
    world.reset(&mut SeededRng::new(0));
    world
        .state()
        .landmarks
        .iter()
        .filter(|l| l.color == Some(color))
        .nth(k)
        .unwrap()
        .pos
}

#[test]
fn placement_reward_table() {
    use Color::*;
    let off = [0.0, 0.0];
    let spots = |c| [landmark_of(c, 0), landmark_of(c, 1)];
    for a in [Red, Blue, Yellow] {
        for b in [Red, Blue, Yellow] {
            for pa in spots(a) {
                for pb in spots(b) {
                    let want = match (a, b) {
                        (Red, Red) => 10.0,
                        (Blue, Blue) => 2.0,
                        (Yellow, Yellow) => 1.0,
                        (Red, _) | (_, Red) => 0.5,
                        _ => 0.0,
                    };
                    assert_eq!(placement_at(pa, pb), want, "{a:?} {b:?}");
                }
            }
        }
        let single = if a == Red { 0.0 } else { 0.5 };
        assert_eq!(placement_at(spots(a)[0], off), single);
        assert_eq!(placement_at(off, spots(a)[1]), single);
    }
    assert_eq!(placement_at(off, off), 0.0);
    assert_eq!(placement_at(landmark_of(Red, 0), [0.0, 0.5]), 0.5);
}

#[test]
fn placement_strategy_ceilings() {
    let r = placement_strategy_returns(&ParticleConfig::placement());
    let values: Vec<f64> = r.iter().map(|(_, v)| *v).collect();
    assert_eq!(values, vec![1000.0, 200.0, 100.0, 50.0]);
}

#[test]
fn placement_episode_runs_to_time_limit() {
    let mut world = ParticleWorld::new(ParticleConfig::placement()).unwrap();
    let first = world.reset(&mut SeededRng::new(3));
    assert_eq!(first.joint_observation[0].len(), 43);
    assert_eq!(world.state_dim(), first.global_state.len());
    for a in &world.state().agents {
        assert_eq!(a.pos[1], 0.0);
        assert!(a.pos[0].abs() <= 1.0);
    }
    let mut t = 0;
    loop {
        let s = world.step(&[STAY, STAY]).unwrap();
        t += 1;
        assert!(!s.terminated);
        if s.done {
            break;
        }
    }
    assert_eq!(t, 100);
}

fn push_state(world: &ParticleWorld) -> ParticleWorldState {
    world.state().clone()
}

#[test]
fn box_push_reward_table() {
    let cfg = ParticleConfig::box_push();
    let mut world = ParticleWorld::new(cfg.clone()).unwrap();
    world.reset(&mut SeededRng::new(4));
    let mut s = push_state(&world);
    let target = s.landmarks[0].pos;
    s.agents = vec![Entity { pos: [-0.5, 0.0], vel: [0.0; 2] }, Entity { pos: [0.5, 0.0], vel: [0.0; 2] }];
    s.object = Some(Entity { pos: target, vel: [0.0; 2] });
    assert_eq!(box_push_reward(&s, &cfg), (100.0, true));
    s.object = Some(Entity { pos: [0.0, 0.5], vel: [0.0; 2] });
    assert_eq!(box_push_reward(&s, &cfg), (-0.1, false));
    s.agents[1].pos = [-0.45, 0.0];
    assert_eq!(box_push_reward(&s, &cfg), (-2.1, false));
}

#[test]
fn pushing_moves_the_box_and_delivery_terminates() {
    let cfg = ParticleConfig::box_push();
    let mut world = ParticleWorld::new(cfg).unwrap();
    let first = world.reset(&mut SeededRng::new(5));
    assert_eq!(first.joint_observation[1].len(), 16);
    let mut s = push_state(&world);
    let target = s.landmarks[0].pos;
    let dir = [target[0].signum(), target[1].signum()];
    let obj = [target[0] - 0.3 * dir[0], target[1]];
    s.object = Some(Entity { pos: obj, vel: [0.0; 2] });
    s.agents = vec![
        Entity { pos: [obj[0] - 0.19 * dir[0], obj[1]], vel: [0.0; 2] },
        Entity { pos: [-target[0], -target[1]], vel: [0.0; 2] },
    ];
    world.set_state(s).unwrap();
    let toward = if dir[0] > 0.0 { EAST } else { WEST };
    let start = world.state().object.unwrap().pos[0];
    let mut delivered = None;
    for t in 1..=100 {
        let step = world.step(&[toward, STAY]).unwrap();
        if step.done {
            delivered = Some((t, step));
            break;
        }
    }
    let (t, step) = delivered.expect("box never delivered");
    assert!(t < 100);
    assert!(step.terminated);
    assert_eq!(step.reward, 100.0);
    let end = world.state().object.unwrap().pos[0];
    assert!((end - start) * dir[0] > 0.0);
    assert!(world.step(&[STAY, STAY]).is_err());
}

#[test]
fn trajectory_dump_has_one_row_per_step() {
    let mut env = RelOvergen::new(RelOvergenConfig::new(2, 5, 2.0)).unwrap();
    let mut w = TrajectoryWriter::new(Vec::new(), &env).unwrap();
    env.reset(&mut SeededRng::new(0));
    env.set_positions(&[1, 2]).unwrap();
    for _ in 0..3 {
        let s = env.step(&[LEFT, RIGHT]).unwrap();
        w.record(0, &env, &[LEFT, RIGHT], &s).unwrap();
    }
    let text = String::from_utf8(w.into_inner()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "episode,step,pos0,pos1,a0,a1,reward,done");
    assert_eq!(lines.len(), 4);
    assert!(lines[3].starts_with("0,3,0,4,0,2,"));
}

proptest! {
    #[test]
    fn resets_are_deterministic(seed in 0u64..10_000) {
        for cfg in [ParticleConfig::box_push(), ParticleConfig::placement()] {
            let mut a = ParticleWorld::new(cfg.clone()).unwrap();
            let mut b = ParticleWorld::new(cfg).unwrap();
            let sa = a.reset(&mut SeededRng::new(seed));
            let sb = b.reset(&mut SeededRng::new(seed));
            prop_assert_eq!(sa, sb);
            for _ in 0..10 {
                let (x, y) = (a.step(&[0, 2]).unwrap(), b.step(&[0, 2]).unwrap());
                let done = x.done;
                prop_assert_eq!(x, y);
                if done {
                    break;
                }
            }
        }
    }

    #[test]
    fn particle_positions_stay_in_arena(seed in 0u64..10_000) {
        let mut world = ParticleWorld::new(ParticleConfig::box_push()).unwrap();
        world.reset(&mut SeededRng::new(seed));
        let mut rng = SeededRng::new(seed + 1);
        for _ in 0..100 {
            let a = [rng.below(5), rng.below(5)];
            let s = world.step(&a).unwrap();
            for e in world.state().agents.iter().chain(world.state().object.iter()) {
                prop_assert!(e.pos[0].abs() <= 1.0 && e.pos[1].abs() <= 1.0);
            }
            if s.done {
                break;
            }
        }
    }

    #[test]
    fn rel_overgen_reward_never_exceeds_peak(x in 0usize..40, y in 0usize..40, delta in 1.0f64..100.0) {
        let cfg = RelOvergenConfig::new(2, 40, delta);
        let r = rel_overgen_reward(&[x, y], &cfg).unwrap();
        prop_assert!(r <= 12.0);
        prop_assert_eq!(r == 12.0, x == 0 && y == 0);
    }
}
