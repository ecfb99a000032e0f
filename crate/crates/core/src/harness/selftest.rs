use crate::envs::{
    box_push_reward, coordinated_placement_reward, rel_overgen_reward, Color, Entity, Environment, ParticleConfig,
    ParticleWorld, RelOvergenConfig,
};
use crate::error::Result;
use crate::intrinsic::EllipseState;
use crate::learner::MixerNet;
use crate::numkit::{cholesky_inverse, Activation, Matrix, Mlp, SeededRng};

/// Pass count of one suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: usize,
    pub total: usize,
}

impl SuiteResult {
    pub fn ok(&self) -> bool {
        self.passed == self.total
    }
}

fn random_mlp(rng: &mut SeededRng) -> Result<Mlp> {
    let depth = 1 + rng.below(3);
    let mut sizes = vec![1 + rng.below(8)];
    for _ in 0..depth {
        sizes.push(1 + rng.below(64));
    }
    sizes.push(1 + rng.below(6));
    let mut net = Mlp::new(&sizes, Activation::Relu, Activation::Identity, rng)?;
    for b in net.param_slices_mut().into_iter().skip(1).step_by(2) {
        b.iter_mut().for_each(|v| *v = rng.uniform_range(-0.3, 0.3));
    }
    Ok(net)
}

/// Largest relative error between analytic and central-difference gradients
/// of `c · net(x)`.
pub fn gradient_check(net: &Mlp, x: &[f64], c: &[f64], h: f64) -> Result<f64> {
    let (_, cache) = net.forward(x)?;
    let (grads, dx) = net.backward(&cache, c)?;
    let f = |n: &Mlp, x: &[f64]| -> Result<f64> { Ok(n.predict(x)?.iter().zip(c).map(|(a, b)| a * b).sum()) };
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-6);
    let mut worst = 0.0f64;
    let mut probe = net.clone();
    let analytic: Vec<Vec<f64>> = grads.slices().iter().map(|s| s.to_vec()).collect();
    for (k, g) in analytic.iter().enumerate() {
        for j in 0..g.len() {
            let orig = probe.param_slices()[k][j];
            probe.param_slices_mut()[k][j] = orig + h;
            let fp = f(&probe, x)?;
            probe.param_slices_mut()[k][j] = orig - h;
            let fm = f(&probe, x)?;
            probe.param_slices_mut()[k][j] = orig;
            worst = worst.max(rel(g[j], (fp - fm) / (2.0 * h)));
        }
    }
    let mut xp = x.to_vec();
    for j in 0..x.len() {
        xp[j] = x[j] + h;
        let fp = f(net, &xp)?;
        xp[j] = x[j] - h;
        let fm = f(net, &xp)?;
        xp[j] = x[j];
        worst = worst.max(rel(dx[j], (fp - fm) / (2.0 * h)));
    }
    Ok(worst)
}

/// Smallest |pre-activation| of any hidden unit, to keep probes away from ReLU kinks.
pub fn kink_margin(net: &Mlp, x: &[f64]) -> Result<f64> {
    let mut a = x.to_vec();
    let mut margin = f64::INFINITY;
    for l in 0..net.n_layers() {
        let w = net.weights(l);
        let mut z = net.biases(l).to_vec();
        for (i, ai) in a.iter().enumerate() {
            for (zj, wij) in z.iter_mut().zip(w.row(i)) {
                *zj += ai * wij;
            }
        }
        if l + 1 < net.n_layers() {
            margin = z.iter().fold(margin, |m, v| m.min(v.abs()));
            z.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        a = z;
    }
    Ok(margin)
}

pub fn gradient_suite(nets: usize, seed: u64) -> Result<SuiteResult> {
    let mut rng = SeededRng::new(seed);
    let mut passed = 0;
    for _ in 0..nets {
        let net = random_mlp(&mut rng)?;
        let x = loop {
            let x: Vec<f64> = (0..net.input_dim()).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
            if kink_margin(&net, &x)? > 1e-3 {
                break x;
            }
        };
        let c: Vec<f64> = (0..net.output_dim()).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
        if gradient_check(&net, &x, &c, 1e-5)? < 1e-4 {
            passed += 1;
        }
    }
    Ok(SuiteResult {
        name: "gradients",
        passed,
        total: nets,
    })
}

/// Incremental ellipse inverse against a Cholesky inverse of `λI + Σvvᵀ`.
pub fn ellipse_suite(sequences: usize, seed: u64) -> Result<SuiteResult> {
    let mut rng = SeededRng::new(seed);
    let mut passed = 0;
    for _ in 0..sequences {
        let dim = 8 + rng.below(25);
        let len = 1 + rng.below(200);
        let lambda = 0.1;
        let mut e = EllipseState::new(dim, lambda)?;
        let mut c = Matrix::scaled_identity(dim, lambda);
        for _ in 0..len {
            let v: Vec<f64> = (0..dim).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
            e.update(&v)?;
            for i in 0..dim {
                for j in 0..dim {
                    c.set(i, j, c.get(i, j) + v[i] * v[j]);
                }
            }
        }
        let direct = cholesky_inverse(&c)?;
        let rel = e.c_inv().sub(&direct)?.frobenius_norm() / direct.frobenius_norm();
        if rel < 1e-8 {
            passed += 1;
        }
    }
    Ok(SuiteResult {
        name: "sherman-morrison",
        passed,
        total: sequences,
    })
}

pub fn reward_table_suite() -> Result<SuiteResult> {
    let mut checks: Vec<bool> = Vec::new();
    let ro = RelOvergenConfig::new(2, 40, 30.0);
    checks.push(rel_overgen_reward(&ro.spike_pos, &ro)? == 12.0);
    checks.push(rel_overgen_reward(&ro.plateau_pos, &ro)? == 0.0);
    checks.push(rel_overgen_reward(&[1, 0], &ro)? == 11.25);

    let placement = ParticleConfig::placement();
    let mut world = ParticleWorld::new(placement.clone())?;
    world.reset(&mut SeededRng::new(0));
    let base = world.state().clone();
    let spot = |c: Color, k: usize| {
        base.landmarks
            .iter()
            .filter(|l| l.color == Some(c))
            .nth(k)
            .map(|l| l.pos)
            .unwrap_or([0.0, 0.0])
    };
    let at = |a: [f64; 2], b: [f64; 2]| {
        let mut s = base.clone();
        s.agents = vec![Entity { pos: a, vel: [0.0; 2] }, Entity { pos: b, vel: [0.0; 2] }];
        coordinated_placement_reward(&s, &placement.dynamics)
    };
    let off = [0.0, 0.0];
    checks.push(at(spot(Color::Red, 0), spot(Color::Red, 1)) == 10.0);
    checks.push(at(spot(Color::Blue, 0), spot(Color::Blue, 1)) == 2.0);
    checks.push(at(spot(Color::Yellow, 0), spot(Color::Yellow, 1)) == 1.0);
    checks.push(at(spot(Color::Yellow, 0), off) == 0.5);
    checks.push(at(off, off) == 0.0);

    let push = ParticleConfig::box_push();
    let mut world = ParticleWorld::new(push.clone())?;
    world.reset(&mut SeededRng::new(0));
    let mut s = world.state().clone();
    let target = s.landmarks[0].pos;
    s.agents = vec![Entity { pos: [-0.5, 0.0], vel: [0.0; 2] }, Entity { pos: [0.5, 0.0], vel: [0.0; 2] }];
    s.object = Some(Entity { pos: target, vel: [0.0; 2] });
    checks.push(box_push_reward(&s, &push) == (100.0, true));
    s.object = Some(Entity { pos: [0.0, 0.5], vel: [0.0; 2] });
    checks.push(box_push_reward(&s, &push) == (-0.1, false));
    s.agents[1].pos = [-0.45, 0.0];
    checks.push(box_push_reward(&s, &push) == (-0.1 - 2.0, false));

    checks.push(ParticleWorld::new(ParticleConfig::box_push())?.obs_dim() == 16);
    checks.push(ParticleWorld::new(ParticleConfig::placement())?.obs_dim() == 43);
    Ok(SuiteResult {
        name: "reward tables",
        passed: checks.iter().filter(|c| **c).count(),
        total: checks.len(),
    })
}

pub fn monotonicity_suite(samples: usize, seed: u64) -> Result<SuiteResult> {
    let mut rng = SeededRng::new(seed);
    let mut passed = 0;
    for _ in 0..samples {
        let n = 1 + rng.below(4);
        let s_dim = 1 + rng.below(10);
        let mixer = MixerNet::new(n, s_dim, 1 + rng.below(16), rng.below(16), &mut rng)?;
        let q: Vec<f64> = (0..n).map(|_| rng.uniform_range(-5.0, 5.0)).collect();
        let s: Vec<f64> = (0..s_dim).map(|_| rng.uniform_range(-2.0, 2.0)).collect();
        let base = mixer.mix(&q, &s)?;
        let mut ok = true;
        for i in 0..n {
            let mut qp = q.clone();
            qp[i] += 1e-4;
            if (mixer.mix(&qp, &s)? - base) / 1e-4 < -1e-8 {
                ok = false;
            }
        }
        passed += usize::from(ok);
    }
    Ok(SuiteResult {
        name: "mixer monotonicity",
        passed,
        total: samples,
    })
}

pub fn run_all() -> Result<Vec<SuiteResult>> {
    Ok(vec![
        gradient_suite(50, 1)?,
        ellipse_suite(20, 2)?,
        reward_table_suite()?,
        monotonicity_suite(1000, 3)?,
    ])
}
