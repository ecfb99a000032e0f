use std::path::Path;
use std::process::Command;

use marlx::envs::{EnvConfig, Environment, RelOvergen, RelOvergenConfig, StartMode};
use marlx::harness::cli::sweep;
use marlx::harness::{
    aggregate, evaluate, evaluate_checkpoint, mean_std, run_dir, run_training, Algo, EvalRecord, ExperimentConfig,
    RunLog,
};
use marlx::learner::{load_checkpoint, AgentNet};
use marlx::numkit::{Activation, Matrix, Mlp, SeededRng};
use marlx::Error;

const TINY: &str = "\
name = tiny
algo = qmix+jim
env.id = rel_overgen
env.size = 6
env.delta = 6
env.episode_length = 10
intrinsic.encoding_dim = 8
intrinsic.hidden_dim = 16
train.batch_size = 4
train.agent_hidden = 16
train.mixer_embed = 8
train.hypernet_hidden = 8
run.total_steps = 300
run.eval_interval = 100
run.eval_episodes = 2
";

fn tiny(algo: Algo) -> ExperimentConfig {
    let mut c = ExperimentConfig::from_text(TINY).unwrap();
    c.algo = algo;
    c.intrinsic.mode = algo.intrinsic_mode();
    c
}

fn marlx() -> Command {
    Command::new(env!("CARGO_BIN_EXE_marlx"))
}

fn log(seed: u64, points: &[(u64, f64)]) -> RunLog {
    RunLog {
        seed,
        records: points
            .iter()
            .map(|&(env_steps, eval_mean)| EvalRecord {
                env_steps,
                eval_mean,
                eval_std: 0.0,
                intrinsic_mean: 0.0,
                wall_clock: 0.0,
            })
            .collect(),
    }
}

#[test]
fn cli_without_required_config_exits_with_usage() {
    let out = marlx().arg("train").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("Usage"), "{err}");
    assert!(err.contains("--config"), "{err}");
}

#[test]
fn cli_selftest_passes() {
    let out = marlx().arg("selftest").output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn cli_reports_bad_config_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.txt");
    std::fs::write(&path, "algo = qmix\ntrain.lr = fast\n").unwrap();
    let out = marlx().args(["train", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("train.lr"));
}

#[test]
fn cli_train_eval_and_plot_honour_the_output_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.txt");
    std::fs::write(&cfg, TINY).unwrap();
    let root = dir.path().join("env_root");
    let out = marlx()
        .args(["train", "--seed", "3", "--config"])
        .arg(&cfg)
        .env("MARLX_OUT", &root)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let run = root.join("tiny").join("seed_3");
    for f in ["log.csv", "config.txt", "checkpoint.txt"] {
        assert!(run.join(f).is_file(), "{f} missing");
    }

    let out = marlx()
        .args(["eval", "--episodes", "2", "--checkpoint"])
        .arg(run.join("checkpoint.txt"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("mean "));

    let plot = dir.path().join("plots").join("curve");
    let out = marlx().args(["plot", "--runs"]).arg(root.join("tiny")).arg("--out").arg(&plot).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(plot.with_extension("svg").is_file());
    assert!(dir.path().join("plots").join("curve_tiny.csv").is_file());
}

#[test]
fn sweep_runs_every_seed_in_parallel() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(Algo::Qmix);
    let logs = sweep(&cfg, &[4, 5, 6], 3, dir.path()).unwrap();
    assert_eq!(logs.iter().map(|l| l.seed).collect::<Vec<_>>(), vec![4, 5, 6]);
    for (seed, log) in [4, 5, 6].into_iter().zip(&logs) {
        let on_disk = RunLog::load(&run_dir(dir.path(), &cfg, seed).join("log.csv"), seed).unwrap();
        assert_eq!(on_disk.to_csv_without_clock(), log.to_csv_without_clock());
    }
    assert!(sweep(&cfg, &[1, 1], 1, dir.path()).is_err());
}

#[test]
fn same_seed_reproduces_the_log() {
    for algo in Algo::ALL {
        let cfg = tiny(algo);
        let a = run_training(&cfg, 11, None).unwrap();
        let b = run_training(&cfg, 11, None).unwrap();
        assert_eq!(a.log.to_csv_without_clock(), b.log.to_csv_without_clock(), "{}", algo.name());
        assert_eq!(a.log.records.len(), 4);
        let c = run_training(&cfg, 12, None).unwrap();
        assert_eq!(c.log.records.len(), 4);
    }
}

#[test]
fn zero_steps_gives_a_single_eval_point() {
    let mut cfg = tiny(Algo::QmixJim);
    cfg.total_steps = 0;
    let r = run_training(&cfg, 1, None).unwrap();
    assert_eq!(r.log.records.len(), 1);
    assert_eq!(r.log.records[0].env_steps, 0);
}

#[test]
fn zero_beta_reduces_to_the_baseline() {
    let base = run_training(&tiny(Algo::Qmix), 21, None).unwrap();
    for algo in [Algo::QmixJim, Algo::QmixLim, Algo::JimLlec, Algo::JimEec] {
        let mut cfg = tiny(algo);
        cfg.intrinsic.beta = 0.0;
        let r = run_training(&cfg, 21, None).unwrap();
        assert_eq!(r.log.to_csv_without_clock(), base.log.to_csv_without_clock(), "{}", algo.name());
    }
}

#[test]
fn checkpoint_evaluation_matches_in_memory_agent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(Algo::Qmix);
    let run = run_dir(dir.path(), &cfg, 2);
    let res = run_training(&cfg, 2, Some(&run)).unwrap();
    let ckpt = load_checkpoint(&run.join("checkpoint.txt")).unwrap();
    let from_disk = evaluate_checkpoint(&ckpt, 3, 9).unwrap();
    let EnvConfig::RelOvergen(env_cfg) = &cfg.env else { unreachable!() };
    let mut env = RelOvergen::new(env_cfg.clone()).unwrap();
    let in_memory = evaluate(res.learner.agent(), &mut env, 3, &mut SeededRng::new(9).split("eval")).unwrap();
    assert_eq!(from_disk, in_memory);
}

#[test]
fn aggregate_statistics_are_population_mean_and_std() {
    let a = log(1, &[(0, 0.0), (10, 0.0)]);
    let b = log(2, &[(0, 2.0), (10, 2.0)]);
    let pts = aggregate(&[a.clone(), b]).unwrap();
    for p in &pts {
        assert!((p.mean - 1.0).abs() < 1e-12 && (p.std - 1.0).abs() < 1e-12);
    }
    let single = aggregate(&[a.clone()]).unwrap();
    assert!(single.iter().all(|p| p.std == 0.0));
    let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
    assert!((m - 2.5).abs() < 1e-12 && (s - 1.25f64.sqrt()).abs() < 1e-12);
}

#[test]
fn misaligned_logs_are_rejected() {
    let a = log(1, &[(0, 0.0), (10, 0.0)]);
    let short = log(2, &[(0, 0.0)]);
    let shifted = log(3, &[(0, 0.0), (20, 0.0)]);
    assert!(matches!(aggregate(&[a.clone(), short]), Err(Error::Alignment(_))));
    assert!(matches!(aggregate(&[a, shifted]), Err(Error::Alignment(_))));
    assert!(matches!(aggregate(&[]), Err(Error::Alignment(_))));
}

#[test]
fn run_log_csv_round_trips() {
    let l = log(7, &[(0, -3.25), (100, 1092.5)]);
    let back = RunLog::from_csv(&l.to_csv(), 7).unwrap();
    assert_eq!(back, l);
    assert!(RunLog::from_csv("steps,return\n", 7).is_err());
}

#[test]
fn config_round_trips_and_rejects_bad_keys() {
    let cfg = ExperimentConfig::from_text(TINY).unwrap();
    assert_eq!(ExperimentConfig::from_text(&cfg.to_text()).unwrap(), cfg);
    for p in ["box_push", "placement"] {
        let c = ExperimentConfig::from_text(&format!("env.id = {p}\nalgo = qmix+lim\n")).unwrap();
        assert_eq!(ExperimentConfig::from_text(&c.to_text()).unwrap(), c);
    }
    let err = |text: &str| ExperimentConfig::from_text(text).unwrap_err().to_string();
    assert!(err("train.learning_rate = 0.1\n").contains("train.learning_rate"));
    assert!(err("train.lr = 0.1\ntrain.lr = 0.2\n").contains("train.lr"));
    assert!(err("algo = sac\n").contains("sac"));
    assert!(err("env.id = rel_overgen\nenv.start = corner\n").contains("corner"));
    assert!(ExperimentConfig::from_text("run.seeds = 1, 1\n").is_err());
    assert!(ExperimentConfig::from_text("name = a/b\n").is_err());
    assert!(ExperimentConfig::load(Path::new("/nonexistent/cfg.txt")).is_err());
}

fn constant_agent(obs_dim: usize, favoured: usize) -> AgentNet {
    let input = obs_dim + 2 + 3;
    let w = Matrix::zeros(input, 3);
    let mut b = vec![0.0; 3];
    b[favoured] = 1.0;
    let mlp = Mlp::from_parts(vec![w], vec![b], Activation::Relu, Activation::Identity).unwrap();
    AgentNet::from_mlp(mlp, obs_dim, 2, 3).unwrap()
}

#[test]
fn greedy_evaluation_of_fixed_policies() {
    let mut cfg = RelOvergenConfig::new(2, 20, 60.0);
    cfg.start = StartMode::Center;
    let mut env = RelOvergen::new(cfg.clone()).unwrap();
    let obs = env.obs_dim();

    let (mean, std) = evaluate(&constant_agent(obs, 0), &mut env, 1, &mut SeededRng::new(0)).unwrap();
    assert_eq!(std, 0.0);
    let mut expected = 0.0;
    let mut pos = [9usize, 9];
    for _ in 0..cfg.episode_length {
        pos = [pos[0].saturating_sub(1), pos[1].saturating_sub(1)];
        expected += marlx::envs::rel_overgen_reward(&pos, &cfg).unwrap();
    }
    assert!((mean - expected).abs() < 1e-9, "{mean} vs {expected}");

    let (mean, std) = evaluate(&constant_agent(obs, 2), &mut env, 3, &mut SeededRng::new(0)).unwrap();
    assert!(mean < 0.0 && mean > -20.0 && std == 0.0, "{mean}");
    assert!(evaluate(&constant_agent(obs, 1), &mut env, 0, &mut SeededRng::new(0)).is_err());
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(ExperimentConfig::from_text(&cfg.to_text()).unwrap(), cfg);
        n += 1;
    }
    assert!(n >= 6);
}
