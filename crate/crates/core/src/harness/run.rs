use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::intrinsic::{combine_reward, IntrinsicLogWriter, IntrinsicMode, IntrinsicReward};
use crate::learner::{save_checkpoint, select_actions, AgentNet, Checkpoint, Episode, QmixLearner, ReplayBuffer};
use crate::numkit::SeededRng;

use super::config::ExperimentConfig;
use super::log::{EvalRecord, RunLog};

/// Greedy rollouts. Returns the mean and population standard deviation of
/// the undiscounted extrinsic returns.
pub fn evaluate(
    agent: &AgentNet,
    env: &mut dyn Environment,
    episodes: usize,
    rng: &mut SeededRng,
) -> Result<(f64, f64)> {
    if episodes == 0 {
        return Err(Error::Domain("evaluation needs at least one episode".into()));
    }
    let mut returns = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut step = env.reset(rng);
        let mut last: Option<Vec<usize>> = None;
        let mut total = 0.0;
        while !step.done {
            let a = select_actions(agent, &step.joint_observation, last.as_deref(), 0.0, rng)?;
            step = env.step(&a)?;
            total += step.reward;
            last = Some(a);
        }
        returns.push(total);
    }
    Ok(mean_std(&returns))
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Directory of one run: `<out>/<name>/seed_<seed>`.
pub fn run_dir(out: &Path, config: &ExperimentConfig, seed: u64) -> PathBuf {
    out.join(&config.name).join(format!("seed_{seed}"))
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

struct Outputs {
    dir: PathBuf,
    log: BufWriter<File>,
    intrinsic: Option<IntrinsicLogWriter<BufWriter<File>>>,
}

impl Outputs {
    fn create(dir: &Path, config: &ExperimentConfig, seed: u64) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let cfg_path = dir.join("config.txt");
        std::fs::write(&cfg_path, config_for_seed(config, seed)).map_err(io_err(&cfg_path))?;
        let log_path = dir.join("log.csv");
        let mut log = BufWriter::new(File::create(&log_path).map_err(io_err(&log_path))?);
        writeln!(log, "{}", RunLog::HEADER).map_err(io_err(&log_path))?;
        let intrinsic = if config.log_intrinsic {
            let p = dir.join("intrinsic.csv");
            let f = BufWriter::new(File::create(&p).map_err(io_err(&p))?);
            Some(IntrinsicLogWriter::new(f).map_err(io_err(&p))?)
        } else {
            None
        };
        Ok(Self { dir: dir.to_path_buf(), log, intrinsic })
    }

    fn record(&mut self, r: &EvalRecord) -> Result<()> {
        let p = self.dir.join("log.csv");
        writeln!(self.log, "{}", RunLog::row(r)).map_err(io_err(&p))?;
        self.log.flush().map_err(io_err(&p))
    }
}

fn config_for_seed(config: &ExperimentConfig, seed: u64) -> String {
    let mut c = config.clone();
    c.seeds = vec![seed];
    c.to_text()
}

/// Everything a finished run leaves behind.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub log: RunLog,
    pub learner: QmixLearner,
}

/// Trains one seed. When `out` is set, the log is written incrementally to
/// `out/log.csv` next to `config.txt`, and `checkpoint.txt` at the end.
pub fn run_training(config: &ExperimentConfig, seed: u64, out: Option<&Path>) -> Result<RunResult> {
    run_inner(config, seed, out).map_err(|e| Error::Run {
        seed,
        source: Box::new(e),
    })
}

fn run_inner(config: &ExperimentConfig, seed: u64, out: Option<&Path>) -> Result<RunResult> {
    config.validate()?;
    let started = Instant::now();
    let root = SeededRng::new(seed);
    let mut env_rng = root.split("env");
    let mut policy_rng = root.split("policy");
    let mut replay_rng = root.split("replay");
    let mut eval_rng = root.split("eval");

    let mut env = config.env.build()?;
    let mut eval_env = config.env.build()?;
    let (n, obs_dim, state_dim, n_actions) = (env.n_agents(), env.obs_dim(), env.state_dim(), env.n_actions());
    let mut learner = QmixLearner::new(config.train.clone(), obs_dim, state_dim, n, n_actions, &root)?;
    let mut intrinsic = IntrinsicReward::new(
        config.intrinsic.clone(),
        n,
        obs_dim,
        n_actions,
        &mut root.split("init.intrinsic"),
    )?;
    let beta = if config.intrinsic.mode == IntrinsicMode::None { 0.0 } else { config.intrinsic.beta };
    let mut buffer = ReplayBuffer::new(config.train.replay)?;
    let mut outputs = out.map(|d| Outputs::create(d, config, seed)).transpose()?;

    let mut log = RunLog {
        seed,
        records: Vec::new(),
    };
    let mut last_clock = -1.0f64;
    let mut int_sum = 0.0;
    let mut int_count = 0u64;
    let mut eval_point = |steps: u64,
                          int_sum: &mut f64,
                          int_count: &mut u64,
                          learner: &QmixLearner,
                          log: &mut RunLog,
                          outputs: &mut Option<Outputs>|
     -> Result<()> {
        let (mean, std) = evaluate(learner.agent(), eval_env.as_mut(), config.eval_episodes, &mut eval_rng)?;
        let clock = started.elapsed().as_secs_f64().max(last_clock + 1e-6);
        last_clock = clock;
        let rec = EvalRecord {
            env_steps: steps,
            eval_mean: mean,
            eval_std: std,
            intrinsic_mean: if *int_count == 0 { 0.0 } else { *int_sum / *int_count as f64 },
            wall_clock: clock,
        };
        *int_sum = 0.0;
        *int_count = 0;
        if let Some(o) = outputs.as_mut() {
            o.record(&rec)?;
        }
        log.records.push(rec);
        Ok(())
    };

    eval_point(0, &mut int_sum, &mut int_count, &learner, &mut log, &mut outputs)?;
    let mut steps = 0u64;
    while steps < config.total_steps {
        let mut step = env.reset(&mut env_rng);
        intrinsic.reset_episode();
        let mut episode = Episode::new(n, obs_dim, state_dim);
        episode.push_observation(&step.joint_observation, &step.global_state)?;
        let mut last: Option<Vec<usize>> = None;
        loop {
            let eps = config.train.epsilon(steps);
            let actions = select_actions(learner.agent(), &step.joint_observation, last.as_deref(), eps, &mut policy_rng)?;
            let next = env.step(&actions)?;
            let signals = intrinsic.step(&step.joint_observation, &actions, &next.joint_observation)?;
            let reward = combine_reward(next.reward, signals.r_int, beta);
            if let Some(w) = outputs.as_mut().and_then(|o| o.intrinsic.as_mut()) {
                w.record(steps + 1, &signals, next.reward, reward)
                    .map_err(|e| Error::io(Path::new("intrinsic.csv"), e))?;
            }
            episode.push_transition(&actions, reward, next.terminated)?;
            episode.push_observation(&next.joint_observation, &next.global_state)?;
            steps += 1;
            int_sum += beta * signals.r_int;
            int_count += 1;
            if steps % config.eval_interval == 0 || steps == config.total_steps {
                eval_point(steps, &mut int_sum, &mut int_count, &learner, &mut log, &mut outputs)?;
            }
            let done = next.done;
            step = next;
            last = Some(actions);
            if done || steps == config.total_steps {
                break;
            }
        }
        buffer.add(episode)?;
        buffer.anneal_beta(steps as f64 / config.total_steps as f64);
        if buffer.len() >= config.train.batch_size && steps < config.total_steps {
            let batch = buffer.sample(config.train.batch_size, &mut replay_rng)?;
            let eps: Vec<&Episode> = batch.indices.iter().map(|i| buffer.episode(*i)).collect();
            let report = learner.td_train_step(&eps, &batch.weights)?;
            buffer.update_priorities(&batch.indices, &report.priorities)?;
        }
    }

    if let Some(o) = outputs.as_mut() {
        if let Some(w) = o.intrinsic.as_mut() {
            w.flush().map_err(io_err(&o.dir))?;
        }
        let ckpt = checkpoint_of(&learner, &config_for_seed(config, seed));
        save_checkpoint(&o.dir.join("checkpoint.txt"), &ckpt)?;
    }
    Ok(RunResult { log, learner })
}

pub fn checkpoint_of(learner: &QmixLearner, config_text: &str) -> Checkpoint {
    let mut nets = vec![("agent".to_string(), learner.agent().mlp().clone())];
    for (name, m) in ["mixer.w1", "mixer.b1", "mixer.w2", "mixer.v"]
        .iter()
        .zip(learner.mixer().hypernets())
    {
        nets.push((name.to_string(), m.clone()));
    }
    Checkpoint {
        config_text: config_text.to_string(),
        nets,
    }
}

/// Greedy evaluation of a saved agent network on the environment its config names.
pub fn evaluate_checkpoint(ckpt: &Checkpoint, episodes: usize, seed: u64) -> Result<(f64, f64)> {
    let config = ExperimentConfig::from_text(&ckpt.config_text)?;
    let mut env = config.env.build()?;
    let mlp = ckpt
        .net("agent")
        .ok_or_else(|| Error::Checkpoint {
            line: 0,
            msg: "checkpoint has no 'agent' network".into(),
        })?
        .clone();
    let agent = AgentNet::from_mlp(mlp, env.obs_dim(), env.n_agents(), env.n_actions())?;
    evaluate(&agent, env.as_mut(), episodes, &mut SeededRng::new(seed).split("eval"))
}
