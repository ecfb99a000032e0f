use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::envs::{EnvConfig, ParticleConfig, ParticleTask, RelOvergenConfig, StartMode};
use crate::error::{Error, Result};
use crate::intrinsic::{IntrinsicConfig, IntrinsicMode};
use crate::learner::TrainConfig;
use crate::numkit::OptimizerKind;

/// Learner plus reward definition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    Qmix,
    QmixJim,
    QmixLim,
    JimLlec,
    JimEec,
}

impl Algo {
    pub const ALL: [Algo; 5] = [Algo::Qmix, Algo::QmixJim, Algo::QmixLim, Algo::JimLlec, Algo::JimEec];

    pub fn name(self) -> &'static str {
        match self {
            Algo::Qmix => "qmix",
            Algo::QmixJim => "qmix+jim",
            Algo::QmixLim => "qmix+lim",
            Algo::JimLlec => "jim-llec",
            Algo::JimEec => "jim-eec",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == s)
    }

    pub fn intrinsic_mode(self) -> IntrinsicMode {
        match self {
            Algo::Qmix => IntrinsicMode::None,
            Algo::QmixJim => IntrinsicMode::Jim,
            Algo::QmixLim => IntrinsicMode::Lim,
            Algo::JimLlec => IntrinsicMode::JimLlec,
            Algo::JimEec => IntrinsicMode::JimEec,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub algo: Algo,
    pub env: EnvConfig,
    pub intrinsic: IntrinsicConfig,
    pub train: TrainConfig,
    pub total_steps: u64,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    /// Write the per-step intrinsic signal CSV.
    pub log_intrinsic: bool,
}

impl ExperimentConfig {
    pub fn new(name: &str, algo: Algo, env: EnvConfig) -> Self {
        Self {
            name: name.to_string(),
            algo,
            env,
            intrinsic: IntrinsicConfig {
                mode: algo.intrinsic_mode(),
                ..IntrinsicConfig::default()
            },
            train: TrainConfig::default(),
            total_steps: 2_000_000,
            eval_interval: 10_000,
            eval_episodes: 10,
            seeds: vec![1],
            out_dir: PathBuf::from("runs"),
            log_intrinsic: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.intrinsic.validate()?;
        if self.intrinsic.mode != self.algo.intrinsic_mode() {
            return Err(Error::Config(format!(
                "intrinsic mode {:?} does not match algo {}",
                self.intrinsic.mode,
                self.algo.name()
            )));
        }
        match &self.env {
            EnvConfig::RelOvergen(c) => c.validate()?,
            EnvConfig::Particle(c) => c.validate()?,
        }
        if self.eval_interval == 0 || self.eval_episodes == 0 {
            return Err(Error::Config("eval interval and episodes must be positive".into()));
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::Config(format!("invalid experiment name '{}'", self.name)));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut kv = KeyValues::parse(text)?;
        let env_id = kv.take_str("env.id")?.unwrap_or_else(|| "rel_overgen".into());
        let env = match env_id.as_str() {
            "rel_overgen" => {
                let n = kv.take("env.n_agents")?.unwrap_or(2);
                let size = kv.take("env.size")?.unwrap_or(40);
                let delta = kv.take("env.delta")?.unwrap_or(30.0);
                let mut c = RelOvergenConfig::new(n, size, delta);
                kv.set(&mut c.r_plus, "env.r_plus")?;
                kv.set(&mut c.r_minus, "env.r_minus")?;
                if let Some(v) = kv.take_list("env.spike_pos")? {
                    c.spike_pos = v;
                }
                if let Some(v) = kv.take_list("env.plateau_pos")? {
                    c.plateau_pos = v;
                }
                kv.set(&mut c.episode_length, "env.episode_length")?;
                if let Some(s) = kv.take_str("env.start")? {
                    c.start = StartMode::from_name(&s)
                        .ok_or_else(|| kv.err("env.start", format!("unknown start mode '{s}'")))?;
                }
                EnvConfig::RelOvergen(c)
            }
            "box_push" | "placement" => {
                let mut c = if env_id == "box_push" {
                    ParticleConfig::box_push()
                } else {
                    ParticleConfig::placement()
                };
                kv.set(&mut c.obs_range, "env.obs_range")?;
                kv.set(&mut c.episode_length, "env.episode_length")?;
                kv.set(&mut c.step_penalty, "env.step_penalty")?;
                kv.set(&mut c.collision_penalty, "env.collision_penalty")?;
                kv.set(&mut c.delivery_reward, "env.delivery_reward")?;
                let d = &mut c.dynamics;
                kv.set(&mut d.damping, "env.damping")?;
                kv.set(&mut d.accel, "env.accel")?;
                kv.set(&mut d.dt, "env.dt")?;
                kv.set(&mut d.max_speed, "env.max_speed")?;
                kv.set(&mut d.agent_radius, "env.agent_radius")?;
                kv.set(&mut d.box_radius, "env.box_radius")?;
                kv.set(&mut d.landmark_radius, "env.landmark_radius")?;
                kv.set(&mut d.contact_stiffness, "env.contact_stiffness")?;
                kv.set(&mut d.box_mass, "env.box_mass")?;
                EnvConfig::Particle(c)
            }
            other => return Err(kv.err("env.id", format!("unknown environment '{other}'"))),
        };

        let algo_name = kv.take_str("algo")?.unwrap_or_else(|| "qmix".into());
        let algo = Algo::from_name(&algo_name).ok_or_else(|| kv.err("algo", format!("unknown algo '{algo_name}'")))?;
        let name = kv.take_str("name")?.unwrap_or_else(|| format!("{}_{}", env.id(), algo.name()));
        let mut cfg = ExperimentConfig::new(&name, algo, env);

        let i = &mut cfg.intrinsic;
        kv.set(&mut i.beta, "intrinsic.beta")?;
        kv.set(&mut i.alpha, "intrinsic.alpha")?;
        kv.set(&mut i.lr, "intrinsic.lr")?;
        kv.set(&mut i.encoding_dim, "intrinsic.encoding_dim")?;
        kv.set(&mut i.hidden_dim, "intrinsic.hidden_dim")?;
        kv.set(&mut i.lambda, "intrinsic.lambda")?;
        kv.set(&mut i.batch, "intrinsic.batch")?;
        kv.set(&mut i.train_every, "intrinsic.train_every")?;
        kv.set(&mut i.ablation_scale, "intrinsic.ablation_scale")?;

        let t = &mut cfg.train;
        kv.set(&mut t.gamma, "train.gamma")?;
        kv.set(&mut t.lr, "train.lr")?;
        if let Some(o) = kv.take_str("train.optimizer")? {
            t.optimizer = OptimizerKind::from_name(&o)
                .ok_or_else(|| kv.err("train.optimizer", format!("unknown optimizer '{o}'")))?;
        }
        kv.set(&mut t.grad_clip, "train.grad_clip")?;
        kv.set(&mut t.batch_size, "train.batch_size")?;
        kv.set(&mut t.target_update, "train.target_update")?;
        kv.set(&mut t.epsilon_start, "train.epsilon_start")?;
        kv.set(&mut t.epsilon_finish, "train.epsilon_finish")?;
        kv.set(&mut t.epsilon_anneal, "train.epsilon_anneal")?;
        if let Some(h) = kv.take_list("train.agent_hidden")? {
            t.agent_hidden = h;
        }
        kv.set(&mut t.mixer_embed, "train.mixer_embed")?;
        kv.set(&mut t.hypernet_hidden, "train.hypernet_hidden")?;
        kv.set(&mut t.replay.capacity, "train.buffer_capacity")?;
        kv.set(&mut t.replay.alpha, "train.per_alpha")?;
        kv.set(&mut t.replay.beta_start, "train.per_beta_start")?;
        kv.set(&mut t.replay.priority_eps, "train.priority_eps")?;

        kv.set(&mut cfg.total_steps, "run.total_steps")?;
        kv.set(&mut cfg.eval_interval, "run.eval_interval")?;
        kv.set(&mut cfg.eval_episodes, "run.eval_episodes")?;
        if let Some(s) = kv.take_list("run.seeds")? {
            cfg.seeds = s;
        }
        if let Some(o) = kv.take_str("run.out_dir")? {
            cfg.out_dir = PathBuf::from(o);
        }
        kv.set(&mut cfg.log_intrinsic, "run.log_intrinsic")?;

        kv.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Text form accepted by [`ExperimentConfig::from_text`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("name", self.name.clone());
        put("algo", self.algo.name().into());
        put("env.id", self.env.id().into());
        match &self.env {
            EnvConfig::RelOvergen(c) => {
                put("env.n_agents", c.n_agents.to_string());
                put("env.size", c.size.to_string());
                put("env.delta", fmt_f(c.delta));
                put("env.r_plus", fmt_f(c.r_plus));
                put("env.r_minus", fmt_f(c.r_minus));
                put("env.spike_pos", join(&c.spike_pos));
                put("env.plateau_pos", join(&c.plateau_pos));
                put("env.episode_length", c.episode_length.to_string());
                put("env.start", c.start.name().into());
            }
            EnvConfig::Particle(c) => {
                put("env.obs_range", fmt_f(c.obs_range));
                put("env.episode_length", c.episode_length.to_string());
                put("env.step_penalty", fmt_f(c.step_penalty));
                put("env.collision_penalty", fmt_f(c.collision_penalty));
                put("env.delivery_reward", fmt_f(c.delivery_reward));
                let d = &c.dynamics;
                put("env.damping", fmt_f(d.damping));
                put("env.accel", fmt_f(d.accel));
                put("env.dt", fmt_f(d.dt));
                put("env.max_speed", fmt_f(d.max_speed));
                put("env.agent_radius", fmt_f(d.agent_radius));
                put("env.box_radius", fmt_f(d.box_radius));
                put("env.landmark_radius", fmt_f(d.landmark_radius));
                put("env.contact_stiffness", fmt_f(d.contact_stiffness));
                put("env.box_mass", fmt_f(d.box_mass));
            }
        }
        let i = &self.intrinsic;
        put("intrinsic.beta", fmt_f(i.beta));
        put("intrinsic.alpha", fmt_f(i.alpha));
        put("intrinsic.lr", fmt_f(i.lr));
        put("intrinsic.encoding_dim", i.encoding_dim.to_string());
        put("intrinsic.hidden_dim", i.hidden_dim.to_string());
        put("intrinsic.lambda", fmt_f(i.lambda));
        put("intrinsic.batch", i.batch.to_string());
        put("intrinsic.train_every", i.train_every.to_string());
        put("intrinsic.ablation_scale", fmt_f(i.ablation_scale));
        let t = &self.train;
        put("train.gamma", fmt_f(t.gamma));
        put("train.lr", fmt_f(t.lr));
        put("train.optimizer", t.optimizer.name().into());
        put("train.grad_clip", fmt_f(t.grad_clip));
        put("train.batch_size", t.batch_size.to_string());
        put("train.target_update", t.target_update.to_string());
        put("train.epsilon_start", fmt_f(t.epsilon_start));
        put("train.epsilon_finish", fmt_f(t.epsilon_finish));
        put("train.epsilon_anneal", t.epsilon_anneal.to_string());
        put("train.agent_hidden", join(&t.agent_hidden));
        put("train.mixer_embed", t.mixer_embed.to_string());
        put("train.hypernet_hidden", t.hypernet_hidden.to_string());
        put("train.buffer_capacity", t.replay.capacity.to_string());
        put("train.per_alpha", fmt_f(t.replay.alpha));
        put("train.per_beta_start", fmt_f(t.replay.beta_start));
        put("train.priority_eps", fmt_f(t.replay.priority_eps));
        put("run.total_steps", self.total_steps.to_string());
        put("run.eval_interval", self.eval_interval.to_string());
        put("run.eval_episodes", self.eval_episodes.to_string());
        put("run.seeds", join(&self.seeds));
        put("run.out_dir", self.out_dir.display().to_string());
        put("run.log_intrinsic", self.log_intrinsic.to_string());
        s
    }
}

fn fmt_f(v: f64) -> String {
    format!("{v:?}")
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

/// `key = value` lines with `#` comments.
struct KeyValues {
    entries: BTreeMap<String, (usize, String)>,
}

impl KeyValues {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {}: expected 'key = value', found '{line}'", n + 1)));
            };
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", n + 1)));
            }
            if entries.insert(k.to_string(), (n + 1, v.to_string())).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key '{k}'", n + 1)));
            }
        }
        Ok(Self { entries })
    }

    fn err(&self, key: &str, msg: String) -> Error {
        Error::Config(format!("{key}: {msg}"))
    }

    fn take_str(&mut self, key: &str) -> Result<Option<String>> {
        Ok(self.entries.remove(key).map(|(_, v)| v))
    }

    fn take<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("line {line}: cannot parse '{v}' for {key}"))),
        }
    }

    fn set<T: std::str::FromStr>(&mut self, slot: &mut T, key: &str) -> Result<()> {
        if let Some(v) = self.take(key)? {
            *slot = v;
        }
        Ok(())
    }

    fn take_list<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((line, v)) => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse()
                        .map_err(|_| Error::Config(format!("line {line}: cannot parse '{s}' in {key}")))
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    fn finish(self) -> Result<()> {
        match self.entries.into_iter().next() {
            None => Ok(()),
            Some((k, (line, _))) => Err(Error::Config(format!("line {line}: unknown key '{k}'"))),
        }
    }
}

/// Which task a config points at, for plots.
pub fn particle_task(env: &EnvConfig) -> Option<ParticleTask> {
    match env {
        EnvConfig::Particle(c) => Some(c.task),
        EnvConfig::RelOvergen(_) => None,
    }
}
