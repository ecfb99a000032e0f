//! Intrinsic rewards.
//!
//! A [`NoveltyModule`] owns the life-long part (RND and the clamped novelty
//! gain) and the episodic part (ψ embeddings folded into an ellipse). The
//! joint variant runs one module over the concatenated joint observation, the
//! local variant runs one module per agent and averages their rewards.

mod ellipse;
mod inverse_dynamics;
mod log;
mod rnd;

use std::collections::VecDeque;

pub use ellipse::{eec_from_bonus, EllipseState};
pub use inverse_dynamics::{InverseDynamicsModel, TransitionBatch};
pub use log::IntrinsicLogWriter;
pub use rnd::RndModule;

use crate::error::{Error, Result};
use crate::numkit::{Matrix, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntrinsicMode {
    None,
    /// Product of both criteria over the joint observation.
    Jim,
    /// Product of both criteria per agent, averaged.
    Lim,
    /// Life-long criterion only, joint observation.
    JimLlec,
    /// Episodic criterion only, joint observation.
    JimEec,
}

impl IntrinsicMode {
    pub fn uses_llec(self) -> bool {
        matches!(self, IntrinsicMode::Jim | IntrinsicMode::Lim | IntrinsicMode::JimLlec)
    }

    pub fn uses_eec(self) -> bool {
        matches!(self, IntrinsicMode::Jim | IntrinsicMode::Lim | IntrinsicMode::JimEec)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntrinsicConfig {
    pub mode: IntrinsicMode,
    /// Weight of the intrinsic reward in the team reward.
    pub beta: f64,
    /// Scaling of the current-state novelty in the life-long criterion.
    pub alpha: f64,
    pub lr: f64,
    pub encoding_dim: usize,
    pub hidden_dim: usize,
    /// Ridge coefficient of the ellipse.
    pub lambda: f64,
    /// Number of most recent transitions used per training step.
    pub batch: usize,
    /// Environment steps between training steps.
    pub train_every: usize,
    /// Multiplier applied to the single criterion of the ablated modes.
    pub ablation_scale: f64,
}

impl Default for IntrinsicConfig {
    fn default() -> Self {
        Self {
            mode: IntrinsicMode::None,
            beta: 1.0,
            alpha: 0.5,
            lr: 1e-4,
            encoding_dim: 64,
            hidden_dim: 128,
            lambda: 0.1,
            batch: 64,
            train_every: 1,
            ablation_scale: 1.0,
        }
    }
}

impl IntrinsicConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::Config(format!("beta must be >= 0, got {}", self.beta)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!("alpha must be in (0, 1], got {}", self.alpha)));
        }
        if !(self.lr >= 0.0) || !(self.lambda > 0.0) {
            return Err(Error::Config("intrinsic lr must be >= 0 and lambda > 0".into()));
        }
        if self.batch == 0 || self.train_every == 0 || self.encoding_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::Config("intrinsic sizes and cadence must be positive".into()));
        }
        Ok(())
    }
}

/// `r = r_ext + β·r_int`.
pub fn combine_reward(r_ext: f64, r_int: f64, beta: f64) -> f64 {
    r_ext + beta * r_int
}

/// Life-long criterion from two novelty values: `max(RND(next) − α·RND(cur), 0)`.
pub fn llec_from_novelty(rnd_cur: f64, rnd_next: f64, alpha: f64) -> f64 {
    (rnd_next - alpha * rnd_cur).max(0.0)
}

/// Life-long criterion evaluated with `module` on both observations.
pub fn llec(module: &RndModule, obs_t: &[f64], obs_next: &[f64], alpha: f64) -> Result<f64> {
    let both = Matrix::from_rows(&[obs_t, obs_next])?;
    let n = module.novelty_batch(&both)?;
    Ok(llec_from_novelty(n[0], n[1], alpha))
}

/// Joint reward from its two criteria.
pub fn jim_product(llec: f64, eec: f64) -> f64 {
    llec * eec
}

/// Single-criterion reward of the ablated modes.
pub fn ablation_reward(mode: IntrinsicMode, llec: f64, eec: f64, scale: f64) -> Result<f64> {
    match mode {
        IntrinsicMode::JimLlec => Ok(scale * llec),
        IntrinsicMode::JimEec => Ok(scale * eec),
        other => Err(Error::Config(format!("{other:?} is not an ablation mode"))),
    }
}

/// Team reward from per-agent local rewards (their mean).
pub fn lim_combine(per_agent: &[f64]) -> f64 {
    if per_agent.is_empty() {
        0.0
    } else {
        per_agent.iter().sum::<f64>() / per_agent.len() as f64
    }
}

/// Per-step quantities of one novelty module.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Signals {
    /// `RND(o_{t+1})`.
    pub rnd: f64,
    pub llec: f64,
    /// Elliptic bonus of `ψ(o_{t+1})` before it was folded in.
    pub bonus: f64,
    pub eec: f64,
}

#[derive(Debug, Clone)]
struct Transition {
    obs: Vec<f64>,
    action: Vec<usize>,
    next_obs: Vec<f64>,
}

/// Life-long and episodic machinery over one observation stream.
#[derive(Debug, Clone)]
pub struct NoveltyModule {
    rnd: Option<RndModule>,
    idm: Option<InverseDynamicsModel>,
    ellipse: Option<EllipseState>,
    alpha: f64,
    recent: VecDeque<Transition>,
    batch: usize,
    train_every: usize,
    steps: u64,
}

impl NoveltyModule {
    pub fn new(
        input_dim: usize,
        action_sizes: &[usize],
        config: &IntrinsicConfig,
        with_llec: bool,
        with_eec: bool,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        config.validate()?;
        let rnd = with_llec
            .then(|| {
                RndModule::new(input_dim, config.hidden_dim, config.encoding_dim, config.lr, rng)
            })
            .transpose()?;
        let idm = with_eec
            .then(|| {
                InverseDynamicsModel::new(
                    input_dim,
                    config.hidden_dim,
                    config.encoding_dim,
                    action_sizes,
                    config.lr,
                    rng,
                )
            })
            .transpose()?;
        let ellipse = with_eec
            .then(|| EllipseState::new(config.encoding_dim, config.lambda))
            .transpose()?;
        Ok(Self {
            rnd,
            idm,
            ellipse,
            alpha: config.alpha,
            recent: VecDeque::with_capacity(config.batch),
            batch: config.batch,
            train_every: config.train_every,
            steps: 0,
        })
    }

    pub fn rnd(&self) -> Option<&RndModule> {
        self.rnd.as_ref()
    }

    pub fn inverse_dynamics(&self) -> Option<&InverseDynamicsModel> {
        self.idm.as_ref()
    }

    pub fn ellipse(&self) -> Option<&EllipseState> {
        self.ellipse.as_ref()
    }

    pub fn reset_episode(&mut self) {
        if let Some(e) = self.ellipse.as_mut() {
            e.reset();
        }
    }

    /// Signals for the transition `o_t → o_{t+1}`, then the ellipse update and
    /// on-stream training of the predictor and ψ.
    pub fn step(&mut self, obs: &[f64], action: &[usize], next_obs: &[f64]) -> Result<Signals> {
        let mut s = Signals::default();
        if let Some(rnd) = &self.rnd {
            let both = Matrix::from_rows(&[obs, next_obs])?;
            let n = rnd.novelty_batch(&both)?;
            s.rnd = n[1];
            s.llec = llec_from_novelty(n[0], n[1], self.alpha);
        }
        if let (Some(idm), Some(ellipse)) = (&self.idm, self.ellipse.as_mut()) {
            let emb = idm.embed(next_obs)?;
            s.bonus = ellipse.bonus(&emb)?;
            s.eec = eec_from_bonus(s.bonus);
            ellipse.update(&emb)?;
        }

        if self.recent.len() == self.batch {
            self.recent.pop_front();
        }
        self.recent.push_back(Transition {
            obs: obs.to_vec(),
            action: action.to_vec(),
            next_obs: next_obs.to_vec(),
        });
        self.steps += 1;
        if self.steps % self.train_every as u64 == 0 {
            self.train_recent()?;
        }
        Ok(s)
    }

    fn train_recent(&mut self) -> Result<()> {
        let next = Matrix::from_rows(&self.recent.iter().map(|t| t.next_obs.as_slice()).collect::<Vec<_>>())?;
        if let Some(rnd) = self.rnd.as_mut() {
            rnd.train(&next)?;
        }
        if let Some(idm) = self.idm.as_mut() {
            let obs = Matrix::from_rows(&self.recent.iter().map(|t| t.obs.as_slice()).collect::<Vec<_>>())?;
            let actions: Vec<Vec<usize>> = self.recent.iter().map(|t| t.action.clone()).collect();
            idm.train(&TransitionBatch {
                obs: &obs,
                actions: &actions,
                next_obs: &next,
            })?;
        }
        Ok(())
    }
}

/// Result of one intrinsic step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSignals {
    pub r_int: f64,
    /// One entry for joint modes, one per agent for the local mode.
    pub modules: Vec<Signals>,
    pub per_agent_reward: Vec<f64>,
}

/// Intrinsic reward generator for a whole team.
#[derive(Debug, Clone)]
pub struct IntrinsicReward {
    config: IntrinsicConfig,
    modules: Vec<NoveltyModule>,
    n_agents: usize,
    obs_dim: usize,
}

impl IntrinsicReward {
    pub fn new(
        config: IntrinsicConfig,
        n_agents: usize,
        obs_dim: usize,
        n_actions: usize,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        config.validate()?;
        let mode = config.mode;
        let modules = match mode {
            IntrinsicMode::None => Vec::new(),
            IntrinsicMode::Lim => (0..n_agents)
                .map(|i| {
                    let mut r = rng.split(&format!("lim{i}"));
                    NoveltyModule::new(obs_dim, &[n_actions], &config, true, true, &mut r)
                })
                .collect::<Result<_>>()?,
            _ => vec![NoveltyModule::new(
                obs_dim * n_agents,
                &vec![n_actions; n_agents],
                &config,
                mode.uses_llec(),
                mode.uses_eec(),
                rng,
            )?],
        };
        Ok(Self {
            config,
            modules,
            n_agents,
            obs_dim,
        })
    }

    pub fn config(&self) -> &IntrinsicConfig {
        &self.config
    }

    pub fn mode(&self) -> IntrinsicMode {
        self.config.mode
    }

    pub fn modules(&self) -> &[NoveltyModule] {
        &self.modules
    }

    pub fn reset_episode(&mut self) {
        self.modules.iter_mut().for_each(NoveltyModule::reset_episode);
    }

    /// Intrinsic reward for the joint transition `o_t → o_{t+1}`.
    pub fn step(
        &mut self,
        joint_obs: &[Vec<f64>],
        joint_action: &[usize],
        joint_next_obs: &[Vec<f64>],
    ) -> Result<StepSignals> {
        if joint_obs.len() != self.n_agents || joint_next_obs.len() != self.n_agents {
            return Err(Error::shape("intrinsic joint observation", self.n_agents, joint_obs.len()));
        }
        if joint_action.len() != self.n_agents {
            return Err(Error::shape("intrinsic joint action", self.n_agents, joint_action.len()));
        }
        for o in joint_obs.iter().chain(joint_next_obs) {
            if o.len() != self.obs_dim {
                return Err(Error::shape("intrinsic local observation", self.obs_dim, o.len()));
            }
        }
        let mode = self.config.mode;
        match mode {
            IntrinsicMode::None => Ok(StepSignals {
                r_int: 0.0,
                modules: Vec::new(),
                per_agent_reward: Vec::new(),
            }),
            IntrinsicMode::Lim => {
                let mut modules = Vec::with_capacity(self.n_agents);
                let mut rewards = Vec::with_capacity(self.n_agents);
                for (i, m) in self.modules.iter_mut().enumerate() {
                    let s = m.step(&joint_obs[i], &joint_action[i..=i], &joint_next_obs[i])?;
                    rewards.push(jim_product(s.llec, s.eec));
                    modules.push(s);
                }
                Ok(StepSignals {
                    r_int: lim_combine(&rewards),
                    modules,
                    per_agent_reward: rewards,
                })
            }
            _ => {
                let o = joint_obs.concat();
                let n = joint_next_obs.concat();
                let s = self.modules[0].step(&o, joint_action, &n)?;
                let r_int = match mode {
                    IntrinsicMode::Jim => jim_product(s.llec, s.eec),
                    _ => ablation_reward(mode, s.llec, s.eec, self.config.ablation_scale)?,
                };
                Ok(StepSignals {
                    r_int,
                    modules: vec![s],
                    per_agent_reward: Vec::new(),
                })
            }
        }
    }
}
