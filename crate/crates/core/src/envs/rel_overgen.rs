use super::{DecPomdpStep, Environment};
use crate::error::{Error, Result};
use crate::numkit::SeededRng;

pub const LEFT: usize = 0;
pub const STAY: usize = 1;
pub const RIGHT: usize = 2;

/// Where agents are placed at reset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartMode {
    /// Each agent independently uniform over `0..D`.
    Uniform,
    /// Every agent at `(D − 1) / 2`.
    Center,
}

impl StartMode {
    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "uniform" => Some(StartMode::Uniform),
            "center" => Some(StartMode::Center),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StartMode::Uniform => "uniform",
            StartMode::Center => "center",
        }
    }
}

/// Parameters of the narrow-spike / wide-plateau reward surface.
#[derive(Debug, Clone, PartialEq)]
pub struct RelOvergenConfig {
    pub n_agents: usize,
    /// Positions per axis.
    pub size: usize,
    /// Spike width coefficient; larger is narrower.
    pub delta: f64,
    pub r_plus: f64,
    pub r_minus: f64,
    pub spike_pos: Vec<usize>,
    pub plateau_pos: Vec<usize>,
    pub episode_length: usize,
    pub start: StartMode,
}

impl RelOvergenConfig {
    /// Spike at the origin corner, plateau at the opposite corner.
    pub fn new(n_agents: usize, size: usize, delta: f64) -> Self {
        Self {
            n_agents,
            size,
            delta,
            r_plus: 12.0,
            r_minus: 0.0,
            spike_pos: vec![0; n_agents],
            plateau_pos: vec![size.saturating_sub(1); n_agents],
            episode_length: 100,
            start: StartMode::Uniform,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_agents == 0 {
            return Err(Error::Config("rel_overgen needs at least one agent".into()));
        }
        if self.size < 2 {
            return Err(Error::Config(format!("rel_overgen size {} < 2", self.size)));
        }
        for (name, p) in [("spike_pos", &self.spike_pos), ("plateau_pos", &self.plateau_pos)] {
            if p.len() != self.n_agents {
                return Err(Error::Config(format!(
                    "{name} has {} coordinates for {} agents",
                    p.len(),
                    self.n_agents
                )));
            }
            if p.iter().any(|c| *c >= self.size) {
                return Err(Error::Config(format!("{name} {p:?} outside [0, {})", self.size)));
            }
        }
        if self.spike_pos == self.plateau_pos {
            return Err(Error::Config("spike_pos and plateau_pos coincide".into()));
        }
        if self.episode_length == 0 {
            return Err(Error::Config("episode_length must be positive".into()));
        }
        if !self.delta.is_finite() || !self.r_plus.is_finite() || !self.r_minus.is_finite() {
            return Err(Error::Config("rel_overgen reward parameters must be finite".into()));
        }
        Ok(())
    }
}

/// `max(R⁺ − δ/D·Σ(pᵢ − r⁺ᵢ)², R⁻ − 1/(8D)·Σ(pᵢ − r⁻ᵢ)²)`.
pub fn rel_overgen_reward(positions: &[usize], config: &RelOvergenConfig) -> Result<f64> {
    if positions.len() != config.n_agents {
        return Err(Error::shape("rel_overgen positions", config.n_agents, positions.len()));
    }
    if let Some(p) = positions.iter().find(|p| **p >= config.size) {
        return Err(Error::Domain(format!(
            "position {p} outside [0, {})",
            config.size
        )));
    }
    let sq = |target: &[usize]| -> f64 {
        positions
            .iter()
            .zip(target)
            .map(|(p, t)| {
                let d = *p as f64 - *t as f64;
                d * d
            })
            .sum()
    };
    let d = config.size as f64;
    let spike = config.r_plus - config.delta / d * sq(&config.spike_pos);
    let plateau = config.r_minus - 1.0 / (8.0 * d) * sq(&config.plateau_pos);
    Ok(spike.max(plateau))
}

#[derive(Debug, Clone)]
pub struct RelOvergen {
    config: RelOvergenConfig,
    positions: Vec<usize>,
    t: usize,
    done: bool,
}

impl RelOvergen {
    pub fn new(config: RelOvergenConfig) -> Result<Self> {
        config.validate()?;
        let positions = vec![0; config.n_agents];
        Ok(Self {
            config,
            positions,
            t: 0,
            done: true,
        })
    }

    pub fn config(&self) -> &RelOvergenConfig {
        &self.config
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    /// Places the agents explicitly and starts a fresh episode from there.
    pub fn set_positions(&mut self, positions: &[usize]) -> Result<DecPomdpStep> {
        rel_overgen_reward(positions, &self.config)?;
        self.positions = positions.to_vec();
        self.t = 0;
        self.done = false;
        Ok(self.emit(0.0))
    }

    fn one_hot(&self, p: usize) -> Vec<f64> {
        let mut o = vec![0.0; self.config.size];
        o[p] = 1.0;
        o
    }

    fn emit(&self, reward: f64) -> DecPomdpStep {
        let joint_observation: Vec<Vec<f64>> =
            self.positions.iter().map(|p| self.one_hot(*p)).collect();
        let global_state = joint_observation.concat();
        DecPomdpStep {
            joint_observation,
            global_state,
            reward,
            done: self.done,
            terminated: false,
            step_index: self.t,
        }
    }
}

impl Environment for RelOvergen {
    fn name(&self) -> &'static str {
        "rel_overgen"
    }

    fn n_agents(&self) -> usize {
        self.config.n_agents
    }

    fn n_actions(&self) -> usize {
        3
    }

    fn obs_dim(&self) -> usize {
        self.config.size
    }

    fn state_dim(&self) -> usize {
        self.config.size * self.config.n_agents
    }

    fn episode_limit(&self) -> usize {
        self.config.episode_length
    }

    fn reset(&mut self, rng: &mut SeededRng) -> DecPomdpStep {
        let d = self.config.size;
        self.positions = match self.config.start {
            StartMode::Uniform => (0..self.config.n_agents).map(|_| rng.below(d)).collect(),
            StartMode::Center => vec![(d - 1) / 2; self.config.n_agents],
        };
        self.t = 0;
        self.done = false;
        self.emit(0.0)
    }

    fn step(&mut self, joint_action: &[usize]) -> Result<DecPomdpStep> {
        if self.done {
            return Err(Error::Domain("step called on a finished episode".into()));
        }
        if joint_action.len() != self.config.n_agents {
            return Err(Error::shape("rel_overgen joint action", self.config.n_agents, joint_action.len()));
        }
        if let Some(a) = joint_action.iter().find(|a| **a > RIGHT) {
            return Err(Error::Domain(format!("rel_overgen action {a} not in 0..3")));
        }
        let top = self.config.size - 1;
        for (p, a) in self.positions.iter_mut().zip(joint_action) {
            *p = match *a {
                LEFT => p.saturating_sub(1),
                RIGHT => (*p + 1).min(top),
                _ => *p,
            };
        }
        self.t += 1;
        self.done = self.t >= self.config.episode_length;
        let reward = rel_overgen_reward(&self.positions, &self.config)?;
        Ok(self.emit(reward))
    }

    fn raw_state_header(&self) -> Vec<String> {
        (0..self.config.n_agents).map(|i| format!("pos{i}")).collect()
    }

    fn raw_state(&self) -> Vec<f64> {
        self.positions.iter().map(|p| *p as f64).collect()
    }
}
