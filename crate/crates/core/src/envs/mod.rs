//! Dec-POMDP environments.
//!
//! Every environment hands out one observation per agent, a global state for
//! the centralised mixer and a single shared reward.

pub mod particle;
pub mod rel_overgen;
mod trajectory;

pub use particle::{
    box_push_reward, coordinated_placement_reward, observe, Color, Dynamics, Entity, Landmark,
    ObservationSpec, ParticleConfig, ParticleTask, ParticleWorld, ParticleWorldState,
    placement_strategy_returns,
};
pub use rel_overgen::{rel_overgen_reward, RelOvergen, RelOvergenConfig, StartMode};
pub use trajectory::TrajectoryWriter;

use crate::error::Result;
use crate::numkit::SeededRng;

/// One transition as seen by the agents.
#[derive(Debug, Clone, PartialEq)]
pub struct DecPomdpStep {
    pub joint_observation: Vec<Vec<f64>>,
    pub global_state: Vec<f64>,
    pub reward: f64,
    /// Episode is over (terminal state or time limit).
    pub done: bool,
    /// Episode ended in a terminal state; the TD target must not bootstrap.
    pub terminated: bool,
    pub step_index: usize,
}

impl DecPomdpStep {
    /// Fixed-order concatenation of the per-agent observations.
    pub fn joint_obs_concat(&self) -> Vec<f64> {
        self.joint_observation.concat()
    }
}

pub trait Environment: Send {
    fn name(&self) -> &'static str;
    fn n_agents(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn obs_dim(&self) -> usize;
    fn state_dim(&self) -> usize;
    fn episode_limit(&self) -> usize;
    fn reset(&mut self, rng: &mut SeededRng) -> DecPomdpStep;
    fn step(&mut self, joint_action: &[usize]) -> Result<DecPomdpStep>;
    /// Column names of [`Environment::raw_state`] for trajectory dumps.
    fn raw_state_header(&self) -> Vec<String>;
    /// Human-readable state (positions etc.) for trajectory dumps.
    fn raw_state(&self) -> Vec<f64>;
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnvConfig {
    RelOvergen(RelOvergenConfig),
    Particle(ParticleConfig),
}

impl EnvConfig {
    pub fn build(&self) -> Result<Box<dyn Environment>> {
        Ok(match self {
            EnvConfig::RelOvergen(c) => Box::new(RelOvergen::new(c.clone())?),
            EnvConfig::Particle(c) => Box::new(ParticleWorld::new(c.clone())?),
        })
    }

    pub fn id(&self) -> &'static str {
        match self {
            EnvConfig::RelOvergen(_) => "rel_overgen",
            EnvConfig::Particle(c) => match c.task {
                ParticleTask::BoxPush => "box_push",
                ParticleTask::Placement => "placement",
            },
        }
    }
}

/// Builds the environment and draws its first step.
pub fn env_reset(
    config: &EnvConfig,
    rng: &mut SeededRng,
) -> Result<(Box<dyn Environment>, DecPomdpStep)> {
    let mut env = config.build()?;
    let first = env.reset(rng);
    Ok((env, first))
}
